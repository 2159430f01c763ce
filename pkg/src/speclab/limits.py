"""Limiting random analytic functions and predicted outlier locations.

Three regimes are covered:

* ``iid``: q(z) = kappa(z) c(z) exp(-F(z)), F(z) = sum X_k z^k / k with
  independent complex Gaussians X_k, E|X_k|^2 = 1, E[X_k^2] = rho^k.
* ``sparse`` (fixed mean degree d): q(z) = exp(R(z)) c(z) prod_l (1 - d z^l)^(1/l),
  R(z) = sum (tau_k - X_k) z^k / k, X_k = sum_{l | k} l Y_l, Y_l ~ Poisson(d^l / l).
* ``semisparse``: q(z) = -z c(z) sqrt(1 - z^2) G(z), G(z) = exp(sum N_k z^k / sqrt(k)).

Evaluation is restricted to |z| <= EVAL_FRACTION * validity radius.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError, ZeroCountMismatch
from .series import TruncatedPowerSeries, series_exp, series_power
from .spectral import eigenvalues

EVAL_FRACTION = 0.9
POISSON_MEAN_CAP = 1e15
NEWTON_RESIDUAL = 1e-12


@dataclass
class LimitSample:
    regime: str
    series: TruncatedPowerSeries
    raw_variables: dict = field(default_factory=dict)
    rho: complex | None = None
    d: float | None = None

    def to_json(self):
        raw = {}
        for key, values in self.raw_variables.items():
            arr = np.asarray(values)
            if np.iscomplexobj(arr):
                raw[key] = [[float(v.real), float(v.imag)] for v in arr]
            else:
                raw[key] = arr.tolist()
        out = {"regime": self.regime, "series": self.series.to_json(), "raw_variables": raw}
        if self.rho is not None:
            out["rho"] = [complex(self.rho).real, complex(self.rho).imag]
        if self.d is not None:
            out["d"] = self.d
        return out


def _check_eval_point(z, radius):
    limit = EVAL_FRACTION * radius
    if abs(z) > limit:
        raise ValidationError(f"|z|={abs(z):.6g} outside evaluation disk |z| <= {limit:.6g}")


# ---------------------------------------------------------------------------
# i.i.d. (heavy-tailed) regime
# ---------------------------------------------------------------------------


def gaussian_x(rho, K, rng):
    """Independent complex Gaussians X_1..X_K with E|X_k|^2 = 1 and E[X_k^2] = rho^k."""
    rho = complex(rho)
    if abs(rho) > 1 + 1e-12:
        raise ValidationError(f"|rho| must be <= 1, got {abs(rho)}")
    k = np.arange(1, K + 1)
    r = min(abs(rho), 1.0) ** k
    half_phase = np.exp(0.5j * k * cmath.phase(rho))
    g = rng.standard_normal((2, K))
    return half_phase * (np.sqrt((1 + r) / 2) * g[0] + 1j * np.sqrt((1 - r) / 2) * g[1])


def sample_gaussian_log_series(rho, K, rng):
    if K < 1:
        raise ValidationError("K must be >= 1")
    X = gaussian_x(rho, K, rng)
    coeffs = np.concatenate([[0], X / np.arange(1, K + 1)])
    series = TruncatedPowerSeries(coeffs, 1.0, "sampled")
    return LimitSample("iid", series, {"X": X}, rho=complex(rho))


def kappa_eval(rho, z):
    """Principal branch of sqrt(1 - rho z^2) on the unit disk."""
    z = complex(z)
    if abs(z) >= 1:
        raise ValidationError(f"kappa is evaluated on the open unit disk, got |z|={abs(z)}")
    return cmath.sqrt(1 - complex(rho) * z * z)


def limit_q_eval(c, rho, F, z):
    if F.regime != "iid":
        raise ValidationError(f"expected an iid log-series sample, got {F.regime!r}")
    if F.rho is not None and abs(complex(F.rho) - complex(rho)) > 1e-12:
        raise ValidationError("rho does not match the sampled log-series")
    z = complex(z)
    _check_eval_point(z, min(c.validity_radius, F.series.validity_radius))
    return kappa_eval(rho, z) * c(z) * cmath.exp(-F.series(z))


# ---------------------------------------------------------------------------
# Sparse regime, fixed d
# ---------------------------------------------------------------------------


def divisors(k):
    return [l for l in range(1, k + 1) if k % l == 0]


def tau(d, k):
    """E[X_k] = sum_{l | k} d^l."""
    return sum(d**l for l in divisors(k))


def cycle_count_variance(d, k):
    """Var[X_k] = sum_{l | k} l d^l."""
    return sum(l * d**l for l in divisors(k))


def cycle_count_covariance(d, j, k):
    """Cov[X_j, X_k] = sum_{l | gcd(j, k)} l d^l."""
    return cycle_count_variance(d, math.gcd(j, k))


def sample_poisson_cycle_limit(d, K, rng):
    if not d > 1:
        raise ValidationError(f"sparse limit needs d > 1, got {d}")
    if K < 1:
        raise ValidationError("K must be >= 1")
    ells = np.arange(1, K + 1)
    means = np.array([d ** int(l) / int(l) for l in ells], dtype=float)
    if not np.all(np.isfinite(means)) or means.max() > POISSON_MEAN_CAP:
        raise ValidationError(f"Poisson mean d^K/K = {means.max():.3g} too large; lower K or d")
    Y = rng.poisson(means).astype(np.int64)
    X = np.zeros(K, dtype=np.int64)
    for k in range(1, K + 1):
        X[k - 1] = sum(l * Y[l - 1] for l in divisors(k))
    taus = np.array([tau(d, k) for k in range(1, K + 1)], dtype=float)
    coeffs = np.concatenate([[0], (taus - X) / ells])
    series = TruncatedPowerSeries(coeffs, d**-0.5, "sampled")
    return LimitSample("sparse", series, {"Y": Y, "X": X, "tau": taus}, d=float(d))


def product_tail_bound(d, z, L):
    """Bound on |sum_{l > L} log(1 - d z^l) / l|, using |d z^l| <= d |z|^L |z|^(l-L)."""
    r = abs(z)
    head = d * r ** (L + 1)
    if head >= 1 or r >= 1:
        return math.inf
    return head / ((L + 1) * (1 - r) * (1 - head))


def sparse_limit_q_eval(c, d, R, z, L):
    if L < 1:
        raise ValidationError("product truncation L must be >= 1")
    z = complex(z)
    _check_eval_point(z, min(d**-0.5, c.validity_radius, R.series.validity_radius))
    prod = 1 + 0j
    for l in range(1, L + 1):
        base = 1 - d * z**l
        if base == 0:
            return 0j
        prod *= base if l == 1 else base ** (1.0 / l)
    return cmath.exp(R.series(z)) * c(z) * prod


# ---------------------------------------------------------------------------
# Semi-sparse regime
# ---------------------------------------------------------------------------


def sample_semisparse_limit(K, rng):
    if K < 1:
        raise ValidationError("K must be >= 1")
    N = rng.standard_normal(K)
    coeffs = np.concatenate([[0], N / np.sqrt(np.arange(1, K + 1))])
    return LimitSample("semisparse", TruncatedPowerSeries(coeffs, 1.0, "sampled"), {"N": N})


def semisparse_q_eval(c, G, z):
    z = complex(z)
    _check_eval_point(z, min(1.0, c.validity_radius, G.series.validity_radius))
    return -z * c(z) * cmath.sqrt(1 - z * z) * cmath.exp(G.series(z))


# ---------------------------------------------------------------------------
# Whole-function series (for zero location and plotting)
# ---------------------------------------------------------------------------


def limit_function_series(c, sample, degree):
    """Power series of the full limit q(z) up to ``degree``.

    The log-series is a polynomial, so exp(log-series) is entire and the only
    finite-radius factors are the explicit square roots / products.
    """
    one_minus = lambda coeffs: TruncatedPowerSeries(coeffs)  # noqa: E731
    c = c.padded(max(degree, c.degree)).truncate(degree)
    if sample.regime == "iid":
        rho = complex(sample.rho)
        kappa = series_power(one_minus([1, 0, -rho]), 0.5, degree)
        body = series_exp(sample.series * -1, degree)
        radius = 1.0
        q = kappa * c * body
    elif sample.regime == "sparse":
        d = sample.d
        q = series_exp(sample.series, degree) * c
        for l in range(1, degree + 1):
            base = np.zeros(l + 1, dtype=complex)
            base[0], base[l] = 1, -d
            factor = one_minus(base) if l == 1 else series_power(one_minus(base), 1.0 / l, degree)
            q = q * factor.padded(degree)
        radius = d**-0.5
    elif sample.regime == "semisparse":
        root = series_power(one_minus([1, 0, -1]), 0.5, degree)
        q = one_minus([0, -1]).padded(degree) * c * root * series_exp(sample.series, degree)
        radius = 1.0
    else:
        raise ValidationError(f"unknown regime {sample.regime!r}")
    return TruncatedPowerSeries(q.coefficients[: degree + 1], radius, "sampled")


# ---------------------------------------------------------------------------
# Zeros and predictions
# ---------------------------------------------------------------------------


def companion_roots(coeffs):
    """Roots of sum_k coeffs[k] z^k as eigenvalues of the companion matrix."""
    coeffs = np.asarray(coeffs, dtype=complex)
    K = coeffs.size - 1
    if K < 1:
        return np.empty(0, dtype=complex)
    monic = coeffs[:-1] / coeffs[-1]
    comp = np.zeros((K, K), dtype=complex)
    comp[1:, :-1] = np.eye(K - 1)
    comp[:, -1] = -monic
    return eigenvalues(comp)


def _newton_refine(series, dseries, w, scale_coeffs):
    for _ in range(100):
        f = series(w)
        fp = dseries(w)
        if fp == 0:
            break
        step = f / fp
        w = w - step
        if abs(step) <= 1e-16 * max(1.0, abs(w)):
            break
    scale = float(np.sum(scale_coeffs * abs(w) ** np.arange(scale_coeffs.size)))
    return w, abs(series(w)) / max(scale, 1e-300)


def winding_number(series, radius, min_nodes=1024, max_nodes=2**18):
    """Argument-principle count (1/2 pi i) \\oint f'/f dz on |z| = radius by adaptive trapezoid."""
    dseries = series.derivative()
    nodes = min_nodes
    previous = None
    while nodes <= max_nodes:
        theta = 2 * np.pi * np.arange(nodes) / nodes
        z = radius * np.exp(1j * theta)
        f = series(z)
        if np.any(f == 0):
            return math.nan
        value = np.mean(z * dseries(z) / f)
        if previous is not None and abs(value - previous) < 1e-6 and abs(value.real - round(value.real)) < 1e-3:
            return int(round(value.real))
        previous = value
        nodes *= 2
    return math.nan


def zeros_in_disk(series, radius):
    """Zeros of a (truncated) series inside |z| < radius, Newton-polished and count-certified."""
    if not radius < series.validity_radius:
        raise ValidationError(f"radius {radius} not below validity radius {series.validity_radius}")
    coeffs = series.coefficients
    scaled = np.abs(coeffs) * radius ** np.arange(coeffs.size)
    last = coeffs.size - 1
    while last > 0 and scaled[last] <= 1e-17 * scaled.max():
        last -= 1
    if last < 1:
        if series.degree < 1:
            raise ValidationError("series degree must be >= 1")
        work = series.truncate(max(last, 0))
        roots = np.empty(0, dtype=complex)
    else:
        work = series.truncate(last)
        # roots in w = z / radius, where the scaled coefficients are O(1)
        scaled_coeffs = work.coefficients * radius ** np.arange(last + 1)
        roots = radius * companion_roots(scaled_coeffs / np.max(np.abs(scaled_coeffs)))
    dwork = work.derivative()
    abs_coeffs = np.abs(work.coefficients)
    found = []
    for w in roots:
        if not abs(w) < radius * (1 + 1e-6):
            continue
        w, resid = _newton_refine(work, dwork, complex(w), abs_coeffs)
        if abs(w) < radius:
            found.append(w)
    winding = winding_number(work, radius)
    if isinstance(winding, float) or winding != len(found):
        raise ZeroCountMismatch(len(found), winding, radius)
    for w in found:
        _, resid = _newton_refine(work, dwork, w, abs_coeffs)
        if resid > NEWTON_RESIDUAL:
            raise ZeroCountMismatch(len(found), winding, radius)
    values = np.array(found, dtype=complex)
    order = np.lexsort((np.angle(values), np.abs(values)))
    return [complex(v) for v in values[order]]


@dataclass(frozen=True)
class Prediction:
    """A predicted outlier: ``root`` (reciprocal zero of c), ``perron`` (at d), or ``escape``.

    For ``escape`` the value is the finite-n proxy sqrt(d_n) of an eigenvalue
    that diverges in the limit.
    """

    value: complex
    label: str = "root"

    def to_json(self):
        return {"value": [self.value.real, self.value.imag], "label": self.label}


def predicted_outliers(c, bulk_radius_theoretical, regime="iid", d=None):
    """Reciprocals of the zeros of c inside |w| < 1/bulk radius, plus sparse-regime extras."""
    if abs(c.coefficients[0] - 1) > 1e-12:
        raise ValidationError("c must satisfy c(0) = 1")
    preds = []
    if regime == "sparse":
        if d is None or not d > 1:
            raise ValidationError("sparse regime needs d > 1")
        preds.append(Prediction(complex(d), "perron"))
    elif regime == "semisparse":
        if d is None:
            raise ValidationError("semisparse regime needs d_n for the escape proxy")
        preds.append(Prediction(complex(math.sqrt(d)), "escape"))
    elif regime != "iid":
        raise ValidationError(f"unknown regime {regime!r}")
    if c.trimmed().degree >= 1:
        for w in zeros_in_disk(c.trimmed(), 1.0 / bulk_radius_theoretical):
            preds.append(Prediction(1 / w, "root"))
    return preds


def reciprocal_zeros(values):
    return [1 / complex(v) for v in values]
