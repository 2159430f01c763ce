"""Eigenvalues, trace powers, characteristic coefficients and outlier detection."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .ensembles import ModelMatrix
from .errors import EigensolverError, TraceOverflowError, ValidationError
from .series import TruncatedPowerSeries


@dataclass(frozen=True)
class FixedRadius:
    radius: float


@dataclass(frozen=True)
class LargestGap:
    """Split at the largest consecutive modulus ratio above ``bulk_level``."""

    min_gap_ratio: float
    bulk_level: float = 1.0


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    bulk_radius: float
    outliers: np.ndarray
    trace_powers: list = field(default_factory=list)

    @property
    def bulk(self):
        mask = np.isin(self.eigenvalues, self.outliers, invert=True)
        return self.eigenvalues[mask]


def _as_array(M):
    if isinstance(M, ModelMatrix):
        return M.to_array()
    if sp.issparse(M):
        return M.toarray()
    return np.asarray(M)


def sort_spectrum(values):
    """Deterministic order: modulus descending, then argument ascending."""
    values = np.asarray(values, dtype=complex)
    order = np.lexsort((np.angle(values), -np.abs(values)))
    return values[order]


def eigenvalues(M):
    """All eigenvalues with multiplicity.

    Delegates to LAPACK ``geev`` (balancing, Hessenberg reduction and shifted QR
    with deflation), which is backward stable.
    """
    a = _as_array(M)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"square matrix required, got shape {a.shape}")
    if a.shape[0] == 0:
        return np.empty(0, dtype=complex)
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix has non-finite entries")
    try:
        vals = scipy.linalg.eigvals(a, overwrite_a=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"QR iteration did not converge: {exc}", partial=str(exc)) from exc
    return sort_spectrum(vals)


def trace_powers(M, K):
    """[Tr(M), Tr(M^2), ..., Tr(M^K)] by repeated products (sparse-aware)."""
    if K < 1:
        raise ValidationError("K must be >= 1")
    if isinstance(M, ModelMatrix):
        if M.is_dense or M.low_rank is not None:
            a = M.to_array()
        else:
            a = M.sparse
    elif sp.issparse(M):
        a = sp.csr_matrix(M)
    else:
        a = np.asarray(M)
    out = []
    power = a
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, K + 1):
            if k > 1:
                power = power @ a
            tr = complex(power.diagonal().sum())
            if not np.isfinite(tr):
                raise TraceOverflowError(k)
            out.append(tr)
    return out


def trace_powers_from_eigenvalues(eigs, K):
    eigs = np.asarray(eigs, dtype=complex)
    return [complex(np.sum(eigs**k)) for k in range(1, K + 1)]


def newton_coefficients(traces, K):
    """det(I - zM) coefficients from power sums p_i = Tr(M^i) via Newton's identities."""
    if K < 1:
        raise ValidationError("K must be >= 1")
    if len(traces) < K:
        raise ValidationError(f"need {K} traces, got {len(traces)}")
    p = [complex(t) for t in traces[:K]]
    e = [1 + 0j]
    for k in range(1, K + 1):
        acc = 0j
        for i in range(1, k + 1):
            acc += (-1) ** (i - 1) * e[k - i] * p[i - 1]
        e.append(acc / k)
    coeffs = [(-1) ** k * e[k] for k in range(K + 1)]
    return TruncatedPowerSeries(coeffs, provenance="deterministic")


def eigenproduct_coefficients(eigs):
    """Coefficients of prod_i (1 - z lambda_i)."""
    coeffs = np.array([1 + 0j])
    for lam in eigs:
        coeffs = np.convolve(coeffs, [1, -lam])
    return coeffs


def reverse_charpoly_eval(M, z):
    """det(I - zM) through a pivoted LU factorization."""
    a = _as_array(M)
    n = a.shape[0]
    z = complex(z)
    if z == 0:
        return 1 + 0j
    mat = np.eye(n, dtype=complex) - z * a
    lu, piv = scipy.linalg.lu_factor(mat, check_finite=False)
    diag = np.diag(lu)
    if np.any(diag == 0):
        return 0j
    sign = (-1) ** int(np.sum(piv != np.arange(n)))
    # product via logs to stay in range at large n
    log_abs = np.sum(np.log(np.abs(diag)))
    phase = np.prod(diag / np.abs(diag))
    return complex(sign * phase * np.exp(log_abs))


def detect_outliers(eigs, rule):
    """Split eigenvalues into (bulk, outliers, bulk_radius)."""
    eigs = np.asarray(eigs, dtype=complex)
    if eigs.size == 0:
        raise ValidationError("empty eigenvalue list")
    mod = np.abs(eigs)
    if isinstance(rule, FixedRadius):
        mask = mod > rule.radius
    elif isinstance(rule, LargestGap):
        order = np.argsort(-mod, kind="stable")
        sorted_mod = mod[order]
        best, best_ratio = None, 0.0
        for i in range(sorted_mod.size - 1):
            if sorted_mod[i] <= rule.bulk_level:
                break
            lower = sorted_mod[i + 1]
            ratio = np.inf if lower == 0 else sorted_mod[i] / lower
            if ratio > best_ratio:
                best, best_ratio = i, ratio
        mask = np.zeros(eigs.size, dtype=bool)
        if best is not None and best_ratio >= rule.min_gap_ratio:
            mask[order[: best + 1]] = True
    else:
        raise ValidationError(f"unknown outlier rule {rule!r}")
    bulk = eigs[~mask]
    outliers = eigs[mask]
    bulk_radius = float(np.max(np.abs(bulk))) if bulk.size else 0.0
    return bulk, outliers, bulk_radius


def spectrum(M, rule, K=0):
    eigs = eigenvalues(M)
    _, outliers, radius = detect_outliers(eigs, rule)
    traces = trace_powers(M, K) if K else []
    return SpectrumResult(eigs, radius, outliers, traces)


EIGEN_CSV_COLUMNS = ["trial_seed", "re", "im", "modulus", "classification"]


def write_eigenvalue_csv(path, eigs, outliers, trial_seed, append=False):
    outlier_set = {complex(o) for o in outliers}
    with open(path, "a" if append else "w", newline="") as fh:
        writer = csv.writer(fh)
        if not append:
            writer.writerow(EIGEN_CSV_COLUMNS)
        for lam in eigs:
            lam = complex(lam)
            writer.writerow([
                trial_seed,
                repr(lam.real),
                repr(lam.imag),
                repr(abs(lam)),
                "outlier" if lam in outlier_set else "bulk",
            ])


def read_eigenvalue_csv(path):
    """Rows as (trial_seed, eigenvalue, classification)."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != EIGEN_CSV_COLUMNS:
            raise ValidationError(f"unexpected CSV header {reader.fieldnames}")
        for row in reader:
            out.append((int(row["trial_seed"]), complex(float(row["re"]), float(row["im"])), row["classification"]))
    return out
