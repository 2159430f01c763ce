"""Truncated power series on a disk."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class TruncatedPowerSeries:
    """Coefficients c_0..c_K of an analytic function, valid for |z| < validity_radius."""

    coefficients: np.ndarray
    validity_radius: float = math.inf
    provenance: str = "deterministic"

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=complex).ravel()
        if coeffs.size == 0:
            raise ValidationError("a series needs at least one coefficient")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def degree(self):
        return self.coefficients.size - 1

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for c in self.coefficients[::-1]:
            out = out * z + c
        return out if out.ndim else complex(out)

    def derivative(self):
        k = np.arange(1, self.coefficients.size)
        coeffs = self.coefficients[1:] * k if k.size else np.zeros(1)
        return TruncatedPowerSeries(coeffs, self.validity_radius, self.provenance)

    def truncate(self, K):
        return TruncatedPowerSeries(self.coefficients[: K + 1], self.validity_radius, self.provenance)

    def trimmed(self, rtol=0.0):
        """Drop trailing coefficients with modulus <= rtol * max modulus."""
        c = self.coefficients
        cutoff = rtol * np.max(np.abs(c))
        last = c.size - 1
        while last > 0 and abs(c[last]) <= cutoff:
            last -= 1
        return self.truncate(last)

    def padded(self, K):
        c = np.zeros(K + 1, dtype=complex)
        m = min(K + 1, self.coefficients.size)
        c[:m] = self.coefficients[:m]
        return TruncatedPowerSeries(c, self.validity_radius, self.provenance)

    def __mul__(self, other):
        if not isinstance(other, TruncatedPowerSeries):
            return TruncatedPowerSeries(self.coefficients * other, self.validity_radius, self.provenance)
        K = max(self.degree, other.degree)
        prod = np.convolve(self.coefficients, other.coefficients)[: K + 1]
        return TruncatedPowerSeries(
            prod,
            min(self.validity_radius, other.validity_radius),
            _merge_provenance(self.provenance, other.provenance),
        )

    __rmul__ = __mul__

    def to_json(self):
        radius = self.validity_radius
        return {
            "coefficients": [[float(c.real), float(c.imag)] for c in self.coefficients],
            "radius": None if math.isinf(radius) else float(radius),
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, data):
        radius = data.get("radius")
        return cls(
            [complex(re, im) for re, im in data["coefficients"]],
            math.inf if radius is None else float(radius),
            data.get("provenance", "deterministic"),
        )


def _merge_provenance(a, b):
    return "sampled" if "sampled" in (a, b) else a


def series_exp(log_series, K=None):
    """Coefficients of exp(f) from those of f, truncated at degree K (f_0 must be 0)."""
    f = log_series.coefficients
    K = log_series.degree if K is None else K
    if abs(f[0]) > 0:
        raise ValidationError("series_exp expects a log-series with zero constant term")
    f = np.concatenate([f, np.zeros(max(0, K + 1 - f.size), dtype=complex)])[: K + 1]
    # g' = f' g  =>  k g_k = sum_{j=1..k} j f_j g_{k-j}
    g = np.zeros(K + 1, dtype=complex)
    g[0] = 1.0
    jf = np.arange(K + 1) * f
    for k in range(1, K + 1):
        g[k] = np.dot(jf[1 : k + 1], g[k - 1 :: -1][:k]) / k
    return TruncatedPowerSeries(g, log_series.validity_radius, log_series.provenance)


def series_power(base, exponent, K):
    """(1 + b(z))^exponent for a series with base constant term 1, principal branch near z=0."""
    b = base.coefficients
    if abs(b[0] - 1) > 1e-14:
        raise ValidationError("series_power needs constant term 1")
    b = np.concatenate([b, np.zeros(max(0, K + 1 - b.size), dtype=complex)])[: K + 1]
    # J.C.P. Miller recurrence for g = b^a:  k g_k = sum_{j=1..k} ((a+1) j - k) b_j g_{k-j}
    g = np.zeros(K + 1, dtype=complex)
    g[0] = 1.0
    for k in range(1, K + 1):
        j = np.arange(1, k + 1)
        g[k] = np.sum(((exponent + 1) * j - k) * b[1 : k + 1] * g[k - j]) / k
    return TruncatedPowerSeries(g, base.validity_radius, base.provenance)
