"""Scalar entry distributions for i.i.d. random matrices.

Every law is an immutable descriptor that can be shared freely; sampling
draws from a caller-owned ``numpy.random.Generator``.  Standardized laws have
mean 0 and variance 1, and carry ``rho = E[a**2]`` which feeds the limiting
objects in :mod:`speclab.limits`.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ValidationError

QUAD_RTOL = 1e-8


def _gauss_second_moment_below(t):
    """E[g**2 ; |g| <= t] for a standard real Gaussian g."""
    if t <= 0:
        return 0.0
    if math.isinf(t):
        return 1.0
    return math.erf(t / math.sqrt(2)) - 2 * t * math.exp(-t * t / 2) / math.sqrt(2 * math.pi)


class EntryLaw:
    """Base class for entry distributions.

    Subclasses implement ``sample`` and the moment properties.  ``truncated_moments``
    returns ``(E[a 1], E[a^2 1], E[|a|^2 1])`` with ``1 = 1{|a| <= M}``; it is
    what :func:`truncate_law` needs to center and describe a truncated law.
    """

    kind = "abstract"
    standardized = True
    is_real = True

    def sample(self, rng, size=None):
        raise NotImplementedError

    @property
    def mean(self):
        return 0.0

    @property
    def variance(self):
        return 1.0

    @property
    def rho(self):
        raise NotImplementedError

    def truncated_moments(self, M):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class SymmetrizedPareto(EntryLaw):
    """Symmetric law with density proportional to |x|^(-alpha-1) on |x| >= 1, rescaled to unit variance."""

    alpha: float
    kind = "pareto"

    def __post_init__(self):
        if not self.alpha > 2:
            raise ValidationError(f"Pareto tail index must exceed 2 (finite variance), got {self.alpha}")

    @property
    def scale(self):
        return math.sqrt((self.alpha - 2) / self.alpha)

    @property
    def rho(self):
        return 1.0

    def sample(self, rng, size=None):
        magnitude = 1.0 + rng.pareto(self.alpha, size)
        sign = 2 * rng.integers(0, 2, size) - 1
        return self.scale * magnitude * sign

    def truncated_moments(self, M):
        # |x| = scale * P with P ~ Pareto(alpha) on [1, inf).
        u = M / self.scale
        second = 0.0 if u <= 1 else 1.0 - u ** (2 - self.alpha)
        return 0.0, second, second

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha}


@dataclass(frozen=True)
class Rademacher(EntryLaw):
    kind = "rademacher"

    @property
    def rho(self):
        return 1.0

    def sample(self, rng, size=None):
        return (2 * rng.integers(0, 2, size) - 1).astype(float)

    def truncated_moments(self, M):
        inside = 1.0 if M >= 1 else 0.0
        return 0.0, inside, inside

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class StandardRealGaussian(EntryLaw):
    kind = "gaussian"

    @property
    def rho(self):
        return 1.0

    def sample(self, rng, size=None):
        return rng.standard_normal(size)

    def truncated_moments(self, M):
        second = _gauss_second_moment_below(M)
        return 0.0, second, second

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class ComplexGaussian(EntryLaw):
    """Complex Gaussian with E|a|^2 = 1 and pseudo-variance E[a^2] = rho.

    Realized as ``exp(i arg(rho)/2) * (s1 g1 + i s2 g2)`` with
    ``s1^2 = (1+|rho|)/2`` and ``s2^2 = (1-|rho|)/2``.
    """

    rho_value: complex = 0.0
    kind = "complex-gaussian"
    is_real = False

    def __post_init__(self):
        if abs(self.rho_value) > 1 + 1e-12:
            raise ValidationError(f"|rho| must be <= 1, got {abs(self.rho_value)}")
        object.__setattr__(self, "rho_value", complex(self.rho_value))

    @property
    def rho(self):
        return self.rho_value

    @property
    def _weights(self):
        r = min(abs(self.rho_value), 1.0)
        return math.sqrt((1 + r) / 2), math.sqrt((1 - r) / 2), cmath.exp(0.5j * cmath.phase(self.rho_value))

    def sample(self, rng, size=None):
        s1, s2, phase = self._weights
        shape = (2,) if size is None else (2, *np.atleast_1d(size).tolist())
        g = rng.standard_normal(shape)
        return phase * (s1 * g[0] + 1j * s2 * g[1])

    def truncated_moments(self, M):
        s1, s2, phase = self._weights
        if s2 == 0.0:
            second = _gauss_second_moment_below(M / s1)
            return 0.0, phase**2 * second, second

        def inner(g2, weight):
            rest = M * M - (s2 * g2) ** 2
            if rest <= 0:
                return 0.0
            t = math.sqrt(rest) / s1
            p_inside = math.erf(t / math.sqrt(2))
            g1_sq = _gauss_second_moment_below(t)
            pdf = math.exp(-g2 * g2 / 2) / math.sqrt(2 * math.pi)
            if weight == 1:
                return pdf * g1_sq
            return pdf * g2 * g2 * p_inside

        lim = M / s2
        e_g1, _ = integrate.quad(inner, -lim, lim, args=(1,), epsrel=QUAD_RTOL, epsabs=0, limit=200)
        e_g2, _ = integrate.quad(inner, -lim, lim, args=(2,), epsrel=QUAD_RTOL, epsabs=0, limit=200)
        # cross term g1*g2 vanishes by the g1 -> -g1 symmetry of the region
        second = phase**2 * (s1**2 * e_g1 - s2**2 * e_g2)
        return 0.0, second, s1**2 * e_g1 + s2**2 * e_g2

    def to_dict(self):
        return {"kind": self.kind, "rho": [self.rho_value.real, self.rho_value.imag]}


@dataclass(frozen=True)
class BernoulliSparse(EntryLaw):
    """Bernoulli(d/n) entries; ``centered=True`` subtracts the mean d/n."""

    d: float
    n: int
    centered: bool = False
    kind = "bernoulli"
    standardized = False

    def __post_init__(self):
        if not self.d > 0:
            raise ValidationError(f"d must be positive, got {self.d}")
        if self.n < 1 or self.d >= self.n:
            raise ValidationError(f"need 0 < d < n, got d={self.d}, n={self.n}")

    @property
    def p(self):
        return self.d / self.n

    @property
    def mean(self):
        return 0.0 if self.centered else self.p

    @property
    def variance(self):
        return self.p * (1 - self.p)

    @property
    def rho(self):
        # E[a^2] of the law as sampled
        return self.variance if self.centered else self.p

    def sample(self, rng, size=None):
        draws = (rng.random(size) < self.p).astype(float)
        return draws - self.p if self.centered else draws

    def truncated_moments(self, M):
        p = self.p
        if not self.centered:
            return (p, p, p) if M >= 1 else (0.0, 0.0, 0.0)
        first = second = 0.0
        if 1 - p <= M:
            first += p * (1 - p)
            second += p * (1 - p) ** 2
        if p <= M:
            first -= (1 - p) * p
            second += (1 - p) * p * p
        return first, second, second

    def to_dict(self):
        return {"kind": self.kind, "d": self.d, "n": self.n, "centered": self.centered}


@dataclass(frozen=True)
class Truncated(EntryLaw):
    """Law of ``a 1{|a| <= M} - E[a 1{|a| <= M}]`` for ``a`` drawn from ``base``.

    Build through :func:`truncate_law`, which computes the cached moments.
    """

    base: EntryLaw
    M: float
    centering: complex = 0.0
    second_moment: complex = 0.0
    abs_second_moment: float = 0.0
    kind = "truncated"

    @property
    def is_real(self):
        return self.base.is_real

    @property
    def standardized(self):
        return False

    @property
    def variance(self):
        return self.abs_second_moment

    @property
    def rho(self):
        return self.second_moment

    def sample(self, rng, size=None):
        a = self.base.sample(rng, size)
        kept = np.where(np.abs(a) <= self.M, a, 0.0)
        if self.centering == 0:
            return kept
        return kept - (self.centering.real if self.is_real else self.centering)

    def truncated_moments(self, M):
        raise ValidationError("nested truncation is not supported")

    def to_dict(self):
        return {"kind": self.kind, "M": self.M, "base": self.base.to_dict()}


@dataclass(frozen=True)
class Zero(EntryLaw):
    """Degenerate law a = 0; diagnostic use only (deterministic matrices)."""

    kind = "zero"
    standardized = False

    @property
    def variance(self):
        return 0.0

    @property
    def rho(self):
        return 0.0

    def sample(self, rng, size=None):
        return np.zeros(size) if size is not None else 0.0

    def truncated_moments(self, M):
        return 0.0, 0.0, 0.0

    def to_dict(self):
        return {"kind": self.kind}


def standardize_pareto(alpha):
    """Unit-variance symmetrized Pareto law with tail index ``alpha`` in (2, 4]."""
    if not 2 < alpha <= 4:
        raise ValidationError(f"tail index must lie in (2, 4], got {alpha}")
    return SymmetrizedPareto(float(alpha))


def sample_entry(law, rng):
    """One draw from ``law`` as a complex scalar."""
    return complex(np.asarray(law.sample(rng, 1))[0])


def truncate_law(base, M):
    if not M > 0:
        raise ValidationError(f"truncation level must be positive, got {M}")
    first, second, abs_second = base.truncated_moments(M)
    first = complex(first)
    return Truncated(
        base=base,
        M=float(M),
        centering=first,
        second_moment=complex(second) - first * first,
        abs_second_moment=float(abs_second) - abs(first) ** 2,
    )


def second_moment_square(law):
    """rho = E[a^2] of the law."""
    return complex(law.rho)


def law_from_dict(data):
    kind = data.get("kind")
    if kind == "pareto":
        return standardize_pareto(data["alpha"])
    if kind == "rademacher":
        return Rademacher()
    if kind == "gaussian":
        return StandardRealGaussian()
    if kind == "complex-gaussian":
        rho = data.get("rho", 0.0)
        if isinstance(rho, (list, tuple)):
            rho = complex(rho[0], rho[1])
        return ComplexGaussian(complex(rho))
    if kind == "bernoulli":
        return BernoulliSparse(float(data["d"]), int(data["n"]), bool(data.get("centered", False)))
    if kind == "truncated":
        return truncate_law(law_from_dict(data["base"]), float(data["M"]))
    if kind == "zero":
        return Zero()
    raise ValidationError(f"unknown law kind {kind!r}")


def parse_law(text):
    """Parse the compact CLI form, e.g. ``pareto:2.5``, ``rademacher``, ``complex-gaussian:0.5``."""
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    try:
        if name == "pareto":
            return standardize_pareto(float(arg))
        if name == "rademacher":
            return Rademacher()
        if name == "gaussian":
            return StandardRealGaussian()
        if name == "complex-gaussian":
            return ComplexGaussian(complex(arg) if arg else 0.0)
        if name == "zero":
            return Zero()
    except ValueError as exc:
        raise ValidationError(f"bad law specification {text!r}: {exc}") from None
    raise ValidationError(f"unknown law {text!r}")
