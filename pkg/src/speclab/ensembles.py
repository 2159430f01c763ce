"""Random matrices A_n, deterministic perturbations C_n, and assembled models.

Perturbation indices are 1-based throughout, matching the usual E_{11}
notation; conversion to 0-based happens only when matrices are materialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.io
import scipy.sparse as sp

from .entry_laws import EntryLaw
from .errors import ResourceLimitError, ValidationError
from .series import TruncatedPowerSeries

DENSE_CEILING = 4000
# Berkowitz is O(m^4) in Python arithmetic; supports larger than this go through eigenvalues.
EXACT_SUPPORT_LIMIT = 40


# ---------------------------------------------------------------------------
# Perturbation descriptors
# ---------------------------------------------------------------------------


def _as_number(x):
    if isinstance(x, (list, tuple)):
        return complex(x[0], x[1])
    return x


def _number_json(x):
    x = complex(x)
    if x.imag == 0:
        return x.real
    return [x.real, x.imag]


class PerturbationSpec:
    """Common interface of the perturbation classes.

    ``bound_M1`` and ``count_M2`` are optional declared bounds; when present they
    are validated every time the perturbation is instantiated at a size n.
    """

    conjecture_mode = False

    def entries(self, n):
        """Nonzero entries as 1-based (row, col, value) triples (finite-support classes)."""
        raise NotImplementedError

    def validate(self, n):
        entries = self.entries(n)
        for i, j, _ in entries:
            if not (1 <= i <= n and 1 <= j <= n):
                raise ValidationError(f"perturbation index ({i}, {j}) outside [1, {n}]")
        if self.count_M2 is not None and len(entries) > self.count_M2:
            raise ValidationError(f"{len(entries)} nonzero entries exceed declared bound {self.count_M2}")
        if self.bound_M1 is not None:
            worst = max((abs(v) for _, _, v in entries), default=0.0)
            if worst > self.bound_M1:
                raise ValidationError(f"entry modulus {worst} exceeds declared bound {self.bound_M1}")

    @property
    def max_entry(self):
        return max((abs(v) for _, _, v in self.entries(None)), default=0.0)


@dataclass(frozen=True)
class SparseEntries(PerturbationSpec):
    entries_list: tuple
    bound_M1: float | None = None
    count_M2: int | None = None
    name = "sparse-entries"

    def __post_init__(self):
        cleaned = tuple((int(i), int(j), _as_number(v)) for i, j, v in self.entries_list)
        keys = [(i, j) for i, j, _ in cleaned]
        if len(set(keys)) != len(keys):
            raise ValidationError("duplicate (row, col) in sparse perturbation")
        object.__setattr__(self, "entries_list", cleaned)

    def entries(self, n):
        return [e for e in self.entries_list if e[2] != 0]

    def to_dict(self):
        return {
            "class": self.name,
            "entries": [[i, j, _number_json(v)] for i, j, v in self.entries_list],
            **_bounds_json(self),
        }


@dataclass(frozen=True)
class DiagonalSpikes(PerturbationSpec):
    thetas: tuple
    bound_M1: float | None = None
    count_M2: int | None = None
    name = "diagonal-spikes"

    def __post_init__(self):
        object.__setattr__(self, "thetas", tuple(_as_number(t) for t in self.thetas))

    def entries(self, n):
        return [(i + 1, i + 1, t) for i, t in enumerate(self.thetas) if t != 0]

    def to_dict(self):
        return {"class": self.name, "thetas": [_number_json(t) for t in self.thetas], **_bounds_json(self)}


@dataclass(frozen=True)
class JordanBlock(PerturbationSpec):
    theta: complex
    size: int
    offset: int = 0
    bound_M1: float | None = None
    count_M2: int | None = None
    name = "jordan"

    def __post_init__(self):
        if self.size < 1 or self.offset < 0:
            raise ValidationError("Jordan block needs size >= 1 and offset >= 0")
        object.__setattr__(self, "theta", _as_number(self.theta))

    def entries(self, n):
        base = self.offset + 1
        out = []
        for r in range(self.size):
            if self.theta != 0:
                out.append((base + r, base + r, self.theta))
            if r + 1 < self.size:
                out.append((base + r, base + r + 1, 1))
        return out

    def to_dict(self):
        return {
            "class": self.name,
            "theta": _number_json(self.theta),
            "size": self.size,
            "offset": self.offset,
            **_bounds_json(self),
        }


@dataclass(frozen=True)
class FullMean(PerturbationSpec):
    """C_ij = mu / n for every i, j (rank one, nonzero eigenvalue mu)."""

    mu: complex
    bound_M1: float | None = None
    count_M2: int | None = None
    name = "full-mean"

    def __post_init__(self):
        object.__setattr__(self, "mu", _as_number(self.mu))

    def entries(self, n):
        raise ValidationError("full-mean perturbation has no finite support")

    def validate(self, n):
        if self.bound_M1 is not None and abs(self.mu) > self.bound_M1:
            raise ValidationError(f"|mu|/n exceeds declared bound {self.bound_M1}/n")

    @property
    def max_entry(self):
        return math.inf

    def to_dict(self):
        return {"class": self.name, "mu": _number_json(self.mu), **_bounds_json(self)}


@dataclass(frozen=True, eq=False)
class LowRank(PerturbationSpec):
    """C = U V^T from explicit n x r factors.  Outside the proven classes: reports flag it."""

    U: np.ndarray
    V: np.ndarray
    bound_M1: float | None = None
    count_M2: int | None = None
    name = "low-rank"
    conjecture_mode = True

    def __post_init__(self):
        U = np.atleast_2d(np.asarray(self.U, dtype=complex))
        V = np.atleast_2d(np.asarray(self.V, dtype=complex))
        if U.shape != V.shape:
            raise ValidationError(f"factor shapes differ: {U.shape} vs {V.shape}")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    def entries(self, n):
        raise ValidationError("low-rank perturbation is stored in factored form")

    def validate(self, n):
        if self.U.shape[0] != n:
            raise ValidationError(f"factors have {self.U.shape[0]} rows, model size is {n}")

    def to_dict(self):
        def enc(M):
            return [[[z.real, z.imag] for z in row] for row in M]

        return {"class": self.name, "U": enc(self.U), "V": enc(self.V)}


def _bounds_json(spec):
    out = {}
    if spec.bound_M1 is not None:
        out["bound_M1"] = spec.bound_M1
    if spec.count_M2 is not None:
        out["count_M2"] = spec.count_M2
    return out


def perturbation_from_dict(data):
    cls = data.get("class")
    bounds = {k: data[k] for k in ("bound_M1", "count_M2") if k in data}
    if cls == "sparse-entries":
        return SparseEntries(tuple(tuple(e) for e in data["entries"]), **bounds)
    if cls == "diagonal-spikes":
        return DiagonalSpikes(tuple(data["thetas"]), **bounds)
    if cls == "jordan":
        return JordanBlock(data["theta"], int(data["size"]), int(data.get("offset", 0)), **bounds)
    if cls == "full-mean":
        return FullMean(data["mu"], **bounds)
    if cls == "low-rank":
        dec = lambda M: np.array([[complex(a, b) for a, b in row] for row in M])  # noqa: E731
        return LowRank(dec(data["U"]), dec(data["V"]))
    raise ValidationError(f"unknown perturbation class {cls!r}")


# ---------------------------------------------------------------------------
# Model matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scaling:
    """Normalization applied to A_n when assembling a model."""

    kind: str = "inv_sqrt_n"
    d: float | None = None

    def __post_init__(self):
        if self.kind not in ("inv_sqrt_n", "none", "inv_sqrt_dn"):
            raise ValidationError(f"unknown scaling {self.kind!r}")
        if self.kind == "inv_sqrt_dn" and not (self.d and self.d > 0):
            raise ValidationError("inv_sqrt_dn scaling needs d > 0")

    @classmethod
    def inv_sqrt_n(cls):
        return cls("inv_sqrt_n")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def inv_sqrt_dn(cls, d):
        return cls("inv_sqrt_dn", float(d))

    def factor(self, n):
        if self.kind == "inv_sqrt_n":
            return 1.0 / math.sqrt(n)
        if self.kind == "inv_sqrt_dn":
            return 1.0 / math.sqrt(self.d)
        return 1


@dataclass(frozen=True, eq=False)
class ModelMatrix:
    """An n x n matrix held densely, as CSR, and/or with a rank-r update U V^T."""

    n: int
    dense: np.ndarray | None = None
    sparse: sp.csr_matrix | None = None
    low_rank: tuple | None = None
    scaling: Scaling | None = None
    provenance: dict = field(default_factory=dict)
    dense_ceiling: int = DENSE_CEILING

    @property
    def is_dense(self):
        return self.dense is not None

    def to_array(self):
        """Materialize as a dense ndarray (refuses above the dense ceiling)."""
        if self.n > self.dense_ceiling:
            raise ResourceLimitError(f"n={self.n} exceeds dense ceiling {self.dense_ceiling}")
        if self.dense is not None:
            out = self.dense
        elif self.sparse is not None:
            out = self.sparse.toarray()
        else:
            out = np.zeros((self.n, self.n))
        if self.low_rank is not None:
            U, V = self.low_rank
            lr = U @ V.T
            if np.isrealobj(out) and np.iscomplexobj(lr) and not np.any(lr.imag):
                lr = lr.real
            out = out + lr
        return out

    def to_sparse(self):
        """CSR view of the dense/sparse part (the low-rank part is excluded)."""
        if self.dense is not None:
            return sp.csr_matrix(self.dense)
        if self.sparse is not None:
            return self.sparse
        return sp.csr_matrix((self.n, self.n))


def _check_dense_size(n, dense_ceiling):
    if n > dense_ceiling:
        raise ResourceLimitError(
            f"dense {n}x{n} matrix exceeds ceiling n <= {dense_ceiling}; "
            "raise dense_ceiling explicitly if the memory is available"
        )


def sample_iid_matrix(law: EntryLaw, n: int, rng, dense_ceiling=DENSE_CEILING, seed=None):
    """Unscaled dense n x n matrix of i.i.d. draws from ``law``."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    _check_dense_size(n, dense_ceiling)
    data = np.asarray(law.sample(rng, (n, n)))
    return ModelMatrix(
        n=n, dense=data, scaling=Scaling.none(), provenance={"law": law.to_dict(), "seed": seed},
        dense_ceiling=dense_ceiling,
    )


def sample_sparse_bernoulli(d: float, n: int, rng, seed=None, dense_ceiling=DENSE_CEILING):
    """CSR adjacency matrix with i.i.d. Bernoulli(d/n) entries."""
    if not (0 < d < n):
        raise ValidationError(f"need 0 < d < n, got d={d}, n={n}")
    total = n * n
    count = int(rng.binomial(total, d / n))
    flat = rng.choice(total, size=count, replace=False) if count else np.empty(0, dtype=np.int64)
    flat.sort()
    rows, cols = np.divmod(flat, n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    A = sp.csr_matrix((np.ones(count), cols, indptr), shape=(n, n))
    return ModelMatrix(
        n=n, sparse=A, scaling=Scaling.none(),
        provenance={"law": {"kind": "bernoulli", "d": d, "n": n, "centered": False}, "seed": seed},
        dense_ceiling=dense_ceiling,
    )


def build_perturbation(spec: PerturbationSpec, n: int, dense_ceiling=DENSE_CEILING):
    """Materialize C_n at size n."""
    spec.validate(n)
    if isinstance(spec, FullMean):
        u = np.full((n, 1), spec.mu / n)
        v = np.ones((n, 1))
        if complex(spec.mu).imag == 0:
            u = u.real
        return ModelMatrix(n=n, low_rank=(u, v), provenance={"perturbation": spec.to_dict()},
                           dense_ceiling=dense_ceiling)
    if isinstance(spec, LowRank):
        return ModelMatrix(n=n, low_rank=(spec.U, spec.V), provenance={"perturbation": spec.to_dict()},
                           dense_ceiling=dense_ceiling)
    entries = spec.entries(n)
    values = [complex(v) for _, _, v in entries]
    is_complex = any(v.imag != 0 for v in values)
    data = np.array(values if is_complex else [v.real for v in values], dtype=complex if is_complex else float)
    rows = np.array([i - 1 for i, _, _ in entries], dtype=np.int64)
    cols = np.array([j - 1 for _, j, _ in entries], dtype=np.int64)
    C = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    C.sort_indices()
    return ModelMatrix(n=n, sparse=C, provenance={"perturbation": spec.to_dict()}, dense_ceiling=dense_ceiling)


def charpoly_berkowitz(rows):
    """Coefficients [1, a_1, ..., a_m] of det(lambda I - A), division free.

    Works over any ring of Python numbers (int, Fraction, complex), so integer
    and rational inputs give exact results.  Because det(I - zA) = sum_k a_k z^k,
    the same list is the reverse characteristic polynomial.
    """
    m = len(rows)
    if m == 0:
        return [1]
    vect = [1, -rows[0][0]]
    for r in range(1, m):
        R = rows[r][:r]
        v = [rows[i][r] for i in range(r)]
        t = [1, -rows[r][r]]
        for _ in range(r):
            t.append(-sum(R[i] * v[i] for i in range(r)))
            v = [sum(rows[i][j] * v[j] for j in range(r)) for i in range(r)]
        vect = [
            sum(t[i - j] * vect[j] for j in range(len(vect)) if 0 <= i - j < len(t))
            for i in range(r + 2)
        ]
    return vect


def _exact_scalar(v):
    if isinstance(v, (int, Fraction)):
        return v
    v = complex(v)
    if v.imag == 0:
        return Fraction(v.real)
    return v


def reverse_char_of_perturbation(spec: PerturbationSpec, n: int, K: int):
    """Coefficients of det(I - z C_n) up to degree K (never beyond the rank of C_n)."""
    if K < 1:
        raise ValidationError("K must be >= 1")
    spec.validate(n)
    if isinstance(spec, FullMean):
        coeffs = [1, -complex(spec.mu)]
    elif isinstance(spec, LowRank):
        small = spec.V.T @ spec.U
        coeffs = charpoly_berkowitz(small.tolist())
    else:
        entries = spec.entries(n)
        support = sorted({i for i, _, _ in entries} | {j for _, j, _ in entries})
        pos = {v: k for k, v in enumerate(support)}
        m = len(support)
        if m <= EXACT_SUPPORT_LIMIT:
            rows = [[0] * m for _ in range(m)]
            for i, j, v in entries:
                rows[pos[i]][pos[j]] = _exact_scalar(v)
            coeffs = charpoly_berkowitz(rows)
        else:
            dense = np.zeros((m, m), dtype=complex)
            for i, j, v in entries:
                dense[pos[i], pos[j]] = v
            coeffs = np.poly(np.linalg.eigvals(dense)).tolist()
    coeffs = [complex(c) for c in coeffs]
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return TruncatedPowerSeries(coeffs[: K + 1], math.inf, "deterministic")


def assemble_model(A: ModelMatrix, C: ModelMatrix, scaling: Scaling):
    """factor(scaling) * A + C, dense when either input is dense and the size permits."""
    if A.n != C.n:
        raise ValidationError(f"dimension mismatch: {A.n} vs {C.n}")
    n = A.n
    ceiling = min(A.dense_ceiling, C.dense_ceiling)
    f = scaling.factor(n)
    provenance = {**A.provenance, **C.provenance}
    if (A.is_dense or C.is_dense) and n <= ceiling:
        a = A.to_array()
        c = C.to_array()
        out = (f * a if f != 1 else a) + c
        return ModelMatrix(n=n, dense=out, scaling=scaling, provenance=provenance, dense_ceiling=ceiling)
    a = A.to_sparse()
    sparse = (a * f if f != 1 else a) + C.to_sparse()
    sparse = sp.csr_matrix(sparse)
    sparse.sum_duplicates()
    sparse.sort_indices()
    low_rank = _stack_low_rank(A.low_rank, C.low_rank, f)
    return ModelMatrix(n=n, sparse=sparse, low_rank=low_rank, scaling=scaling, provenance=provenance,
                       dense_ceiling=ceiling)


def _stack_low_rank(a_lr, c_lr, f):
    parts = []
    if a_lr is not None:
        parts.append((a_lr[0] * f, a_lr[1]))
    if c_lr is not None:
        parts.append(c_lr)
    if not parts:
        return None
    return np.hstack([p[0] for p in parts]), np.hstack([p[1] for p in parts])


def write_matrix_market(M: ModelMatrix, path):
    """Export for external cross-checks (coordinate format; low-rank part densified if present)."""
    if M.low_rank is not None:
        target = sp.coo_matrix(M.to_array())
    else:
        target = sp.coo_matrix(M.to_sparse())
    scipy.io.mmwrite(str(path), target)
