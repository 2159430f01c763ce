"""Brute-force cycle sums over index tuples.

``tuple_sums`` enumerates every closed walk (i_1, ..., i_k) and splits
Tr(A^k) = sum a_{i1 i2} a_{i2 i3} ... a_{ik i1} into tuples with k distinct
indices (``distinct_sum``) and tuples with a repeated index (``repeated_sum``).
Tuples are rooted: each directed k-cycle on k distinct vertices appears k
times, once per rotation.  ``moment_campaign_t`` divides by k to get the
unrooted cycle sum.

All sums are exact for integer input (int64 with an overflow pre-check,
Python integers otherwise).  These are oracles, not fast algorithms; the cost
is O(n^k) and guarded by ``max_tuples``.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass

import numpy as np

from .entry_laws import EntryLaw
from .errors import ResourceLimitError, ValidationError

MAX_TUPLES = 12**6
CAMPAIGN_BUDGET = 10**9


def _prepare(A, k, max_tuples):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"square matrix required, got shape {A.shape}")
    if k < 1:
        raise ValidationError("k must be >= 1")
    n = A.shape[0]
    if n**k > max_tuples:
        raise ResourceLimitError(f"n^k = {n}^{k} tuples exceeds cap {max_tuples}")
    return A, n


def _exact_dtype(mats, k, n):
    """int64 when the worst-case sum fits, else Python ints."""
    entry = max(max(abs(int(x)) for x in m.ravel()) if m.size else 1 for m in mats)
    return np.int64 if max(entry, 1) ** k * n**k < 2**62 else object


def _cast(mats, n, k):
    if all(np.issubdtype(m.dtype, np.integer) for m in mats):
        dtype = _exact_dtype(mats, k, n)
        return [m.astype(dtype) for m in mats]
    if any(np.iscomplexobj(m) for m in mats):
        return [m.astype(complex) for m in mats]
    return [m.astype(float) for m in mats]


def cycle_products(mats):
    """Array P over (i_1..i_k) with P = prod_s mats[s][i_s, i_{s+1}], indices cyclic."""
    k = len(mats)
    n = mats[0].shape[0]
    if k == 1:
        return np.diagonal(mats[0]).copy()
    P = mats[0]
    for s in range(1, k - 1):
        P = P[..., None] * mats[s].reshape((1,) * s + (n, n))
    closing = mats[-1].T.reshape((n,) + (1,) * (k - 2) + (n,))
    return P * closing


def distinct_mask(n, k):
    mask = np.ones((n,) * k, dtype=bool)
    idx = [np.arange(n).reshape((1,) * p + (n,) + (1,) * (k - p - 1)) for p in range(k)]
    for p, q in itertools.combinations(range(k), 2):
        mask &= idx[p] != idx[q]
    return mask


def _contains_mask(n, k, vertex):
    mask = np.zeros((n,) * k, dtype=bool)
    for p in range(k):
        mask |= np.arange(n).reshape((1,) * p + (n,) + (1,) * (k - p - 1)) == vertex
    return mask


def _split(P, mask):
    distinct = P[mask].sum()
    repeated = P[~mask].sum()
    if P.dtype == object or np.issubdtype(P.dtype, np.integer):
        return int(distinct), int(repeated)
    return distinct.item(), repeated.item()


def tuple_sums(A, k, max_tuples=MAX_TUPLES):
    """(distinct_sum, repeated_sum) of closed k-walks; their sum is Tr(A^k)."""
    A, n = _prepare(A, k, max_tuples)
    (A,) = _cast([A], n, k)
    P = cycle_products([A] * k)
    return _split(P, distinct_mask(n, k))


def tuple_sums_recursive(A, k):
    """Independent backtracking enumerator of the same split, in plain Python."""
    A = np.asarray(A)
    n = A.shape[0]
    rows = [[x.item() if hasattr(x, "item") else x for x in row] for row in A]
    if np.issubdtype(A.dtype, np.integer):
        rows = [[int(x) for x in row] for row in rows]
    totals = [0, 0]

    def walk(path, product):
        if len(path) == k:
            value = product * rows[path[-1]][path[0]]
            totals[0 if len(set(path)) == k else 1] += value
            return
        for j in range(n):
            walk(path + [j], product * rows[path[-1]][j])

    for i in range(n):
        walk([i], 1)
    return totals[0], totals[1]


@dataclass
class TraceDecomposition:
    """Multilinear split of Tr((A + scale C)^k).

    ``pure_A = distinct_sum + repeated_sum``; the four components
    pure_A, pure_C, mixed_distinct, mixed_repeated add up to the trace.
    """

    k: int
    pure_A: complex
    pure_C: complex
    mixed_distinct: complex
    mixed_repeated: complex
    distinct_sum: complex
    repeated_sum: complex

    @property
    def total(self):
        return self.pure_A + self.pure_C + self.mixed_distinct + self.mixed_repeated

    def to_json(self):
        return {key: _jsonable(value) for key, value in asdict(self).items()}


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def _exact_scale(scale):
    if isinstance(scale, (int, np.integer)):
        return int(scale)
    if isinstance(scale, float) and scale.is_integer():
        return int(scale)
    return scale


def mixed_trace_decomposition(A, C, scale, k, max_tuples=MAX_TUPLES):
    """Expand Tr((A + scale C)^k) slot by slot and classify every monomial."""
    A, n = _prepare(A, k, max_tuples)
    C = np.asarray(C)
    if C.shape != A.shape:
        raise ValidationError(f"shape mismatch {A.shape} vs {C.shape}")
    scale = _exact_scale(scale)
    if isinstance(scale, int) and np.issubdtype(C.dtype, np.integer):
        sC = C.astype(object) * scale
        if max(abs(int(x)) for x in sC.ravel()) < 2**31:
            sC = sC.astype(np.int64)
    else:
        sC = C * scale
    A_c, sC_c = _cast([A, np.asarray(sC)], n, k)
    mask = distinct_mask(n, k)
    distinct_sum = repeated_sum = pure_C = mixed_d = mixed_r = 0
    for choice in itertools.product((0, 1), repeat=k):
        mats = [sC_c if c else A_c for c in choice]
        d_part, r_part = _split(cycle_products(mats), mask)
        if not any(choice):
            distinct_sum, repeated_sum = d_part, r_part
        elif all(choice):
            pure_C = d_part + r_part
        else:
            mixed_d += d_part
            mixed_r += r_part
    return TraceDecomposition(
        k=k,
        pure_A=distinct_sum + repeated_sum,
        pure_C=pure_C,
        mixed_distinct=mixed_d,
        mixed_repeated=mixed_r,
        distinct_sum=distinct_sum,
        repeated_sum=repeated_sum,
    )


def perturbed_cycle_sums(A, support_vertex, k, ell, max_tuples=MAX_TUPLES):
    """Closed (k - ell)-walks through ``support_vertex`` (1-based), split distinct / repeated.

    The (sqrt(n) theta)^ell prefactor is left to the caller.
    """
    A = np.asarray(A)
    n = A.shape[0]
    if not 1 <= ell <= k - 1:
        raise ValidationError(f"need 1 <= ell <= k-1, got ell={ell}, k={k}")
    if not 1 <= support_vertex <= n:
        raise ValidationError(f"support vertex {support_vertex} outside [1, {n}]")
    m = k - ell
    A, n = _prepare(A, m, max_tuples)
    (A,) = _cast([A], n, m)
    P = cycle_products([A] * m)
    through = _contains_mask(n, m, support_vertex - 1)
    distinct = distinct_mask(n, m)
    zero = P.flat[0] * 0
    t_part = P[through & distinct].sum() if np.any(through & distinct) else zero
    r_part = P[through & ~distinct].sum() if np.any(through & ~distinct) else zero
    if P.dtype == object or np.issubdtype(P.dtype, np.integer):
        return int(t_part), int(r_part)
    return t_part.item(), r_part.item()


# ---------------------------------------------------------------------------
# Monte Carlo moments
# ---------------------------------------------------------------------------


@dataclass
class MomentCampaignResult:
    n: int
    k: int
    trials: int
    moments: dict
    stderr: dict

    def to_json(self):
        return {
            "n": self.n,
            "k": self.k,
            "trials": self.trials,
            "moments": {key: _jsonable(v) for key, v in self.moments.items()},
            "stderr": dict(self.stderr),
        }


def _moment_table(values, name):
    values = np.asarray(values, dtype=complex)
    T = values.size
    stats = {
        f"E[{name}]": values,
        f"E|{name}|^2": np.abs(values) ** 2,
        f"E[{name}^2]": values**2,
    }
    moments, stderr = {}, {}
    for key, sample in stats.items():
        mean = sample.mean()
        moments[key] = complex(mean) if np.iscomplexobj(sample) else float(mean)
        stderr[key] = float(np.sqrt(np.mean(np.abs(sample - mean) ** 2) / max(T - 1, 1)))
    return moments, stderr


def moment_campaign_t(law: EntryLaw, n, k, trials, rng, budget=CAMPAIGN_BUDGET, max_tuples=None):
    """Empirical moments of t_k / n^(k/2) (unrooted cycle sum) and r_k / n^(k/2).

    ``t`` is the distinct-index tuple sum divided by k, i.e. each directed
    k-cycle counted once; ``t_rooted`` keeps the raw tuple sum.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    if n**k * trials > budget:
        raise ResourceLimitError(f"n^k * trials = {n**k * trials} exceeds budget {budget}")
    cap = n**k if max_tuples is None else max_tuples
    norm = n ** (k / 2)
    t_vals, t_rooted, r_vals = [], [], []
    for _ in range(trials):
        A = np.asarray(law.sample(rng, (n, n)))
        distinct, repeated = tuple_sums(A, k, max_tuples=cap)
        t_rooted.append(distinct / norm)
        t_vals.append(distinct / k / norm)
        r_vals.append(repeated / norm)
    moments, stderr = {}, {}
    for values, name in ((t_vals, "t"), (r_vals, "r"), (t_rooted, "t_rooted")):
        m, s = _moment_table(values, name)
        moments.update(m)
        stderr.update(s)
    return MomentCampaignResult(n=n, k=k, trials=trials, moments=moments, stderr=stderr)


def lemma_limits(rho, k):
    """Limits of the moments above: E|t|^2 -> 1/k, E[t^2] -> rho^k / k, r -> rho^(k/2) (k even) else 0."""
    rho = complex(rho)
    return {
        "E[t]": 0.0,
        "E|t|^2": 1.0 / k,
        "E[t^2]": rho**k / k,
        "E[r]": rho ** (k // 2) if k % 2 == 0 else 0.0,
    }

