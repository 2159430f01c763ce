"""Seeded Monte Carlo campaigns: trials, outlier matching, aggregation and reports.

Trial seeds come from a 64-bit avalanche mix (the SplitMix64 finalizer) of
``master_seed XOR golden * (trial_index + 1)``, so every trial is
reproducible in isolation and trials can run in any order or in parallel.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import limits
from .cycles import moment_campaign_t
from .ensembles import (
    DENSE_CEILING,
    FullMean,
    PerturbationSpec,
    Scaling,
    assemble_model,
    build_perturbation,
    reverse_char_of_perturbation,
    sample_iid_matrix,
    sample_sparse_bernoulli,
)
from .entry_laws import EntryLaw
from .errors import EigensolverError, ResourceLimitError, ValidationError
from .spectral import FixedRadius, LargestGap, detect_outliers, eigenvalues, trace_powers

SCHEMA_VERSION = 1
MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
REGIMES = ("theorem1", "sparse", "semisparse", "moments", "sparse-traces")
DEFAULT_DELTA = 0.15
MAX_DN_EXPONENT = 0.49
CALIBRATION_NOTE = (
    "Limits are almost-sure with no rate; all tolerances are engineering calibrations "
    "chosen from pilot runs."
)


def mix64(x):
    """SplitMix64 finalizer."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed, trial_index):
    return mix64((master_seed & MASK64) ^ ((GOLDEN * (trial_index + 1)) & MASK64))


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def semisparse_degree(n, exponent=1 / 3):
    """d_n = round(n^exponent)."""
    if exponent > MAX_DN_EXPONENT:
        raise ValidationError(
            f"d_n = n^{exponent} grows too fast; the semi-sparse regime needs d_n = n^o(1) "
            f"(exponent <= {MAX_DN_EXPONENT})"
        )
    return int(round(n**exponent))


@dataclass
class ExperimentConfig:
    regime: str
    n: int
    trials: int = 1
    master_seed: int = 0
    law: EntryLaw | None = None
    perturbation: PerturbationSpec | None = None
    d: float | None = None
    dn_exponent: float = 1 / 3
    outlier_rule: FixedRadius | LargestGap | None = None
    match_tolerance: float = 0.25
    K: int = 3
    ks: tuple = (1, 2, 3)
    allowed_spurious: int = 0
    escape_fraction: float = 0.9
    dense_ceiling: int = DENSE_CEILING

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValidationError(f"unknown regime {self.regime!r}; choose from {REGIMES}")
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if not self.match_tolerance > 0:
            raise ValidationError("match_tolerance must be positive")
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if self.regime in ("theorem1", "moments") and self.law is None:
            raise ValidationError(f"regime {self.regime} needs an entry law")
        if self.regime in ("sparse", "sparse-traces"):
            if self.d is None or not 1 < self.d < self.n:
                raise ValidationError("sparse regimes need 1 < d < n")
        if self.regime == "semisparse":
            dn = self.dn
            if dn < 2:
                raise ValidationError(f"d_n = {dn} < 2 at n = {self.n}")
        if self.regime in ("theorem1", "sparse", "semisparse") and self.perturbation is None:
            raise ValidationError(f"regime {self.regime} needs a perturbation")
        if self.regime in ("sparse", "semisparse") and isinstance(self.perturbation, FullMean):
            # allowed, but no prediction is made for it (see unproven_regime)
            pass

    @property
    def dn(self):
        if self.regime != "semisparse":
            return None
        return float(self.d) if self.d is not None else float(semisparse_degree(self.n, self.dn_exponent))

    @property
    def bulk_radius_theoretical(self):
        if self.regime == "sparse":
            return math.sqrt(self.d)
        return 1.0

    @property
    def rule(self):
        if self.outlier_rule is not None:
            return self.outlier_rule
        return FixedRadius((1 + DEFAULT_DELTA) * self.bulk_radius_theoretical)

    @property
    def unproven_regime(self):
        if self.perturbation is None:
            return False
        if self.perturbation.conjecture_mode:
            return True
        return self.regime in ("sparse", "semisparse") and isinstance(self.perturbation, FullMean)

    def to_json(self):
        rule = self.rule
        if isinstance(rule, FixedRadius):
            rule_json = {"rule": "fixed-radius", "radius": rule.radius}
        else:
            rule_json = {"rule": "largest-gap", "min_gap_ratio": rule.min_gap_ratio, "bulk_level": rule.bulk_level}
        out = {
            "regime": self.regime,
            "n": self.n,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "law": self.law.to_dict() if self.law is not None else None,
            "perturbation": self.perturbation.to_dict() if self.perturbation is not None else None,
            "d": self.d,
            "dn_exponent": self.dn_exponent,
            "outlier_rule": rule_json,
            "match_tolerance": self.match_tolerance,
            "K": self.K,
            "ks": list(self.ks),
            "allowed_spurious": self.allowed_spurious,
            "escape_fraction": self.escape_fraction,
        }
        if self.regime == "semisparse":
            out["dn"] = self.dn
        return out


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------


@dataclass
class Matching:
    pairs: list  # (predicted, observed, distance)
    unmatched_predicted: list
    unmatched_observed: list

    @property
    def total_distance(self):
        return sum(p[2] for p in self.pairs)


def _optimal_assignment(dist):
    """Row/col index lists of a min-total injective assignment on a rectangular matrix."""
    p, o = dist.shape
    if p == 0 or o == 0:
        return [], []
    if max(p, o) <= 6:
        best, best_total = None, math.inf
        if p <= o:
            for perm in itertools.permutations(range(o), p):
                total = sum(dist[i, perm[i]] for i in range(p))
                if total < best_total:
                    best, best_total = (list(range(p)), list(perm)), total
        else:
            for perm in itertools.permutations(range(p), o):
                total = sum(dist[perm[j], j] for j in range(o))
                if total < best_total:
                    best, best_total = (list(perm), list(range(o))), total
        return best
    rows, cols = linear_sum_assignment(dist)
    return rows.tolist(), cols.tolist()


def match_outliers(observed, predicted, tolerance):
    """Minimum-total-distance assignment; pairs farther than ``tolerance`` count as unmatched."""
    observed = [complex(v) for v in observed]
    predicted = [complex(v) for v in predicted]
    dist = np.array([[abs(p - o) for o in observed] for p in predicted]).reshape(len(predicted), len(observed))
    rows, cols = _optimal_assignment(dist)
    pairs = []
    used_p, used_o = set(), set()
    for i, j in zip(rows, cols):
        if dist[i, j] <= tolerance:
            pairs.append((predicted[i], observed[j], float(dist[i, j])))
            used_p.add(i)
            used_o.add(j)
    return Matching(
        pairs=pairs,
        unmatched_predicted=[v for i, v in enumerate(predicted) if i not in used_p],
        unmatched_observed=[v for j, v in enumerate(observed) if j not in used_o],
    )


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------


@dataclass
class TrialRecord:
    trial_index: int
    derived_seed: int
    observed_outliers: list = field(default_factory=list)
    predicted: list = field(default_factory=list)  # of limits.Prediction
    matches: list = field(default_factory=list)  # (prediction label, predicted, observed, distance)
    unmatched_predicted: list = field(default_factory=list)
    unmatched_observed: list = field(default_factory=list)
    bulk_radius: float = math.nan
    residual_radius: float = math.nan
    largest_modulus: float = math.nan
    trace_powers: list = field(default_factory=list)
    error: str | None = None
    eigenvalues: np.ndarray | None = None

    def success(self, allowed_spurious=0):
        return (
            self.error is None
            and not self.unmatched_predicted
            and len(self.unmatched_observed) <= allowed_spurious
        )

    def to_json(self):
        cj = lambda z: [float(complex(z).real), float(complex(z).imag)]  # noqa: E731
        return {
            "trial_index": self.trial_index,
            "derived_seed": self.derived_seed,
            "observed_outliers": [cj(z) for z in self.observed_outliers],
            "predicted": [p.to_json() for p in self.predicted],
            "matches": [
                {"label": lab, "predicted": cj(p), "observed": cj(o), "distance": dist}
                for lab, p, o, dist in self.matches
            ],
            "unmatched_predicted": [cj(z) for z in self.unmatched_predicted],
            "unmatched_observed": [cj(z) for z in self.unmatched_observed],
            "bulk_radius": _finite(self.bulk_radius),
            "residual_radius": _finite(self.residual_radius),
            "largest_modulus": _finite(self.largest_modulus),
            "trace_powers": [cj(z) for z in self.trace_powers],
            "error": self.error,
        }


def _finite(x):
    return None if x is None or not math.isfinite(x) else float(x)


def build_model(config: ExperimentConfig, rng, seed=None):
    n = config.n
    if config.regime == "theorem1":
        A = sample_iid_matrix(config.law, n, rng, dense_ceiling=config.dense_ceiling, seed=seed)
        scaling = Scaling.inv_sqrt_n()
    elif config.regime == "sparse":
        A = sample_sparse_bernoulli(config.d, n, rng, seed=seed, dense_ceiling=config.dense_ceiling)
        scaling = Scaling.none()
    elif config.regime == "semisparse":
        A = sample_sparse_bernoulli(config.dn, n, rng, seed=seed, dense_ceiling=config.dense_ceiling)
        scaling = Scaling.inv_sqrt_dn(config.dn)
    else:
        raise ValidationError(f"regime {config.regime} has no model matrix")
    C = build_perturbation(config.perturbation, n, dense_ceiling=config.dense_ceiling)
    return assemble_model(A, C, scaling)


def predictions_for(config: ExperimentConfig):
    c = reverse_char_of_perturbation(config.perturbation, config.n, max(config.K, 64))
    if config.regime == "theorem1":
        return limits.predicted_outliers(c, 1.0, "iid")
    if config.regime == "sparse":
        if isinstance(config.perturbation, FullMean):
            return []
        return limits.predicted_outliers(c, math.sqrt(config.d), "sparse", d=config.d)
    return limits.predicted_outliers(c, 1.0, "semisparse", d=config.dn)


def run_trial(config: ExperimentConfig, trial_index, keep_eigenvalues=False):
    seed = derive_seed(config.master_seed, trial_index)
    record = TrialRecord(trial_index=trial_index, derived_seed=seed)
    rng = np.random.default_rng(seed)
    M = build_model(config, rng, seed=seed)
    predictions = predictions_for(config)
    record.predicted = predictions
    try:
        eigs = eigenvalues(M)
    except EigensolverError as exc:
        record.error = str(exc)
        record.unmatched_predicted = [p.value for p in predictions]
        return record
    _, observed, bulk_radius = detect_outliers(eigs, config.rule)
    record.observed_outliers = [complex(v) for v in observed]
    record.bulk_radius = bulk_radius
    record.largest_modulus = float(np.max(np.abs(eigs)))
    if config.K:
        record.trace_powers = trace_powers(M, config.K)
    if keep_eigenvalues:
        record.eigenvalues = eigs

    remaining = list(record.observed_outliers)
    targets = []
    for pred in predictions:
        if pred.label == "escape":
            # the diverging eigenvalue: take the largest observed outlier if big enough
            top = max(remaining, key=abs, default=None)
            if top is not None and abs(top) >= config.escape_fraction * abs(pred.value):
                remaining.remove(top)
                record.matches.append((pred.label, pred.value, top, float(abs(top - pred.value))))
            else:
                record.unmatched_predicted.append(pred.value)
        else:
            targets.append(pred)
    matching = match_outliers(remaining, [p.value for p in targets], config.match_tolerance)
    label_of = {complex(p.value): p.label for p in targets}
    for p, o, dist in matching.pairs:
        record.matches.append((label_of[p], p, o, dist))
    record.unmatched_predicted += matching.unmatched_predicted
    record.unmatched_observed = matching.unmatched_observed

    matched_obs = {complex(m[2]) for m in record.matches}
    rest = [abs(v) for v in eigs if complex(v) not in matched_obs]
    record.residual_radius = float(max(rest)) if rest else 0.0
    return record


def run_trials(config: ExperimentConfig, threads=1, keep_eigenvalues=False):
    indices = range(config.trials)
    if threads is None or threads <= 1:
        return [run_trial(config, i, keep_eigenvalues) for i in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: run_trial(config, i, keep_eigenvalues), indices))


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


@dataclass
class AggregateReport:
    trials: int
    success_fraction: float
    failed_trials: int
    per_prediction: list
    bulk_radius_mean: float
    bulk_radius_max: float
    residual_radius_max: float
    spurious_rate: float
    spurious_mean: float
    trace_moments: list
    config: dict | None = None
    wall_clock: float | None = None
    unproven_regime: bool = False

    def to_json(self):
        return {
            "trials": self.trials,
            "success_fraction": self.success_fraction,
            "failed_trials": self.failed_trials,
            "per_prediction": self.per_prediction,
            "bulk_radius_mean": _finite(self.bulk_radius_mean),
            "bulk_radius_max": _finite(self.bulk_radius_max),
            "residual_radius_max": _finite(self.residual_radius_max),
            "spurious_rate": self.spurious_rate,
            "spurious_mean": self.spurious_mean,
            "trace_moments": self.trace_moments,
            "unproven_regime": self.unproven_regime,
        }


def aggregate(records, allowed_spurious=0, config=None, wall_clock=None):
    if not records:
        raise ValidationError("cannot aggregate an empty record list")
    T = len(records)
    ok = [r for r in records if r.error is None]
    successes = sum(r.success(allowed_spurious) for r in records)

    per_prediction = []
    for idx, pred in enumerate(records[0].predicted):
        dists = []
        for r in ok:
            hit = [m[3] for m in r.matches if complex(m[1]) == complex(pred.value) and m[0] == pred.label]
            if hit:
                dists.append(hit[0])
        per_prediction.append({
            "label": pred.label,
            "value": [pred.value.real, pred.value.imag],
            "matched_fraction": len(dists) / T,
            "mean_distance": float(np.mean(dists)) if dists else None,
            "max_distance": float(np.max(dists)) if dists else None,
        })

    bulk = np.array([r.bulk_radius for r in ok]) if ok else np.array([math.nan])
    resid = np.array([r.residual_radius for r in ok]) if ok else np.array([math.nan])
    spurious = [len(r.unmatched_observed) for r in ok]
    moments = []
    if ok and ok[0].trace_powers:
        traces = np.array([r.trace_powers for r in ok], dtype=complex)
        for k in range(traces.shape[1]):
            col = traces[:, k]
            moments.append({
                "k": k + 1,
                "mean": [float(col.mean().real), float(col.mean().imag)],
                "variance": float(np.var(col, ddof=1)) if col.size > 1 else None,
            })
    return AggregateReport(
        trials=T,
        success_fraction=successes / T,
        failed_trials=T - len(ok),
        per_prediction=per_prediction,
        bulk_radius_mean=float(np.mean(bulk)),
        bulk_radius_max=float(np.max(bulk)),
        residual_radius_max=float(np.max(resid)),
        spurious_rate=float(np.mean([s > 0 for s in spurious])) if spurious else 0.0,
        spurious_mean=float(np.mean(spurious)) if spurious else 0.0,
        trace_moments=moments,
        config=config,
        wall_clock=wall_clock,
        unproven_regime=bool(config and config.get("unproven_regime")),
    )


# ---------------------------------------------------------------------------
# Trace campaigns (sparse ensembles without perturbation)
# ---------------------------------------------------------------------------


@dataclass
class TraceCampaignResult:
    regime: str
    n: int
    d: float
    trials: int
    rows: list

    def to_json(self):
        return {"regime": self.regime, "n": self.n, "d": self.d, "trials": self.trials, "rows": self.rows}


def _mean_var_row(k, samples, target_mean, target_var):
    x = np.asarray(samples, dtype=float)
    T = x.size
    mean = float(x.mean())
    var = float(x.var(ddof=1)) if T > 1 else math.nan
    m4 = float(np.mean((x - mean) ** 4))
    return {
        "k": k,
        "mean": mean,
        "mean_stderr": math.sqrt(var / T) if T > 1 else math.nan,
        "variance": var,
        "variance_stderr": math.sqrt(max(m4 - var**2, 0.0) / T) if T > 1 else math.nan,
        "target_mean": target_mean,
        "target_variance": target_var,
    }


def sparse_trace_campaign(d, n, kmax, trials, rng):
    """Empirical mean/variance of Tr(A^k) for Bernoulli(d/n) matrices vs the Poisson cycle limit."""
    if kmax > 6 or kmax < 1:
        raise ValidationError("kmax must be in 1..6")
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    samples = np.zeros((trials, kmax))
    for t in range(trials):
        A = sample_sparse_bernoulli(d, n, rng)
        samples[t] = np.real(trace_powers(A, kmax))
    rows = [
        _mean_var_row(k, samples[:, k - 1], limits.tau(d, k), limits.cycle_count_variance(d, k))
        for k in range(1, kmax + 1)
    ]
    return TraceCampaignResult("sparse", n, d, trials, rows)


def semisparse_trace_campaign(n, kmax, trials, rng, dn_exponent=1 / 3, dn=None):
    """Centered, scaled traces Tr(A^k)/sqrt(d_n)^k - sqrt(d_n)^k vs mean 1{k even} and variance k."""
    if dn is None:
        dn = semisparse_degree(n, dn_exponent)
    if dn < 2:
        raise ValidationError(f"d_n = {dn} < 2")
    if dn * dn > n / 10:
        raise ValidationError(f"d_n^2 = {dn * dn} > n/10 = {n / 10}: n too small for this d_n")
    if kmax > 6 or kmax < 1:
        raise ValidationError("kmax must be in 1..6")
    samples = np.zeros((trials, kmax))
    root = math.sqrt(dn)
    for t in range(trials):
        A = sample_sparse_bernoulli(dn, n, rng)
        tr = np.real(trace_powers(A, kmax))
        samples[t] = [tr[k - 1] / root**k - root**k for k in range(1, kmax + 1)]
    rows = [
        _mean_var_row(k, samples[:, k - 1], 1.0 if k % 2 == 0 else 0.0, float(k)) for k in range(1, kmax + 1)
    ]
    return TraceCampaignResult("semisparse", n, float(dn), trials, rows)


# ---------------------------------------------------------------------------
# Campaign driver and reports
# ---------------------------------------------------------------------------


@dataclass
class CampaignOutcome:
    config: ExperimentConfig
    report: dict
    records: list = field(default_factory=list)


def run_campaign(config: ExperimentConfig, threads=1, keep_eigenvalues=False):
    """Run every trial of ``config`` and build the JSON-ready report (without gates)."""
    start = time.perf_counter()
    body = {"schema_version": SCHEMA_VERSION, "regime": config.regime, "config": config.to_json()}
    body["config"]["unproven_regime"] = config.unproven_regime
    records = []
    if config.regime in ("theorem1", "sparse", "semisparse"):
        records = run_trials(config, threads=threads, keep_eigenvalues=keep_eigenvalues)
        agg = aggregate(records, config.allowed_spurious, body["config"])
        body["aggregate"] = agg.to_json()
        body["records"] = [r.to_json() for r in records]
    elif config.regime == "moments":
        rng = np.random.default_rng(derive_seed(config.master_seed, 0))
        body["campaigns"] = [
            moment_campaign_t(config.law, config.n, k, config.trials, rng).to_json() for k in config.ks
        ]
    else:
        rng = np.random.default_rng(derive_seed(config.master_seed, 0))
        body["campaign"] = sparse_trace_campaign(config.d, config.n, max(config.ks), config.trials, rng).to_json()
    body["calibration_note"] = CALIBRATION_NOTE
    body["timing"] = {"wall_clock_s": time.perf_counter() - start}
    return CampaignOutcome(config=config, report=body, records=records)


def report_fingerprint(report):
    """Canonical JSON of a report with timing removed (for reproducibility checks)."""
    stripped = {k: v for k, v in report.items() if k != "timing"}
    return json.dumps(stripped, sort_keys=True)


def with_seed(config, master_seed):
    return replace(config, master_seed=master_seed)


__all__ = [
    "AggregateReport",
    "CampaignOutcome",
    "ExperimentConfig",
    "Matching",
    "ResourceLimitError",
    "TraceCampaignResult",
    "TrialRecord",
    "aggregate",
    "derive_seed",
    "match_outliers",
    "mix64",
    "run_campaign",
    "run_trial",
    "run_trials",
    "semisparse_trace_campaign",
    "sparse_trace_campaign",
]
