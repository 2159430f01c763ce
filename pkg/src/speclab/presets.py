"""Named campaign configurations and their pass/fail gates.

``acceptance`` presets are the desk-scale campaigns; ``smoke`` presets are
tiny versions of the same campaigns, used for golden-file and determinism
tests, whose only gate is that no trial failed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .entry_laws import Rademacher, SymmetrizedPareto
from .ensembles import DiagonalSpikes, SparseEntries
from .errors import ValidationError
from .harness import ExperimentConfig
from .limits import cycle_count_variance, tau
from .spectral import FixedRadius

DEFAULT_SEED = 2024


@dataclass(frozen=True)
class Gate:
    name: str
    value: float
    threshold: float
    comparison: str  # "<=" or ">="

    @property
    def passed(self):
        if not math.isfinite(self.value):
            return False
        return self.value <= self.threshold if self.comparison == "<=" else self.value >= self.threshold

    def to_json(self):
        return {
            "name": self.name,
            "value": self.value,
            "threshold": self.threshold,
            "comparison": self.comparison,
            "passed": self.passed,
        }


def _rel_err(value, target):
    return abs(value - target) / abs(target)


# ---------------------------------------------------------------------------
# Configurations
# ---------------------------------------------------------------------------


def theorem1_config(preset="acceptance", spikes=None, law=None, n=None, trials=None, seed=DEFAULT_SEED):
    base = {"acceptance": (1000, 40), "smoke": (60, 3)}[preset]
    return ExperimentConfig(
        regime="theorem1",
        n=n or base[0],
        trials=trials or base[1],
        master_seed=seed,
        law=law or SymmetrizedPareto(2.5),
        perturbation=DiagonalSpikes(tuple(spikes) if spikes is not None else (2, 1.6j)),
        outlier_rule=FixedRadius(1.15),
        match_tolerance=0.25,
    )


def sparse_config(preset="acceptance", d=None, theta=None, n=None, trials=None, seed=DEFAULT_SEED):
    base = {"acceptance": (3000, 20), "smoke": (200, 3)}[preset]
    d = 4.0 if d is None else float(d)
    theta = 3 if theta is None else theta
    return ExperimentConfig(
        regime="sparse",
        n=n or base[0],
        trials=trials or base[1],
        master_seed=seed,
        d=d,
        perturbation=SparseEntries(((1, 1, theta),)),
        outlier_rule=FixedRadius(1.15 * math.sqrt(d)),
        match_tolerance=0.3,
    )


def semisparse_config(preset="acceptance", theta=None, n=None, trials=None, seed=DEFAULT_SEED, d=None):
    base = {"acceptance": (3000, 10), "smoke": (300, 2)}[preset]
    return ExperimentConfig(
        regime="semisparse",
        n=n or base[0],
        trials=trials or base[1],
        master_seed=seed,
        d=None if d is None else float(d),
        perturbation=SparseEntries(((1, 1, 2 if theta is None else theta),)),
        outlier_rule=FixedRadius(1.15),
        match_tolerance=0.3,
    )


def moments_config(preset="acceptance", law=None, n=None, trials=None, seed=DEFAULT_SEED, ks=(2, 3)):
    base = {"acceptance": (120, 200), "smoke": (10, 5)}[preset]
    return ExperimentConfig(
        regime="moments",
        n=n or base[0],
        trials=trials or base[1],
        master_seed=seed,
        law=law or Rademacher(),
        ks=tuple(ks),
        K=0,
    )


def sparse_traces_config(preset="acceptance", d=None, n=None, trials=None, seed=DEFAULT_SEED, kmax=3):
    base = {"acceptance": (2000, 300), "smoke": (100, 10)}[preset]
    return ExperimentConfig(
        regime="sparse-traces",
        n=n or base[0],
        trials=trials or base[1],
        master_seed=seed,
        d=2.0 if d is None else float(d),
        ks=tuple(range(1, kmax + 1)),
        K=0,
    )


BUILDERS = {
    "theorem1": theorem1_config,
    "sparse": sparse_config,
    "semisparse": semisparse_config,
    "moments": moments_config,
    "sparse-traces": sparse_traces_config,
}


def preset_config(campaign, preset="acceptance", **overrides):
    if campaign not in BUILDERS:
        raise ValidationError(f"unknown campaign {campaign!r}; choose from {sorted(BUILDERS)}")
    if preset not in ("acceptance", "smoke"):
        raise ValidationError(f"unknown preset {preset!r}")
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return BUILDERS[campaign](preset, **overrides)


# ---------------------------------------------------------------------------
# Gates
# ---------------------------------------------------------------------------


def _records(report):
    return report.get("records", [])


def _successful(report, allowed_spurious=0):
    return [
        r for r in _records(report)
        if r["error"] is None and not r["unmatched_predicted"] and len(r["unmatched_observed"]) <= allowed_spurious
    ]


def theorem1_gates(report):
    agg = report["aggregate"]
    if not report["config"]["perturbation"]["thetas"] or all(
        abs(complex(*t) if isinstance(t, list) else t) <= 1 for t in report["config"]["perturbation"]["thetas"]
    ):
        return [Gate("spurious_rate", agg["spurious_rate"], 0.1, "<=")]
    ok = _successful(report)
    radius = report["config"]["outlier_rule"]["radius"]
    worst_bulk = max((r["bulk_radius"] for r in ok), default=0.0)
    return [
        Gate("success_fraction", agg["success_fraction"], 0.85, ">="),
        Gate("bulk_radius_max_successful", worst_bulk, radius, "<="),
    ]


def sparse_gates(report):
    agg = report["aggregate"]
    radius = report["config"]["outlier_rule"]["radius"]
    ok = _successful(report)
    worst_bulk = max((r["bulk_radius"] for r in ok), default=0.0)
    return [
        Gate("success_fraction", agg["success_fraction"], 0.8, ">="),
        Gate("bulk_radius_max_successful", worst_bulk, radius, "<="),
    ]


def semisparse_gates(report):
    records = _records(report)
    dn = report["config"]["dn"]
    smallest_top = min((r["largest_modulus"] or 0.0) for r in records)
    root_hits = sum(
        any(m["label"] == "root" for m in r["matches"]) for r in records
    ) / len(records)
    worst_residual = max((r["residual_radius"] if r["residual_radius"] is not None else math.inf) for r in records)
    return [
        Gate("min_largest_modulus_over_sqrt_dn", smallest_top / math.sqrt(dn), 0.9, ">="),
        Gate("root_matched_fraction", root_hits, 0.8, ">="),
        Gate("bulk_radius_max", worst_residual, 1.2, "<="),
    ]


def moments_gates(report):
    gates = []
    for camp in report["campaigns"]:
        k = camp["k"]
        m = camp["moments"]
        gates.append(Gate(f"k={k} rel_err E|t|^2 vs 1/k", _rel_err(m["E|t|^2"], 1.0 / k), 0.25, "<="))
        r = complex(*m["E[r]"]) if isinstance(m["E[r]"], list) else complex(m["E[r]"])
        if k % 2 == 0:
            gates.append(Gate(f"k={k} rel_err E[r] vs 1", _rel_err(r.real, 1.0), 0.15, "<="))
        else:
            gates.append(Gate(f"k={k} |E[r]|", abs(r), 0.1, "<="))
    return gates


def sparse_traces_gates(report):
    camp = report["campaign"]
    d = camp["d"]
    gates = []
    for row in camp["rows"]:
        k = row["k"]
        gates.append(Gate(f"k={k} rel_err mean vs tau", _rel_err(row["mean"], tau(d, k)), 0.15, "<="))
        gates.append(
            Gate(f"k={k} rel_err variance", _rel_err(row["variance"], cycle_count_variance(d, k)), 0.30, "<=")
        )
    return gates


def smoke_gates(report):
    if "aggregate" in report:
        return [Gate("failed_trials", report["aggregate"]["failed_trials"], 0, "<=")]
    return [Gate("completed", 1.0, 1.0, ">=")]


GATES = {
    "theorem1": theorem1_gates,
    "sparse": sparse_gates,
    "semisparse": semisparse_gates,
    "moments": moments_gates,
    "sparse-traces": sparse_traces_gates,
}


def evaluate_gates(campaign, report, preset="acceptance"):
    gates = smoke_gates(report) if preset == "smoke" else GATES[campaign](report)
    return gates, all(g.passed for g in gates)
