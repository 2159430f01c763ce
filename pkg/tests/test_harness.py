import itertools
import json
import math

import numpy as np
import pytest

from speclab import harness
from speclab.ensembles import DiagonalSpikes, FullMean, LowRank, SparseEntries
from speclab.entry_laws import Rademacher, SymmetrizedPareto, Zero
from speclab.errors import EigensolverError, ValidationError
from speclab.harness import (
    ExperimentConfig,
    TrialRecord,
    aggregate,
    derive_seed,
    match_outliers,
    mix64,
    report_fingerprint,
    run_campaign,
    run_trial,
    semisparse_degree,
    semisparse_trace_campaign,
    sparse_trace_campaign,
)
from speclab.limits import Prediction
from speclab.spectral import FixedRadius


def zero_config(thetas=(2,), n=20, trials=1):
    return ExperimentConfig(
        regime="theorem1", n=n, trials=trials, master_seed=5, law=Zero(),
        perturbation=DiagonalSpikes(thetas), outlier_rule=FixedRadius(1.15),
    )


class TestSeeds:
    def test_mix64_known_values(self):
        # first output of the reference SplitMix64 generator seeded with 0
        assert mix64(harness.GOLDEN) == 0xE220A8397B1DCDAF
        assert mix64(0) == 0
        assert 0 <= mix64(2**64 - 1) < 2**64

    def test_derive_seed(self):
        seeds = {derive_seed(2024, i) for i in range(1000)}
        assert len(seeds) == 1000
        assert derive_seed(2024, 3) == derive_seed(2024, 3)
        assert derive_seed(2024, 3) != derive_seed(2025, 3)


class TestMatchOutliers:
    def test_single(self):
        m = match_outliers([1.98 + 0.02j], [2], 0.25)
        assert len(m.pairs) == 1
        assert m.pairs[0][2] == pytest.approx(abs(0.02 - 0.02j))

    def test_empty_observed(self):
        m = match_outliers([], [2], 0.25)
        assert m.pairs == [] and m.unmatched_predicted == [2]

    def test_uncrossed(self):
        m = match_outliers([2.9, 4.1], [3, 4], 0.25)
        assert sorted((p.real, o.real) for p, o, _ in m.pairs) == [(3, 2.9), (4, 4.1)]
        assert m.total_distance == pytest.approx(0.2)

    def test_beyond_tolerance(self):
        m = match_outliers([2.5], [2], 0.25)
        assert m.pairs == []
        assert m.unmatched_observed == [2.5] and m.unmatched_predicted == [2]

    @pytest.mark.parametrize("sizes", [(3, 3), (2, 5), (6, 4), (6, 6)])
    def test_global_optimum(self, sizes):
        rng = np.random.default_rng(sum(sizes))
        for _ in range(10):
            p = rng.normal(size=sizes[0]) + 1j * rng.normal(size=sizes[0])
            o = rng.normal(size=sizes[1]) + 1j * rng.normal(size=sizes[1])
            m = match_outliers(o, p, tolerance=100)
            k = min(sizes)
            best = min(
                sum(abs(p[i] - o[j]) for i, j in zip(pi, oj))
                for pi in itertools.permutations(range(sizes[0]), k)
                for oj in itertools.permutations(range(sizes[1]), k)
            )
            assert m.total_distance == pytest.approx(best)

    def test_large_uses_assignment(self):
        rng = np.random.default_rng(1)
        p = rng.normal(size=9) + 1j * rng.normal(size=9)
        o = p + 0.01
        m = match_outliers(o, p, 0.1)
        assert len(m.pairs) == 9
        assert m.total_distance == pytest.approx(0.09)

    def test_injective(self):
        m = match_outliers([2.0, 2.01, 2.02], [2.0, 2.005], 0.25)
        assert len({o for _, o, _ in m.pairs}) == len(m.pairs) == 2
        assert len(m.unmatched_observed) == 1


class TestRunTrial:
    def test_deterministic_matrix(self):
        rec = run_trial(zero_config(), 0)
        assert rec.observed_outliers == [2]
        assert rec.matches == [("root", 2, 2, 0.0)]
        assert rec.success()

    def test_subcritical_predicts_nothing(self):
        rec = run_trial(zero_config((0.5,)), 0)
        assert rec.predicted == []
        assert rec.success() == (len(rec.unmatched_observed) == 0)
        assert rec.success()

    def test_reproducible(self):
        cfg = ExperimentConfig(
            regime="theorem1", n=60, trials=2, master_seed=11, law=SymmetrizedPareto(3.0),
            perturbation=DiagonalSpikes((2,)),
        )
        a, b = run_trial(cfg, 1), run_trial(cfg, 1)
        assert json.dumps(a.to_json()) == json.dumps(b.to_json())

    def test_eigensolver_failure_recorded(self, monkeypatch):
        def boom(M):
            raise EigensolverError("no convergence", partial=None)

        monkeypatch.setattr(harness, "eigenvalues", boom)
        rec = run_trial(zero_config(), 0)
        assert rec.error and not rec.success()
        agg = aggregate([rec])
        assert agg.failed_trials == 1 and agg.success_fraction == 0

    def test_sparse_predictions(self):
        cfg = ExperimentConfig(
            regime="sparse", n=400, trials=1, d=4.0, perturbation=SparseEntries(((1, 1, 3),)),
            outlier_rule=FixedRadius(2.3), match_tolerance=0.5,
        )
        rec = run_trial(cfg, 0)
        assert sorted(p.label for p in rec.predicted) == ["perron", "root"]

    def test_semisparse_escape(self):
        cfg = ExperimentConfig(
            regime="semisparse", n=600, trials=1, perturbation=SparseEntries(((1, 1, 2),)),
            outlier_rule=FixedRadius(1.15), match_tolerance=0.3,
        )
        assert cfg.dn == semisparse_degree(600)
        rec = run_trial(cfg, 0)
        labels = [m[0] for m in rec.matches]
        assert "escape" in labels
        assert rec.largest_modulus >= 0.9 * math.sqrt(cfg.dn)


class TestConfig:
    def test_invalid(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(regime="theorem1", n=10, trials=0, law=Rademacher(), perturbation=DiagonalSpikes((2,)))
        with pytest.raises(ValidationError):
            ExperimentConfig(regime="theorem1", n=10, match_tolerance=0, law=Rademacher(),
                             perturbation=DiagonalSpikes((2,)))
        with pytest.raises(ValidationError):
            ExperimentConfig(regime="sparse", n=10, perturbation=DiagonalSpikes((2,)))
        with pytest.raises(ValidationError):
            ExperimentConfig(regime="theorem1", n=10, perturbation=DiagonalSpikes((2,)))
        with pytest.raises(ValidationError):
            ExperimentConfig(regime="bogus", n=10)

    def test_dn_rule(self):
        assert semisparse_degree(3000) == 14
        with pytest.raises(ValidationError):
            semisparse_degree(3000, 0.5)

    def test_unproven_flags(self):
        U = np.ones((10, 1)) / 10
        cfg = ExperimentConfig(regime="theorem1", n=10, law=Rademacher(), perturbation=LowRank(U, U))
        assert cfg.unproven_regime
        sparse_mean = ExperimentConfig(regime="sparse", n=50, d=3.0, perturbation=FullMean(2))
        assert sparse_mean.unproven_regime
        assert harness.predictions_for(sparse_mean) == []


def _record(i, ok):
    rec = TrialRecord(trial_index=i, derived_seed=i, predicted=[Prediction(2 + 0j)], bulk_radius=1.0,
                      residual_radius=1.0, largest_modulus=2.0)
    if ok:
        rec.matches = [("root", 2 + 0j, 2.01 + 0j, 0.01)]
    else:
        rec.unmatched_predicted = [2 + 0j]
    return rec


class TestAggregate:
    def test_all_perfect(self):
        agg = aggregate([_record(i, True) for i in range(4)])
        assert agg.success_fraction == 1.0
        assert agg.per_prediction[0]["mean_distance"] == pytest.approx(0.01)

    def test_half(self):
        agg = aggregate([_record(i, i % 2 == 0) for i in range(4)])
        assert agg.success_fraction == 0.5
        assert agg.per_prediction[0]["matched_fraction"] == 0.5

    def test_spurious_allowance(self):
        recs = [_record(0, True)]
        recs[0].unmatched_observed = [1.3]
        assert aggregate(recs).success_fraction == 0
        assert aggregate(recs, allowed_spurious=1).success_fraction == 1

    def test_empty(self):
        with pytest.raises(ValidationError):
            aggregate([])


class TestTraceCampaigns:
    def test_sparse_k1_mean(self):
        res = sparse_trace_campaign(2.0, 200, 3, 400, np.random.default_rng(0))
        row = res.rows[0]
        assert row["target_mean"] == 2 and row["target_variance"] == 2
        assert abs(row["mean"] - 2) < 5 * row["mean_stderr"]
        assert [r["target_mean"] for r in res.rows] == [2, 6, 10]
        assert [r["target_variance"] for r in res.rows] == [2, 10, 26]

    def test_sparse_kmax(self):
        with pytest.raises(ValidationError):
            sparse_trace_campaign(2.0, 100, 7, 10, np.random.default_rng(0))

    def test_semisparse_targets(self):
        res = semisparse_trace_campaign(2000, 2, 5, np.random.default_rng(1), dn=4)
        assert [(r["target_mean"], r["target_variance"]) for r in res.rows] == [(0, 1), (1, 2)]

    def test_semisparse_small_n_rejected(self):
        with pytest.raises(ValidationError):
            semisparse_trace_campaign(100, 2, 5, np.random.default_rng(0))


class TestCampaign:
    def test_reproducible_and_thread_independent(self):
        cfg = ExperimentConfig(
            regime="theorem1", n=40, trials=4, master_seed=3, law=SymmetrizedPareto(2.5),
            perturbation=DiagonalSpikes((2, 1.6j)),
        )
        a = run_campaign(cfg).report
        b = run_campaign(cfg).report
        c = run_campaign(cfg, threads=3).report
        assert report_fingerprint(a) == report_fingerprint(b) == report_fingerprint(c)
        assert a["schema_version"] == 1 and "timing" in a

    def test_moments_and_traces(self):
        cfg = ExperimentConfig(regime="moments", n=6, trials=5, law=Rademacher(), ks=(2, 3), K=0)
        rep = run_campaign(cfg).report
        assert [c["k"] for c in rep["campaigns"]] == [2, 3]
        cfg = ExperimentConfig(regime="sparse-traces", n=50, trials=5, d=2.0, ks=(1, 2), K=0)
        rep = run_campaign(cfg).report
        assert len(rep["campaign"]["rows"]) == 2

    def test_monotone_distance_diagnostic(self):
        """Mean matched distance to theta = 2 should shrink with n (weak convergence proxy)."""
        non_increasing = 0
        for rep in range(3):
            distances = []
            for n in (250, 500, 1000):
                cfg = ExperimentConfig(
                    regime="theorem1", n=n, trials=8, master_seed=100 + rep, law=SymmetrizedPareto(2.5),
                    perturbation=DiagonalSpikes((2,)), outlier_rule=FixedRadius(1.15), match_tolerance=0.5, K=0,
                )
                agg = run_campaign(cfg).report["aggregate"]
                distances.append(agg["per_prediction"][0]["mean_distance"])
            non_increasing += sum(b <= a for a, b in zip(distances, distances[1:]))
        assert non_increasing >= 4
