import numpy as np
import pytest

from speclab import limits
from speclab.errors import ValidationError, ZeroCountMismatch
from speclab.series import TruncatedPowerSeries

ONE = TruncatedPowerSeries([1])
C_HALF = TruncatedPowerSeries([1, -2])


def poly_from_zeros(zeros):
    """Coefficients (ascending) of prod (1 - z / zeta)."""
    coeffs = np.array([1 + 0j])
    for zeta in zeros:
        coeffs = np.convolve(coeffs, [1, -1 / zeta])
    return coeffs


class TestGaussianLogSeries:
    def test_rho_one_real(self):
        s = limits.sample_gaussian_log_series(1.0, 10, np.random.default_rng(0))
        np.testing.assert_array_equal(s.raw_variables["X"].imag, 0)
        np.testing.assert_allclose(s.series.coefficients[1:], s.raw_variables["X"] / np.arange(1, 11))
        assert s.series.coefficients[0] == 0
        assert s.series.validity_radius == 1.0

    @pytest.mark.parametrize("rho", [1, 0.5, 0, -0.5, 0.6j])
    def test_moment_suite(self, rho):
        rng = np.random.default_rng(1)
        X = np.array([limits.gaussian_x(rho, 5, rng) for _ in range(10**5)])
        for k in range(1, 6):
            col = X[:, k - 1]
            assert abs(col.mean()) < 0.02
            assert abs(np.mean(np.abs(col) ** 2) - 1) < 0.02
            assert abs(np.mean(col**2) - complex(rho) ** k) < 0.02

    def test_rejects_large_rho(self):
        with pytest.raises(ValidationError):
            limits.gaussian_x(1.5, 3, np.random.default_rng(0))


class TestKappaAndQ:
    def test_kappa(self):
        assert limits.kappa_eval(0.3, 0) == 1
        assert limits.kappa_eval(1, 0.6) == pytest.approx(0.8)
        zs = 0.99 * np.exp(2j * np.pi * np.linspace(0, 1, 50))
        assert all(abs(limits.kappa_eval(1, z)) > 0 for z in zs)

    def test_q_examples(self):
        rng = np.random.default_rng(2)
        F = limits.sample_gaussian_log_series(0.5, 60, rng)
        assert limits.limit_q_eval(ONE, 0.5, F, 0) == 1
        assert limits.limit_q_eval(C_HALF, 0.5, F, 0.5) == 0
        for z in (0.3, -0.8j, 0.85):
            assert limits.limit_q_eval(ONE, 0.5, F, z) != 0

    def test_eval_disk_enforced(self):
        F = limits.sample_gaussian_log_series(1, 10, np.random.default_rng(0))
        with pytest.raises(ValidationError):
            limits.limit_q_eval(ONE, 1, F, 0.95)


class TestPoissonLimit:
    def test_tau_and_variance(self):
        assert limits.tau(2, 3) == 10
        assert limits.tau(2, 2) == 6
        assert limits.cycle_count_variance(2, 2) == 10
        assert [limits.cycle_count_variance(2, k) for k in (1, 2, 3)] == [2, 10, 26]

    def test_moments_monte_carlo(self):
        rng = np.random.default_rng(3)
        d = 2.0
        X = np.array([limits.sample_poisson_cycle_limit(d, 4, rng).raw_variables["X"] for _ in range(10**5)])
        assert np.issubdtype(X.dtype, np.integer) and X.min() >= 0
        for k in range(1, 5):
            assert X[:, k - 1].mean() == pytest.approx(limits.tau(d, k), rel=0.03)
            assert X[:, k - 1].var() == pytest.approx(limits.cycle_count_variance(d, k), rel=0.03)
        assert abs(X[:, 2].mean() - 10) < 0.1
        cov = np.cov(X[:, 1], X[:, 2])[0, 1]
        assert cov == pytest.approx(d, rel=0.10)
        assert limits.cycle_count_covariance(d, 2, 3) == d

    def test_x_reconstructible(self):
        s = limits.sample_poisson_cycle_limit(3.0, 8, np.random.default_rng(4))
        Y, X = s.raw_variables["Y"], s.raw_variables["X"]
        for k in range(1, 9):
            assert X[k - 1] == sum(l * Y[l - 1] for l in limits.divisors(k))
        assert s.series.validity_radius == pytest.approx(3**-0.5)

    def test_overflow_rejected(self):
        with pytest.raises(ValidationError):
            limits.sample_poisson_cycle_limit(10.0, 40, np.random.default_rng(0))

    def test_q_examples(self):
        R = limits.sample_poisson_cycle_limit(4.0, 20, np.random.default_rng(5))
        assert limits.sparse_limit_q_eval(ONE, 4.0, R, 0, 30) == 1
        assert limits.sparse_limit_q_eval(ONE, 4.0, R, 0.25, 30) == 0
        assert limits.sparse_limit_q_eval(ONE, 4.0, R, 0.1 + 0.2j, 30) != 0

    def test_product_tail_bound(self):
        d, z, L = 4.0, 0.3, 10
        R = limits.sample_poisson_cycle_limit(d, 10, np.random.default_rng(6))
        a = limits.sparse_limit_q_eval(ONE, d, R, z, L)
        b = limits.sparse_limit_q_eval(ONE, d, R, z, 200)
        bound = limits.product_tail_bound(d, z, L)
        assert abs(np.log(b / a)) <= bound


class TestSemiSparseLimit:
    def test_examples(self):
        G = limits.sample_semisparse_limit(30, np.random.default_rng(7))
        assert limits.semisparse_q_eval(ONE, G, 0) == 0
        assert limits.semisparse_q_eval(C_HALF, G, 0.5) == 0
        for z in (0.3j, -0.7, 0.1 + 0.1j):
            assert limits.semisparse_q_eval(ONE, G, z) != 0
        np.testing.assert_allclose(
            G.series.coefficients[1:], G.raw_variables["N"] / np.sqrt(np.arange(1, 31))
        )


class TestLimitFunctionSeries:
    def test_iid_matches_direct(self):
        F = limits.sample_gaussian_log_series(0.5 - 0.2j, 40, np.random.default_rng(8))
        q = limits.limit_function_series(C_HALF, F, 300)
        for z in (0.3, 0.6j, -0.5 + 0.4j):
            assert abs(q(z) - limits.limit_q_eval(C_HALF, 0.5 - 0.2j, F, z)) < 1e-10

    def test_sparse_matches_direct(self):
        R = limits.sample_poisson_cycle_limit(4.0, 20, np.random.default_rng(9))
        q = limits.limit_function_series(C_HALF, R, 300)
        for z in (0.1, 0.3j, -0.2 + 0.2j):
            assert abs(q(z) - limits.sparse_limit_q_eval(C_HALF, 4.0, R, z, 300)) < 1e-9 * max(1, abs(q(z)))

    def test_semisparse_matches_direct(self):
        G = limits.sample_semisparse_limit(40, np.random.default_rng(10))
        q = limits.limit_function_series(C_HALF, G, 300)
        for z in (0.3, 0.6j, -0.5 + 0.4j):
            assert abs(q(z) - limits.semisparse_q_eval(C_HALF, G, z)) < 1e-10


class TestZeros:
    def test_examples(self):
        np.testing.assert_allclose(limits.zeros_in_disk(C_HALF, 0.9), [0.5])
        two = TruncatedPowerSeries([1, -0.5, -3])
        assert limits.winding_number(two, 0.9) == 2
        np.testing.assert_allclose(limits.zeros_in_disk(two, 0.9), [0.5, -2 / 3], atol=1e-14)
        assert limits.zeros_in_disk(TruncatedPowerSeries([1, -0.5]), 0.9) == []

    def test_random_factored(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            deg = int(rng.integers(1, 13))
            r = rng.uniform(0.1, 1.5, deg)
            zeros = r * np.exp(2j * np.pi * rng.random(deg))
            inside = zeros[np.abs(zeros) < 0.9]
            if np.any(np.abs(np.abs(zeros) - 0.9) < 0.02):
                continue
            found = limits.zeros_in_disk(TruncatedPowerSeries(poly_from_zeros(zeros)), 0.9)
            assert len(found) == inside.size
            for z in inside:
                assert min(abs(np.array(found) - z)) < 1e-9

    def test_mismatch_raises(self):
        # zero essentially on the contour: winding integration cannot certify
        with pytest.raises((ZeroCountMismatch, ValidationError)):
            limits.zeros_in_disk(TruncatedPowerSeries([1, -1 / 0.9]), 0.9)

    def test_radius_below_validity(self):
        with pytest.raises(ValidationError):
            limits.zeros_in_disk(TruncatedPowerSeries([1, -2], 0.5), 0.6)


class TestPredictions:
    def test_iid(self):
        p = limits.predicted_outliers(C_HALF, 1.0)
        assert [(x.value, x.label) for x in p] == [(2, "root")]
        assert limits.predicted_outliers(TruncatedPowerSeries([1, -0.5]), 1.0) == []

    def test_sparse(self):
        p = limits.predicted_outliers(TruncatedPowerSeries([1, -3]), 2.0, "sparse", d=4)
        assert sorted((x.label, x.value.real) for x in p) == [("perron", 4.0), ("root", pytest.approx(3.0))]

    def test_semisparse_escape(self):
        p = limits.predicted_outliers(C_HALF, 1.0, "semisparse", d=16)
        assert p[0].label == "escape" and p[0].value == 4

    def test_c0_must_be_one(self):
        with pytest.raises(ValidationError):
            limits.predicted_outliers(TruncatedPowerSeries([2, 1]), 1.0)

    def test_reciprocal_involution(self):
        c = TruncatedPowerSeries(poly_from_zeros([0.5, -0.4 + 0.3j, 0.7j]))
        zeros = limits.zeros_in_disk(c, 0.9)
        preds = [p.value for p in limits.predicted_outliers(c, 1.0)]
        back = sorted(limits.reciprocal_zeros(preds), key=lambda z: (abs(z), np.angle(z)))
        np.testing.assert_allclose(back, zeros, atol=1e-10)

    def test_limit_sample_json(self):
        s = limits.sample_poisson_cycle_limit(2.0, 5, np.random.default_rng(0))
        j = s.to_json()
        assert j["regime"] == "sparse" and j["d"] == 2.0
        assert TruncatedPowerSeries.from_json(j["series"]).degree == 5
