import math

import numpy as np
import pytest
from scipy import integrate

from speclab.entry_laws import (
    BernoulliSparse,
    ComplexGaussian,
    Rademacher,
    StandardRealGaussian,
    SymmetrizedPareto,
    Truncated,
    law_from_dict,
    parse_law,
    sample_entry,
    second_moment_square,
    standardize_pareto,
    truncate_law,
)
from speclab.errors import ValidationError


def pareto_raw_second_moment(alpha):
    """E[x^2] for density (alpha/2)|x|^(-alpha-1) on |x| >= 1, by quadrature."""
    val, _ = integrate.quad(lambda x: x * x * alpha * x ** (-alpha - 1), 1, np.inf, epsrel=1e-12)
    return val


def pareto_truncated_second_moment(alpha, M):
    """E[a^2 1{|a| <= M}] of the standardized law, by quadrature in the unscaled variable."""
    scale = 1 / math.sqrt(pareto_raw_second_moment(alpha))
    upper = M / scale
    if upper <= 1:
        return 0.0
    val, _ = integrate.quad(lambda x: x * x * alpha * x ** (-alpha - 1), 1, upper, epsrel=1e-12)
    return scale**2 * val


class TestStandardizePareto:
    @pytest.mark.parametrize("alpha, expected", [(3.0, math.sqrt(1 / 3)), (4.0, math.sqrt(1 / 2))])
    def test_scale_matches_quadrature(self, alpha, expected):
        law = standardize_pareto(alpha)
        oracle = 1 / math.sqrt(pareto_raw_second_moment(alpha))
        assert law.scale == pytest.approx(oracle, rel=1e-9)
        assert law.scale == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("alpha", [2.0, 1.5, 4.5])
    def test_rejects_out_of_range(self, alpha):
        with pytest.raises(ValidationError):
            standardize_pareto(alpha)

    def test_sample_mean_zero(self):
        rng = np.random.default_rng(1)
        x = standardize_pareto(3.0).sample(rng, 10**6)
        assert abs(x.mean()) < 0.01

    def test_fourth_moment_diverges(self):
        law = standardize_pareto(2.5)
        rng = np.random.default_rng(3)
        small = np.median([np.mean(law.sample(rng, 10**4) ** 4) for _ in range(20)])
        large = np.median([np.mean(law.sample(rng, 10**6) ** 4) for _ in range(20)])
        assert large >= 2 * small


STANDARDIZED = [
    SymmetrizedPareto(3.0),
    SymmetrizedPareto(4.0),
    Rademacher(),
    StandardRealGaussian(),
    ComplexGaussian(0.0),
    ComplexGaussian(0.5j),
    ComplexGaussian(-1.0),
]


class TestStandardizedLaws:
    @pytest.mark.parametrize("law", STANDARDIZED, ids=lambda law: f"{law.kind}")
    def test_mean_and_variance(self, law):
        rng = np.random.default_rng(11)
        x = np.asarray(law.sample(rng, 10**6))
        N = x.size
        assert abs(x.mean()) < 5 * x.std() / math.sqrt(N)
        sq = np.abs(x) ** 2
        assert abs(sq.mean() - 1) <= 5 * sq.std() / math.sqrt(N)

    @pytest.mark.parametrize("law", STANDARDIZED, ids=lambda law: f"{law.kind}")
    def test_rho_bounded(self, law):
        assert abs(law.rho) <= 1 + 1e-12

    def test_complex_gaussian_pseudo_variance(self):
        rng = np.random.default_rng(5)
        rho = 0.3 - 0.4j
        x = ComplexGaussian(rho).sample(rng, 4 * 10**5)
        assert abs(np.mean(x**2) - rho) < 0.01


class TestSampleEntry:
    def test_rademacher_support(self):
        rng = np.random.default_rng(0)
        assert all(sample_entry(Rademacher(), rng) in (-1, 1) for _ in range(100))

    def test_truncated_rademacher_identical(self):
        law = truncate_law(Rademacher(), 2.0)
        a = [sample_entry(law, np.random.default_rng(s)) for s in range(50)]
        b = [sample_entry(Rademacher(), np.random.default_rng(s)) for s in range(50)]
        assert a == b

    def test_bernoulli_sparse(self):
        law = BernoulliSparse(5, 1000)
        x = law.sample(np.random.default_rng(2), 10**6)
        assert set(np.unique(x)) <= {0.0, 1.0}
        p = x.mean()
        assert abs(p - 0.005) < 5 * math.sqrt(0.005 * 0.995 / 10**6)


class TestTruncation:
    def test_rademacher_below_support(self):
        law = truncate_law(Rademacher(), 0.5)
        x = law.sample(np.random.default_rng(0), 100)
        np.testing.assert_array_equal(x, 0.0)
        assert law.centering == 0

    def test_gaussian_centering_zero(self):
        assert truncate_law(StandardRealGaussian(), 10).centering == 0

    def test_pareto_truncated_variance_quadrature(self):
        law = truncate_law(SymmetrizedPareto(3.0), 5.0)
        assert law.variance == pytest.approx(pareto_truncated_second_moment(3.0, 5.0), rel=1e-8)
        assert law.variance < 1

    def test_pareto_monotone_approach(self):
        values = [second_moment_square(truncate_law(SymmetrizedPareto(2.5), M)).real for M in (2, 8, 32)]
        assert values[0] < values[1] < values[2] < 1

    def test_complex_gaussian_truncated_moments_monte_carlo(self):
        law = ComplexGaussian(0.4 + 0.3j)
        first, second, abs_second = law.truncated_moments(1.2)
        x = law.sample(np.random.default_rng(9), 10**6)
        inside = np.abs(x) <= 1.2
        assert abs(second - np.mean(np.where(inside, x**2, 0))) < 0.005
        assert abs(abs_second - np.mean(np.where(inside, np.abs(x) ** 2, 0))) < 0.005

    @pytest.mark.parametrize("base", [SymmetrizedPareto(2.5), Rademacher(), ComplexGaussian(0.2)])
    @pytest.mark.parametrize("M", [0.3, 1.0, 3.0])
    def test_samples_bounded_by_2M(self, base, M):
        law = truncate_law(base, M)
        x = law.sample(np.random.default_rng(4), 10**5)
        assert np.all(np.abs(x) <= 2 * M)

    def test_nonpositive_level(self):
        with pytest.raises(ValidationError):
            truncate_law(Rademacher(), 0.0)

    def test_nested_rejected(self):
        with pytest.raises(ValidationError):
            truncate_law(truncate_law(Rademacher(), 2.0), 1.0)


class TestSecondMomentSquare:
    def test_examples(self):
        assert second_moment_square(Rademacher()) == 1
        assert second_moment_square(ComplexGaussian(0.0)) == 0
        for alpha in (2.5, 3.0, 4.0):
            assert second_moment_square(SymmetrizedPareto(alpha)) == 1


class TestSerialization:
    @pytest.mark.parametrize(
        "law",
        STANDARDIZED + [BernoulliSparse(3, 100, True), truncate_law(SymmetrizedPareto(3), 4.0)],
        ids=lambda law: law.kind,
    )
    def test_roundtrip(self, law):
        again = law_from_dict(law.to_dict())
        assert again.to_dict() == law.to_dict()
        assert type(again) is type(law)

    def test_parse_law(self):
        assert parse_law("pareto:2.5") == SymmetrizedPareto(2.5)
        assert isinstance(parse_law("rademacher"), Rademacher)
        assert parse_law("complex-gaussian:0.5").rho == 0.5
        with pytest.raises(ValidationError):
            parse_law("cauchy")
        with pytest.raises(ValidationError):
            parse_law("pareto:abc")

    def test_truncated_is_not_standardized(self):
        law = truncate_law(SymmetrizedPareto(3), 4.0)
        assert isinstance(law, Truncated)
        assert not law.standardized
