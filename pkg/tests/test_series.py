import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speclab.errors import ValidationError
from speclab.series import TruncatedPowerSeries, series_exp, series_power


class TestTruncatedPowerSeries:
    def test_horner_matches_polyval(self):
        s = TruncatedPowerSeries([1, -2, 3j, 0.5])
        z = np.array([0.1, -0.3 + 0.2j, 0.7j])
        np.testing.assert_allclose(s(z), np.polyval(s.coefficients[::-1], z), rtol=1e-14)
        assert isinstance(s(0.2), complex)

    def test_derivative(self):
        s = TruncatedPowerSeries([1, 2, 3, 4])
        np.testing.assert_array_equal(s.derivative().coefficients, [2, 6, 12])
        assert TruncatedPowerSeries([5]).derivative().degree == 0

    def test_product_truncates_to_max_degree(self):
        a = TruncatedPowerSeries([1, -2])
        b = TruncatedPowerSeries([1, 1.5])
        np.testing.assert_allclose((a * b).coefficients, [1, -0.5])
        c = TruncatedPowerSeries([1, -2, 0])
        np.testing.assert_allclose((c * b).coefficients, [1, -0.5, -3])

    def test_product_radius_and_provenance(self):
        a = TruncatedPowerSeries([1, 1], 0.5, "sampled")
        b = TruncatedPowerSeries([1, 1], 2.0)
        p = a * b
        assert p.validity_radius == 0.5
        assert p.provenance == "sampled"

    def test_trimmed_and_padded(self):
        s = TruncatedPowerSeries([1, 2, 0, 0])
        assert s.trimmed().degree == 1
        assert s.padded(6).degree == 6
        assert s.padded(0).degree == 0

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            TruncatedPowerSeries([])

    def test_json_roundtrip(self):
        for radius in (math.inf, 0.5):
            s = TruncatedPowerSeries([1, -0.5 + 2j, 3], radius, "sampled")
            t = TruncatedPowerSeries.from_json(s.to_json())
            np.testing.assert_array_equal(t.coefficients, s.coefficients)
            assert t.validity_radius == radius
            assert t.provenance == "sampled"


class TestSeriesExp:
    def test_exp_of_z(self):
        g = series_exp(TruncatedPowerSeries([0, 1]), 10)
        np.testing.assert_allclose(g.coefficients.real, [1 / math.factorial(k) for k in range(11)], rtol=1e-14)

    def test_exp_log_inverse(self):
        # log(1 - z) = -sum z^k / k  =>  exp gives 1 - z
        K = 20
        log = TruncatedPowerSeries([0] + [-1 / k for k in range(1, K + 1)])
        np.testing.assert_allclose(series_exp(log, K).coefficients, [1, -1] + [0] * (K - 1), atol=1e-14)

    def test_requires_zero_constant(self):
        with pytest.raises(ValidationError):
            series_exp(TruncatedPowerSeries([1, 1]))

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-1, 1), min_size=2, max_size=6), st.floats(-0.5, 0.5))
    def test_exp_evaluates_correctly(self, coeffs, z):
        f = TruncatedPowerSeries([0] + coeffs)
        g = series_exp(f, 60)
        assert abs(g(z) - np.exp(f(z))) < 1e-10


class TestSeriesPower:
    def test_sqrt_one_minus_z2(self):
        g = series_power(TruncatedPowerSeries([1, 0, -1]), 0.5, 8)
        np.testing.assert_allclose(g.coefficients.real, [1, 0, -1 / 2, 0, -1 / 8, 0, -1 / 16, 0, -5 / 128])

    @pytest.mark.parametrize("a", [0.5, 1 / 3, -1.0, 2.0])
    def test_matches_direct_power(self, a):
        base = TruncatedPowerSeries([1, 0.3, -0.2j])
        g = series_power(base, a, 80)
        z = 0.4 * np.exp(0.7j)
        assert abs(g(z) - base(z) ** a) < 1e-12

    def test_constant_term_one(self):
        with pytest.raises(ValidationError):
            series_power(TruncatedPowerSeries([2, 1]), 0.5, 4)
