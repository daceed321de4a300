import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from pairedprobit.exceptions import QuadratureOrderError
from pairedprobit.numerics import (
    SQRT_2,
    SQRT_PI,
    QuadratureRule,
    clamped_cdf,
    g_function,
    g_prime,
    gauss_hermite,
    std_normal_cdf,
)


def g_oracle(x):
    value, _ = quad(lambda u: stats.norm.cdf(u) * stats.norm.cdf(-x - u), -np.inf, np.inf, epsabs=1e-13)
    return SQRT_PI * value


class TestGFunction:

    def test_value_at_zero(self):
        assert g_function(0.0) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("x", [-5.0, -1.3, -0.2, 0.0, 0.7, 2.5, 8.0])
    def test_reflection_identity(self, x):
        assert g_function(-x) - g_function(x) == pytest.approx(SQRT_PI * x, abs=1e-12)

    @pytest.mark.parametrize("x", np.linspace(-6.0, 6.0, 13))
    def test_matches_integral(self, x):
        assert g_function(x) == pytest.approx(g_oracle(x), abs=1e-6)

    def test_positive_and_decreasing(self):
        grid = np.linspace(-8.0, 8.0, 161)
        values = g_function(grid)
        assert np.all(values > 0)
        assert np.all(np.diff(values) < 0)

    def test_positive_on_wide_range(self):
        assert np.all(g_function(np.linspace(-40.0, 40.0, 801)) > 0)

    @pytest.mark.parametrize("x", np.linspace(-40.0, 40.0, 33))
    def test_reflection_identity_on_wide_range(self, x):
        assert abs(g_function(-x) - g_function(x) - SQRT_PI * x) <= 1e-12 * max(1.0, abs(x))

    def test_derivative_limits(self):
        assert g_prime(0.0) == pytest.approx(-SQRT_PI / 2, abs=1e-15)
        assert g_prime(-40.0) == pytest.approx(-SQRT_PI, abs=1e-12)
        assert g_prime(40.0) == pytest.approx(0.0, abs=1e-12)

    def test_vectorized_matches_scalar(self):
        grid = np.array([-2.0, 0.5, 3.0])
        assert np.allclose(g_function(grid), [g_function(v) for v in grid], rtol=0, atol=1e-15)
        assert isinstance(g_function(0.5), float)

    @pytest.mark.parametrize("x", [-3.0, -0.4, 0.0, 1.1, 4.0])
    def test_derivative(self, x):
        h = 1e-6
        numeric = (g_function(x + h) - g_function(x - h)) / (2 * h)
        assert g_prime(x) == pytest.approx(numeric, rel=1e-7)
        assert g_prime(x) == pytest.approx(-SQRT_PI * stats.norm.cdf(-x / math.sqrt(2)), abs=1e-14)


class TestNormalCdf:

    def test_scalar_returns_float(self):
        assert isinstance(std_normal_cdf(0.0), float)
        assert std_normal_cdf(0.0) == 0.5

    def test_upper_quantile(self):
        assert std_normal_cdf(1.959963984540054) == pytest.approx(0.975, abs=1e-14)
        assert std_normal_cdf(1.3) + std_normal_cdf(-1.3) == pytest.approx(1.0, abs=1e-15)

    def test_lower_tail_precision(self):
        assert std_normal_cdf(-30.0) == pytest.approx(math.exp(stats.norm.logcdf(-30.0)), rel=1e-12)

    def test_clamped_cdf_keeps_log_finite(self):
        values = clamped_cdf(np.array([-100.0, 0.0, 100.0]))
        assert np.all(np.isfinite(np.log(values)))
        assert np.all(np.isfinite(np.log1p(-values)))


class TestGaussHermite:

    @pytest.mark.parametrize("order", [0, 129, -3])
    def test_order_out_of_range(self, order):
        with pytest.raises(QuadratureOrderError):
            gauss_hermite(order)

    def test_rejects_non_integer(self):
        with pytest.raises(QuadratureOrderError):
            gauss_hermite(2.5)

    def test_rule_is_cached(self):
        assert gauss_hermite(40) is gauss_hermite(40)

    def test_symmetric_nodes(self):
        nodes, weights = gauss_hermite(31).arrays()
        assert np.array_equal(nodes, -nodes[::-1])
        assert np.array_equal(weights, weights[::-1])

    @pytest.mark.parametrize("order", [1, 5, 40, 128])
    def test_integrates_polynomials(self, order):
        rule = gauss_hermite(order)
        assert rule.order == order
        assert rule.integrate(np.ones_like) == pytest.approx(SQRT_PI, rel=1e-12)
        if order >= 2:
            assert rule.integrate(np.square) == pytest.approx(SQRT_PI / 2, rel=1e-12)

    def test_low_orders(self):
        one = gauss_hermite(1)
        assert one.nodes == (0.0,)
        assert one.weights[0] == pytest.approx(SQRT_PI, rel=1e-14)
        nodes, weights = gauss_hermite(2).arrays()
        assert np.allclose(nodes, [-1 / math.sqrt(2), 1 / math.sqrt(2)], rtol=0, atol=1e-14)
        assert np.allclose(weights, [SQRT_PI / 2, SQRT_PI / 2], rtol=0, atol=1e-14)

    def test_fourth_moment_with_three_nodes(self):
        assert gauss_hermite(3).integrate(lambda t: t ** 4) == pytest.approx(3 * SQRT_PI / 4, abs=1e-12)

    def test_error_at_least_halves_as_order_doubles(self):
        def integrand(t):
            return stats.norm.cdf(1.0 + 3.0 * SQRT_2 * t) * stats.norm.cdf(-0.5 - 3.0 * SQRT_2 * t)

        exact, _ = quad(lambda t: integrand(t) * np.exp(-t * t), -np.inf, np.inf, epsabs=1e-14)
        errors = [abs(gauss_hermite(order).integrate(integrand) - exact) for order in (8, 16, 32)]
        assert errors[1] <= errors[0] / 2 or errors[1] < 1e-12
        assert errors[2] <= errors[0] / 4 or errors[2] < 1e-12

    def test_invalid_rule(self):
        with pytest.raises(ValueError):
            QuadratureRule(nodes=(1.0, 0.0), weights=(0.5, 0.5))
