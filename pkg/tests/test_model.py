import numpy as np
import pytest
from pydantic import ValidationError
from scipy import stats
from scipy.integrate import quad

from pairedprobit.exceptions import DimensionMismatchError, InconsistentDimensionError, NoDiscordantPairsError
from pairedprobit.model import (
    Dataset,
    MatchedPair,
    Theta,
    check_identifiability,
    conditional_loglik,
    conditional_loglik_grad,
    conditional_prob,
    k_integral,
    pair_s,
    prob_from_s,
)
from pairedprobit.numerics import g_function


def integral_ratio(theta, pair):
    """P((1, 0) | discordant) from the two tau-integrals of the latent-index model."""
    beta = np.asarray(theta.beta)
    a = float(np.dot(beta, pair.x_a)) + theta.lam * pair.d
    b = float(np.dot(beta, pair.x_b)) + theta.lam * (1 - pair.d)
    one_zero, _ = quad(lambda t: stats.norm.cdf(a + t) * stats.norm.cdf(-b - t), -np.inf, np.inf, epsabs=1e-12)
    zero_one, _ = quad(lambda t: stats.norm.cdf(-a - t) * stats.norm.cdf(b + t), -np.inf, np.inf, epsabs=1e-12)
    return one_zero / (one_zero + zero_one)


@pytest.fixture
def covariate_data():
    rng = np.random.default_rng(7)
    n = 60
    x_a = rng.standard_normal((n, 2))
    x_b = x_a + rng.standard_normal((n, 2))
    y_a = rng.integers(0, 2, n)
    y_b = rng.integers(0, 2, n)
    d = rng.integers(0, 2, n)
    return Dataset.from_arrays(y_a, y_b, d, x_a, x_b)


class TestMatchedPair:

    def test_rejects_non_binary_outcome(self):
        with pytest.raises(ValidationError):
            MatchedPair(y_a=2, y_b=0, d=1)

    def test_rejects_unequal_covariates(self):
        with pytest.raises(ValidationError):
            MatchedPair(y_a=1, y_b=0, d=1, x_a=(1.0,), x_b=())

    def test_rejects_non_finite_covariates(self):
        with pytest.raises(ValidationError):
            MatchedPair(y_a=1, y_b=0, d=1, x_a=(float("nan"),), x_b=(0.0,))

    def test_swapped(self):
        pair = MatchedPair(y_a=1, y_b=0, d=1, x_a=(0.5,), x_b=(-1.0,))
        swapped = pair.swapped()
        assert (swapped.y_a, swapped.y_b, swapped.d) == (0, 1, 0)
        assert swapped.x_a == (-1.0,)
        assert swapped.swapped() == pair


class TestDataset:

    def test_inconsistent_dimension(self):
        pairs = (MatchedPair(y_a=1, y_b=0, d=1), MatchedPair(y_a=1, y_b=0, d=1, x_a=(1.0,), x_b=(2.0,)))
        with pytest.raises(InconsistentDimensionError):
            Dataset(pairs=pairs)

    def test_infers_k(self, covariate_data):
        assert covariate_data.k == 2
        assert Dataset(pairs=covariate_data.pairs).k == 2

    def test_tally(self):
        data = Dataset.from_arrays([1, 1, 0, 1, 0], [0, 0, 1, 1, 0], [1, 1, 1, 1, 1])
        assert data.discordance_tally() == (2, 1)
        assert data.discordant_count == 3
        assert data.k_n == pytest.approx(np.sqrt(3))

    def test_empty_dataset(self):
        with pytest.raises(ValidationError):
            Dataset(pairs=(), k=0)


class TestConditionalProbability:

    @pytest.mark.parametrize("lam, beta, d", [(0.0, 0.0, 1), (1.0, 0.5, 1), (-1.5, 2.0, 0), (0.7, -1.0, 0)])
    def test_matches_integral_ratio(self, lam, beta, d):
        theta = Theta(beta=(beta,), lam=lam)
        pair = MatchedPair(y_a=1, y_b=0, d=d, x_a=(0.3,), x_b=(-0.8,))
        assert conditional_prob(theta, pair) == pytest.approx(integral_ratio(theta, pair), abs=1e-6)

    def test_half_at_zero_index(self):
        pair = MatchedPair(y_a=1, y_b=0, d=1)
        assert conditional_prob(Theta(lam=0.0), pair) == 0.5

    def test_k_integral(self):
        pair = MatchedPair(y_a=1, y_b=0, d=0)
        theta = Theta(lam=0.0)
        assert k_integral(theta, pair) == pytest.approx(2.0)
        assert pair_s(Theta(lam=0.4), pair) == pytest.approx(0.4)

    @pytest.mark.parametrize("s", [-3.1, -0.7, 0.7, 2.0, 5.5])
    def test_k_integral_linear_identity(self, s):
        # d = 0 and k = 0 give s = lambda
        pair = MatchedPair(y_a=0, y_b=1, d=0)
        assert k_integral(Theta(lam=s), pair) == pytest.approx(2 * g_function(s) + np.sqrt(np.pi) * s, abs=1e-12)

    def test_k_integral_matches_quadrature(self):
        # A has index 0 and B has index lambda = s = 2; K carries the sqrt(pi) scale of G
        pair = MatchedPair(y_a=1, y_b=0, d=0)
        first, _ = quad(lambda u: stats.norm.cdf(u) * stats.norm.cdf(-2.0 - u), -np.inf, np.inf, epsabs=1e-12)
        second, _ = quad(lambda u: stats.norm.cdf(-u) * stats.norm.cdf(2.0 + u), -np.inf, np.inf, epsabs=1e-12)
        assert k_integral(Theta(lam=2.0), pair) == pytest.approx(np.sqrt(np.pi) * (first + second), abs=1e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            conditional_prob(Theta(beta=(1.0,), lam=0.0), MatchedPair(y_a=1, y_b=0, d=1))


class TestConditionalLikelihood:

    def test_balanced_tally_at_zero(self):
        data = Dataset.from_arrays([1, 0], [0, 1], [1, 1])
        assert conditional_loglik(Theta(lam=0.0), data) == pytest.approx(2 * np.log(0.5))

    def test_no_discordant_pairs(self):
        data = Dataset.from_arrays([1, 0], [1, 0], [1, 0])
        with pytest.raises(NoDiscordantPairsError):
            conditional_loglik(Theta(lam=0.0), data)

    @pytest.mark.parametrize("vector", [[0.0, 0.0, 0.0], [0.4, -0.7, 1.2], [-1.5, 2.0, -0.3]])
    def test_gradient_matches_finite_differences(self, covariate_data, vector):
        vector = np.asarray(vector)
        theta = Theta.from_vector(vector)
        analytic = conditional_loglik_grad(theta, covariate_data)
        h = 1e-6
        numeric = np.zeros(3)
        for j in range(3):
            step = np.zeros(3)
            step[j] = h
            numeric[j] = (conditional_loglik(Theta.from_vector(vector + step), covariate_data)
                          - conditional_loglik(Theta.from_vector(vector - step), covariate_data)) / (2 * h)
        assert np.allclose(analytic, numeric, rtol=1e-6, atol=1e-7)

    def test_concordant_pairs_contribute_nothing(self, covariate_data):
        theta = Theta(beta=(0.2, -0.4), lam=0.9)
        extra = [MatchedPair(y_a=1, y_b=1, d=1, x_a=(5.0, 1.0), x_b=(-3.0, 2.0)),
                 MatchedPair(y_a=0, y_b=0, d=0, x_a=(0.0, 0.0), x_b=(9.0, 9.0))]
        assert conditional_loglik(theta, covariate_data.with_pairs(extra)) == conditional_loglik(theta, covariate_data)

    def test_swap_invariance(self, covariate_data):
        theta = Theta(beta=(0.2, -0.4), lam=0.9)
        assert conditional_loglik(theta, covariate_data.swapped()) == pytest.approx(
            conditional_loglik(theta, covariate_data), rel=1e-13)

    @pytest.mark.parametrize("s", [-4.0, -0.3, 0.0, 1.3, 6.0])
    def test_prob_from_index(self, s):
        assert prob_from_s(s) == pytest.approx(g_function(s) / (g_function(s) + g_function(-s)), rel=1e-12)


class TestIdentifiability:

    def test_vacuous_without_covariates(self):
        report = check_identifiability(Dataset.from_arrays([1, 0], [0, 1], [1, 1]))
        assert report.identified

    def test_cone_fails_for_one_signed_differences(self):
        x_a = np.zeros((4, 1))
        x_b = np.array([[1.0], [2.0], [0.5], [3.0]])
        data = Dataset.from_arrays([1, 0, 1, 0], [0, 1, 0, 1], [1, 1, 0, 0], x_a, x_b)
        report = check_identifiability(data)
        assert report.rank_ok
        assert not report.cone_ok
        assert not report.identified

    def test_cone_holds_with_opposite_signs(self):
        x_a = np.zeros((4, 1))
        x_b = np.array([[1.0], [-2.0], [0.5], [3.0]])
        data = Dataset.from_arrays([1, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 1], x_a, x_b)
        report = check_identifiability(data)
        assert report.identified
        assert "d = 0" in report.details

    def test_opposite_differences_in_untreated_arm(self):
        # differences +1 and -1, both d = 0: -1 = (-1) * (+1)
        data = Dataset.from_arrays([1, 0], [0, 1], [0, 0], [[0.0], [0.0]], [[1.0], [-1.0]])
        report = check_identifiability(data)
        assert report.rank_ok
        assert report.cone_ok
        assert report.identified

    def test_rank_fails_for_collinear_differences(self):
        x_a = np.zeros((3, 2))
        x_b = np.array([[1.0, 2.0], [-1.0, -2.0], [2.0, 4.0]])
        data = Dataset.from_arrays([1, 0, 1], [0, 1, 0], [0, 0, 0], x_a, x_b)
        assert not check_identifiability(data).rank_ok
