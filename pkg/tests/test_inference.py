import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from pairedprobit.data_io import load_lead_dataset, load_leukaemia_dataset
from pairedprobit.estimators import EstimateResult, fit_conditional_mle
from pairedprobit.exceptions import InvalidTauSpecError, MissingInferenceError, NoDiscordantPairsError, SingularSigmaError
from pairedprobit.inference import (
    TauDistribution,
    asymptotic_variance,
    conditional_logit_limit,
    expected_cdf,
    normal_expected_cdf_quadrature,
    treatment_odds,
    wald_test,
)
from pairedprobit.model import Dataset, Theta
from pairedprobit.simulation import LOGISTIC_VARIANCE
from pairedprobit.utils.enums import Method, TauKind


class TestAsymptoticVariance:

    @pytest.fixture
    def lead_fit(self):
        data = load_lead_dataset()
        return data, fit_conditional_mle(data)

    def test_lead_variance(self, lead_fit):
        data, result = lead_fit
        inference = asymptotic_variance(result.theta_hat, data)
        assert 0.15 <= inference.variance[-1] <= 0.20
        assert inference.observed_se is not None
        assert inference.k_n == pytest.approx(math.sqrt(14))

    @pytest.mark.parametrize("copies", [2, 5])
    def test_duplicated_data_shrinks_se(self, lead_fit, copies):
        data, result = lead_fit
        repeated = data.with_pairs(data.pairs * (copies - 1))
        base = asymptotic_variance(result.theta_hat, data)
        scaled = asymptotic_variance(result.theta_hat, repeated)
        assert scaled.k_n ** 2 == pytest.approx(copies * base.k_n ** 2)
        assert scaled.c_hat == pytest.approx(base.c_hat, rel=1e-12)
        assert scaled.se[-1] == pytest.approx(base.se[-1] / math.sqrt(copies), rel=1e-10)

    def test_leukaemia_variance(self):
        data = load_leukaemia_dataset()
        inference = asymptotic_variance(fit_conditional_mle(data).theta_hat, data)
        assert 0.12 <= inference.variance[-1] <= 0.16

    def test_covariance_is_symmetric_positive(self):
        rng = np.random.default_rng(2)
        n = 400
        x_a = rng.standard_normal((n, 1))
        x_b = x_a + rng.standard_normal((n, 1))
        data = Dataset.from_arrays(rng.integers(0, 2, n), rng.integers(0, 2, n), rng.integers(0, 2, n), x_a, x_b)
        inference = asymptotic_variance(fit_conditional_mle(data).theta_hat, data)
        covariance = np.array(inference.covariance)
        assert np.allclose(covariance, covariance.T)
        assert np.all(np.linalg.eigvalsh(covariance) > 0)
        assert len(inference.se) == 2

    def test_singular_sigma(self):
        data = Dataset.from_arrays([1, 0, 1], [0, 1, 0], [1, 1, 1], [[1.0]] * 3, [[1.0]] * 3)
        with pytest.raises(SingularSigmaError):
            asymptotic_variance(Theta(beta=(0.0,), lam=0.2), data)

    def test_no_discordant_pairs(self):
        data = Dataset.from_arrays([1, 0], [1, 0], [1, 1])
        with pytest.raises(NoDiscordantPairsError):
            asymptotic_variance(Theta(lam=0.0), data)


class TestWaldTest:

    @staticmethod
    def estimate(lam, variance):
        return EstimateResult(method=Method.CONDITIONAL, theta_hat=Theta(lam=lam), se=(math.sqrt(variance),),
                              k_n=1.0, loglik=0.0, iterations=0, converged=True)

    @pytest.mark.parametrize("lam, variance, z, p_value", [
        (0.617, 0.1377, 1.663, 0.096),
        (0.9992, 0.1733, 2.400, 0.016),
    ])
    def test_published_estimates(self, lam, variance, z, p_value):
        observed_z, observed_p = wald_test(self.estimate(lam, variance), None)
        assert observed_z == pytest.approx(z, abs=1e-3)
        assert observed_p == pytest.approx(p_value, abs=1e-3)

    def test_zero_estimate(self):
        assert wald_test(self.estimate(0.0, 0.5), None) == (0.0, 1.0)

    def test_lead_lambda_significant(self):
        data = load_lead_dataset()
        result = fit_conditional_mle(data)
        inference = asymptotic_variance(result.theta_hat, data)
        z, p_value = wald_test(result, inference)
        assert z == pytest.approx(result.theta_hat.lam / inference.se[-1])
        assert p_value == pytest.approx(2 * stats.norm.sf(abs(z)))

    def test_missing_inference(self):
        result = fit_conditional_mle(load_lead_dataset())
        with pytest.raises(MissingInferenceError):
            wald_test(result, None)


class TestTreatmentOdds:

    def test_lead_odds(self):
        assert treatment_odds(0.9992, TauDistribution.normal(0.0, 0.1257)) == pytest.approx(1.653, abs=0.01)

    def test_zero_effect_is_exactly_one(self):
        assert treatment_odds(0.0, TauDistribution.cauchy()) == 1.0
        assert treatment_odds(0.0, TauDistribution.mixture(0.5, -6, 9, 6, 9)) == 1.0

    def test_rejects_non_finite_lambda(self):
        with pytest.raises(ValueError):
            treatment_odds(math.inf, TauDistribution.normal())

    def test_cauchy_is_finite(self):
        odds = treatment_odds(1.0, TauDistribution.cauchy())
        assert 1.0 < odds < 2.0

    def test_monotone_in_lambda(self):
        tau = TauDistribution.uniform(-4, 4)
        values = [treatment_odds(lam, tau) for lam in (-1.0, -0.5, 0.5, 1.0)]
        assert values == sorted(values)


class TestExpectedCdf:

    @pytest.mark.parametrize("shift, mean, variance", [(0.0, 0.0, 1.0), (1.0, -0.5, 4.0), (-2.0, 1.0, 0.1257)])
    def test_normal_identity_matches_quadrature(self, shift, mean, variance):
        closed = expected_cdf(shift, TauDistribution.normal(mean, variance))
        assert closed == pytest.approx(normal_expected_cdf_quadrature(shift, mean, variance), abs=1e-8)

    def test_uniform_matches_direct_integral(self):
        direct, _ = quad(lambda t: stats.norm.cdf(0.7 + t) / 8.0, -4.0, 4.0)
        assert expected_cdf(0.7, TauDistribution.uniform(-4, 4)) == pytest.approx(direct, abs=1e-9)

    def test_student_t(self):
        direct, _ = quad(lambda t: stats.norm.cdf(0.3 + t) * stats.t.pdf(t, 3), -np.inf, np.inf)
        assert expected_cdf(0.3, TauDistribution.student_t(3)) == pytest.approx(direct, abs=1e-8)

    def test_mixture_is_weighted_sum(self):
        tau = TauDistribution.mixture(0.3, -1.0, 2.0, 2.0, 0.5)
        expected = (0.3 * expected_cdf(0.4, TauDistribution.normal(-1.0, 2.0))
                    + 0.7 * expected_cdf(0.4, TauDistribution.normal(2.0, 0.5)))
        assert expected_cdf(0.4, tau) == pytest.approx(expected, abs=1e-10)


class TestTauDistribution:

    @pytest.mark.parametrize("spec, kind", [
        ("normal:0,0.1257", TauKind.NORMAL),
        ("uniform:-4,4", TauKind.UNIFORM),
        ("t:1", TauKind.STUDENT_T),
        ("cauchy", TauKind.CAUCHY),
        ("mixture:0.5,-6,9,6,9", TauKind.NORMAL_MIXTURE),
    ])
    def test_parse(self, spec, kind):
        assert TauDistribution.parse(spec).kind is kind

    @pytest.mark.parametrize("spec", ["gamma:1,2", "normal:0", "uniform:4,-4", "normal:a,b", ""])
    def test_parse_rejects(self, spec):
        with pytest.raises(InvalidTauSpecError):
            TauDistribution.parse(spec)

    def test_expectation(self):
        assert TauDistribution.normal(1.5, 4.0).expectation() == pytest.approx(1.5)
        assert TauDistribution.uniform(-4, 6).expectation() == pytest.approx(1.0)
        assert TauDistribution.mixture(0.25, -4, 1, 4, 1).expectation() == pytest.approx(2.0)
        assert TauDistribution.student_t(3).expectation() == pytest.approx(0.0)
        assert math.isnan(TauDistribution.cauchy().expectation())
        assert math.isnan(TauDistribution.student_t(1).expectation())

    def test_std(self):
        assert TauDistribution.normal(1.0, 4.0).std() == pytest.approx(2.0)
        assert TauDistribution.uniform(-4, 4).std() == pytest.approx(8 / math.sqrt(12))
        assert math.isnan(TauDistribution.cauchy().std())
        assert math.isnan(TauDistribution.student_t(2).std())
        assert TauDistribution.mixture(0.5, -6, 9, 6, 9).std() == pytest.approx(math.sqrt(45))

    def test_sample_moments(self):
        draws = TauDistribution.mixture(0.5, -6, 9, 6, 9).sample(np.random.default_rng(0), 200_000)
        assert np.mean(draws) == pytest.approx(0.0, abs=0.05)
        assert np.var(draws) == pytest.approx(45.0, rel=0.02)

    def test_label(self):
        assert TauDistribution.normal(0, 4).label() == "N(0,4)"
        assert TauDistribution.student_t(1).label() == "t(1)"


def discordant_log_odds(lam, variance):
    law = stats.norm(scale=math.sqrt(variance))
    treated_first, _ = quad(lambda t: stats.norm.cdf(lam + t) * stats.norm.cdf(-t) * law.pdf(t), -np.inf, np.inf)
    control_first, _ = quad(lambda t: stats.norm.cdf(t) * stats.norm.cdf(-lam - t) * law.pdf(t), -np.inf, np.inf)
    return math.log(treated_first / control_first)


class TestConditionalLogitLimit:

    def test_zero_effect(self):
        assert conditional_logit_limit(0.0, TauDistribution.normal(0, LOGISTIC_VARIANCE)) == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("variance", [1.0, LOGISTIC_VARIANCE, 6.0])
    def test_matches_integral(self, variance):
        assert conditional_logit_limit(1.0, TauDistribution.normal(0, variance)) == pytest.approx(
            discordant_log_odds(1.0, variance), abs=1e-5)

    def test_degenerate_tau_gives_probit_log_odds(self):
        expected = math.log(stats.norm.cdf(1.0) / stats.norm.cdf(-1.0))
        assert conditional_logit_limit(1.0, TauDistribution.normal(0, 1e-12)) == pytest.approx(expected, abs=1e-9)

    def test_bias_is_positive_and_grows_with_tau_variance(self):
        limits = [conditional_logit_limit(1.0, TauDistribution.normal(0, v)) for v in (1.0, LOGISTIC_VARIANCE, 6.0)]
        assert limits == sorted(limits)
        # between the degenerate-tau log-odds and the flat-tau limit log(G(-1) / G(1))
        assert all(1.668 < value < 1.794 for value in limits)

    def test_mixture(self):
        assert conditional_logit_limit(1.0, TauDistribution.mixture(0.5, -4, 6, 4, 6)) > 1.0
