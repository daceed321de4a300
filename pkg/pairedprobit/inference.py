import logging
import math
import warnings
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import stats
from scipy.integrate import IntegrationWarning, quad

from pairedprobit.config import SIGMA_RANK_TOL
from pairedprobit.estimators import EstimateResult
from pairedprobit.exceptions import (
    InvalidTauSpecError,
    MissingInferenceError,
    NoDiscordantPairsError,
    NonIntegrableError,
    SingularSigmaError,
)
from pairedprobit.model import Dataset, Theta, check_dimension, dprob_ds, grad_vector, index_s
from pairedprobit.numerics import SQRT_2, SQRT_PI, g_function, gauss_hermite, std_normal_cdf
from pairedprobit.utils.enums import TauKind
from pairedprobit.utils.optimize import numerical_hessian

logger = logging.getLogger(__name__)


class TauDistribution(BaseModel):
    """
    Law of the pair effect tau.

    Parameters by kind: uniform(low, high); normal(mean, variance);
    t(df); cauchy (standard); mixture(p, mean, variance, mean2, variance2)
    meaning p * N(mean, variance) + (1 - p) * N(mean2, variance2).
    """
    model_config = ConfigDict(frozen=True)

    kind: TauKind
    low: float = 0.0
    high: float = 0.0
    mean: float = 0.0
    variance: float = 0.0
    df: float = 1.0
    p: float = 1.0
    mean2: float = 0.0
    variance2: float = 0.0

    @model_validator(mode="after")
    def check_parameters(self):
        if self.kind is TauKind.UNIFORM and not self.high > self.low:
            raise ValueError("uniform law needs high > low")
        if self.variance < 0 or self.variance2 < 0:
            raise ValueError("variances must be non-negative")
        if self.kind is TauKind.STUDENT_T and not self.df > 0:
            raise ValueError("Student-t law needs df > 0")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("mixture weight must lie in [0, 1]")
        return self

    @classmethod
    def uniform(cls, low: float, high: float) -> "TauDistribution":
        return cls(kind=TauKind.UNIFORM, low=low, high=high)

    @classmethod
    def normal(cls, mean: float = 0.0, variance: float = 1.0) -> "TauDistribution":
        return cls(kind=TauKind.NORMAL, mean=mean, variance=variance)

    @classmethod
    def student_t(cls, df: float) -> "TauDistribution":
        return cls(kind=TauKind.STUDENT_T, df=df)

    @classmethod
    def cauchy(cls) -> "TauDistribution":
        return cls(kind=TauKind.CAUCHY)

    @classmethod
    def mixture(cls, p: float, mean: float, variance: float, mean2: float, variance2: float) -> "TauDistribution":
        return cls(kind=TauKind.NORMAL_MIXTURE, p=p, mean=mean, variance=variance, mean2=mean2, variance2=variance2)

    @classmethod
    def parse(cls, spec: str) -> "TauDistribution":
        """Parse 'normal:0,0.1257', 'uniform:-4,4', 't:1', 'cauchy' or 'mixture:0.5,-6,9,6,9'."""
        name, _, args = spec.strip().partition(":")
        try:
            kind = TauKind(name.strip().lower())
            values = [float(v) for v in args.split(",")] if args.strip() else []
            builders = {
                TauKind.UNIFORM: (2, cls.uniform),
                TauKind.NORMAL: (2, cls.normal),
                TauKind.STUDENT_T: (1, cls.student_t),
                TauKind.CAUCHY: (0, cls.cauchy),
                TauKind.NORMAL_MIXTURE: (5, cls.mixture),
            }
            arity, builder = builders[kind]
            if len(values) != arity:
                raise ValueError(f"{kind} takes {arity} parameters")
            return builder(*values)
        except ValueError as error:
            raise InvalidTauSpecError(spec) from error

    def label(self) -> str:
        if self.kind is TauKind.UNIFORM:
            return f"U({self.low:g},{self.high:g})"
        if self.kind is TauKind.NORMAL:
            return f"N({self.mean:g},{self.variance:g})"
        if self.kind is TauKind.STUDENT_T:
            return f"t({self.df:g})"
        if self.kind is TauKind.CAUCHY:
            return "Cauchy"
        return (f"{self.p:g}*N({self.mean:g},{self.variance:g})"
                f"+{1 - self.p:g}*N({self.mean2:g},{self.variance2:g})")

    def frozen(self):
        """The scipy.stats law (not available for mixtures)."""
        if self.kind is TauKind.UNIFORM:
            return stats.uniform(loc=self.low, scale=self.high - self.low)
        if self.kind is TauKind.NORMAL:
            return stats.norm(loc=self.mean, scale=math.sqrt(self.variance))
        if self.kind is TauKind.STUDENT_T:
            return stats.t(df=self.df)
        if self.kind is TauKind.CAUCHY:
            return stats.cauchy()
        raise ValueError("a normal mixture has no single scipy law")

    def expectation(self) -> float:
        """E[tau], NaN when it does not exist (Cauchy, t with df <= 1)."""
        if self.kind is TauKind.NORMAL_MIXTURE:
            return self.p * self.mean + (1 - self.p) * self.mean2
        if self.kind is TauKind.CAUCHY or (self.kind is TauKind.STUDENT_T and self.df <= 1):
            return math.nan
        return float(self.frozen().mean())

    def std(self) -> float:
        """Standard deviation, NaN when it does not exist."""
        if self.kind is TauKind.NORMAL_MIXTURE:
            overall = self.p * self.mean + (1 - self.p) * self.mean2
            second = (self.p * (self.variance + self.mean ** 2)
                      + (1 - self.p) * (self.variance2 + self.mean2 ** 2))
            return math.sqrt(second - overall ** 2)
        if self.kind is TauKind.CAUCHY or (self.kind is TauKind.STUDENT_T and self.df <= 2):
            return math.nan
        return float(self.frozen().std())

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind is TauKind.UNIFORM:
            return rng.uniform(self.low, self.high, size)
        if self.kind is TauKind.NORMAL:
            return rng.normal(self.mean, math.sqrt(self.variance), size)
        if self.kind is TauKind.STUDENT_T:
            return rng.standard_t(self.df, size)
        if self.kind is TauKind.CAUCHY:
            return rng.standard_cauchy(size)
        first = rng.random(size) < self.p
        draws_1 = rng.normal(self.mean, math.sqrt(self.variance), size)
        draws_2 = rng.normal(self.mean2, math.sqrt(self.variance2), size)
        return np.where(first, draws_1, draws_2)


class InferenceResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    covariance: tuple[tuple[float, ...], ...]
    se: tuple[float, ...]
    c_hat: float
    sigma_hat_matrix: tuple[tuple[float, ...], ...]
    k_n: float
    observed_covariance: Optional[tuple[tuple[float, ...], ...]] = None
    observed_se: Optional[tuple[float, ...]] = None

    @property
    def variance(self) -> tuple[float, ...]:
        """Variance of each component of theta_hat, i.e. se squared."""
        return tuple(v * v for v in self.se)


def _as_matrix(array: np.ndarray) -> tuple[tuple[float, ...], ...]:
    return tuple(tuple(float(v) for v in row) for row in np.atleast_2d(array))


def observed_information_covariance(theta_hat: Theta, data: Dataset) -> Optional[np.ndarray]:
    """Inverse of the negative Hessian of the conditional log-likelihood (None if singular)."""
    hessian = numerical_hessian(lambda v: grad_vector(v, data), theta_hat.to_vector())
    try:
        return np.linalg.inv(-hessian)
    except np.linalg.LinAlgError:
        return None


def asymptotic_variance(theta_hat: Theta, data: Dataset) -> InferenceResult:
    """
    Plug-in asymptotic covariance of k_n (theta_hat - theta).

    Sigma and c are estimated by averages over all n pairs:
    Sigma = mean(K * dp dp' / (p (1 - p))), c = mean(K), and the
    covariance is c * Sigma^{-1}; standard errors divide its diagonal by
    k_n^2. The observed-information covariance is reported alongside.

    Raises:
    -------
    SingularSigmaError
        If Sigma is numerically singular.
    NoDiscordantPairsError
        If k_n = 0.
    """
    check_dimension(theta_hat, data.k)
    if data.discordant_count == 0:
        raise NoDiscordantPairsError()
    arrays = data.arrays
    s = index_s(theta_hat.to_vector(), arrays)
    g_pos, g_neg = g_function(s), g_function(-s)
    k_values = g_pos + g_neg
    p = g_pos / k_values
    design = np.column_stack([arrays.x_diff, 1.0 - 2.0 * arrays.d])
    dp = dprob_ds(s)[:, None] * design
    weights = k_values / (p * (1.0 - p))
    sigma = (dp * weights[:, None]).T @ dp / data.n
    c_hat = float(np.mean(k_values))

    singular = np.linalg.svd(sigma, compute_uv=False)
    if singular[-1] <= SIGMA_RANK_TOL * max(singular[0], 1.0):
        raise SingularSigmaError()
    covariance = c_hat * np.linalg.inv(sigma)
    covariance = 0.5 * (covariance + covariance.T)
    k_n = data.k_n
    se = np.sqrt(np.diag(covariance)) / k_n

    observed = observed_information_covariance(theta_hat, data)
    observed_se = None if observed is None else np.sqrt(np.abs(np.diag(observed)))
    if observed_se is not None and not np.allclose(se, observed_se, rtol=0.05):
        logger.info("Plug-in and observed-information standard errors differ: %s vs %s", se, observed_se)
    return InferenceResult(
        covariance=_as_matrix(covariance),
        se=tuple(float(v) for v in se),
        c_hat=c_hat,
        sigma_hat_matrix=_as_matrix(sigma),
        k_n=k_n,
        observed_covariance=None if observed is None else _as_matrix(observed),
        observed_se=None if observed_se is None else tuple(float(v) for v in observed_se),
    )


def wald_test(estimate: EstimateResult, inference: Optional[InferenceResult], component: int = -1) -> tuple[float, float]:
    """z = theta_hat_j / se_j and its two-sided normal p-value."""
    se = inference.se if inference is not None else estimate.se
    if se is None:
        raise MissingInferenceError()
    value = estimate.theta_hat.to_vector()[component]
    z = float(value / se[component])
    return z, 2.0 * std_normal_cdf(-abs(z))


def _tau_expectation(integrand, tau: TauDistribution, quad_order: int = 40) -> float:
    """
    E[integrand(tau)] for a bounded integrand.

    Normal laws and mixtures use Gauss-Hermite per component; every other
    law is integrated on the probability scale, u = F(tau), which keeps
    heavy tails finite.
    """
    if tau.kind in (TauKind.NORMAL, TauKind.NORMAL_MIXTURE):
        rule = gauss_hermite(quad_order)
        components = [(1.0, tau.mean, tau.variance)]
        if tau.kind is TauKind.NORMAL_MIXTURE:
            components = [(tau.p, tau.mean, tau.variance), (1 - tau.p, tau.mean2, tau.variance2)]
        total = 0.0
        for weight, mean, variance in components:
            scale = SQRT_2 * math.sqrt(variance)
            total += weight * rule.integrate(lambda t: integrand(mean + scale * t)) / SQRT_PI
        return total
    law = tau.frozen()
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, _ = quad(lambda u: integrand(law.ppf(u)), 0.0, 1.0, epsabs=1e-12, limit=200)
        except IntegrationWarning as error:
            raise NonIntegrableError(f"expectation under {tau.label()}: {error}") from error
    if not math.isfinite(value):
        raise NonIntegrableError()
    return float(value)


def expected_cdf(shift: float, tau: TauDistribution, quad_order: int = 40) -> float:
    """
    E[Phi(shift + tau)].

    Normal laws use the identity E[Phi(shift + tau)] = Phi((shift + mu) / sqrt(1 + sigma^2));
    every other law goes through Gauss-Hermite or probability-scale quadrature.
    """
    if tau.kind is TauKind.NORMAL:
        return std_normal_cdf((shift + tau.mean) / math.sqrt(1.0 + tau.variance))
    return _tau_expectation(lambda t: std_normal_cdf(shift + t), tau, quad_order)


def normal_expected_cdf_quadrature(shift: float, mean: float, variance: float, quad_order: int = 40) -> float:
    rule = gauss_hermite(quad_order)
    scale = SQRT_2 * math.sqrt(variance)
    return rule.integrate(lambda t: std_normal_cdf(shift + mean + scale * t)) / SQRT_PI


def treatment_odds(lam: float, tau: TauDistribution, quad_order: int = 40) -> float:
    """
    P(Y^A = 1) / P(Y^B = 1) for a treated A and untreated B sharing tau.

    Parameters:
    -----------
    lam : float
        Treatment effect on the probit scale.
    tau : TauDistribution
        Law of the pair effect.

    Returns:
    --------
    float
        E[Phi(lam + tau)] / E[Phi(tau)]; exactly 1 at lam = 0.
    """
    if not math.isfinite(lam):
        raise ValueError("lambda must be finite")
    if lam == 0:
        return 1.0
    return expected_cdf(lam, tau, quad_order) / expected_cdf(0.0, tau, quad_order)


def conditional_logit_limit(lam: float, tau: TauDistribution, quad_order: int = 40) -> float:
    """
    Probability limit of the conditional-logit lambda_hat when the data
    follow the probit model with k = 0.

    Conditional logit estimates the discordant log-odds
    log(P(1, 0) / P(0, 1)) of a treated A against an untreated B, which
    under the probit model is
    log(E[Phi(lam + tau) Phi(-tau)] / E[Phi(tau) Phi(-lam - tau)]).
    The gap to lam is the asymptotic bias of the conditional-logit fit.
    """
    if not math.isfinite(lam):
        raise ValueError("lambda must be finite")
    treated_first = _tau_expectation(lambda t: std_normal_cdf(lam + t) * std_normal_cdf(-t), tau, quad_order)
    control_first = _tau_expectation(lambda t: std_normal_cdf(t) * std_normal_cdf(-lam - t), tau, quad_order)
    return math.log(treated_first / control_first)
