import logging
import warnings
from abc import ABC, abstractmethod
from typing import Optional

import numpy as np
import statsmodels.api as sm
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.special import expit, log_expit
from statsmodels.tools.sm_exceptions import PerfectSeparationError, PerfectSeparationWarning

from pairedprobit.config import FitOptions, PROB_FLOOR
from pairedprobit.exceptions import (
    NoDiscordantPairsError,
    NonConvergenceError,
    PropensityDegenerateError,
    SeparationWarning,
    UsageError,
)
from pairedprobit.model import (
    Dataset,
    IdentifiabilityReport,
    PairArrays,
    Theta,
    check_identifiability,
    grad_vector,
    index_s,
    loglik_vector,
    prob_from_s,
)
from pairedprobit.numerics import SQRT_2, SQRT_PI, clamped_cdf, gauss_hermite, std_normal_cdf, std_normal_pdf
from pairedprobit.utils.enums import Method
from pairedprobit.utils.optimize import maximize, numerical_hessian

logger = logging.getLogger(__name__)

# fitted probability of the observed discordant outcome above this means separation
SEPARATION_FIT_LEVEL = 1.0 - 1e-6
# below this sigma_hat the fit sits on the sigma = 0 boundary of the random-effects model
SIGMA_BOUNDARY = 1e-4


class EstimateResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    method: Method
    theta_hat: Theta
    se: Optional[tuple[float, ...]] = None
    k_n: float
    loglik: float
    iterations: int
    converged: bool
    gradient_max: float = 0.0
    identifiability: Optional[IdentifiabilityReport] = None
    warnings: tuple[str, ...] = ()

    def with_se(self, se) -> "EstimateResult":
        return self.model_copy(update={"se": tuple(float(v) for v in se)})

    def require_converged(self) -> "EstimateResult":
        if not self.converged:
            raise NonConvergenceError(iterations=self.iterations, gradient_norm=self.gradient_max)
        return self


class HeckmanResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambda_hat: float
    sigma_hat: float
    beta_hat: tuple[float, ...] = ()
    loglik: float
    iterations: int = 0
    converged: bool
    lambda_variance: Optional[float] = None
    at_boundary: bool = False

    @field_validator("sigma_hat")
    @classmethod
    def check_sigma(cls, value: float) -> float:
        if value < 0:
            raise ValueError("sigma_hat must be non-negative")
        return value

    @property
    def sigma2_hat(self) -> float:
        return self.sigma_hat ** 2

    @property
    def lambda_se(self) -> Optional[float]:
        return None if self.lambda_variance is None else self.lambda_variance ** 0.5


class UnpairedRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    y: int
    x: tuple[float, ...] = ()
    d: int


class UnpairedSample(BaseModel):
    """Individual-level view of matched pairs, used by the IPW estimator."""
    model_config = ConfigDict(frozen=True)

    records: tuple[UnpairedRecord, ...]

    @field_validator("records")
    @classmethod
    def check_dimension(cls, records):
        if len({len(r.x) for r in records}) > 1:
            raise ValueError("all records must share the covariate dimension")
        return records

    @classmethod
    def from_dataset(cls, data: Dataset) -> "UnpairedSample":
        """Split every pair into A (treatment d) and B (treatment 1 - d)."""
        records = []
        for pair in data.pairs:
            records.append(UnpairedRecord(y=pair.y_a, x=pair.x_a, d=pair.d))
            records.append(UnpairedRecord(y=pair.y_b, x=pair.x_b, d=1 - pair.d))
        return cls(records=tuple(records))

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        y = np.array([r.y for r in self.records], dtype=float)
        d = np.array([r.d for r in self.records], dtype=float)
        k = len(self.records[0].x) if self.records else 0
        x = np.array([r.x for r in self.records], dtype=float).reshape(len(self.records), k)
        return y, x, d


def _separation_messages(theta_vector: np.ndarray, observed_prob: np.ndarray, bound: float) -> list[str]:
    messages = []
    if abs(theta_vector[-1]) > bound or np.linalg.norm(theta_vector[:-1]) > bound:
        messages.append(f"estimate exceeds {bound:g} in magnitude; the likelihood has no finite maximum")
    elif observed_prob.size and np.all(observed_prob > SEPARATION_FIT_LEVEL):
        messages.append("discordant outcomes are perfectly predicted (one-sided discordance)")
    for message in messages:
        warnings.warn(message, SeparationWarning, stacklevel=3)
    return messages


class PairEstimator(ABC):
    """Common driver for the likelihood-based matched-pairs estimators."""
    method: Method

    def __init__(self, options: Optional[FitOptions] = None):
        self.options = options or FitOptions()

    @abstractmethod
    def fit(self, data: Dataset):
        pass

    @staticmethod
    def _require_discordant(data: Dataset) -> None:
        if data.discordant_count == 0:
            raise NoDiscordantPairsError()


class DiscordantPairEstimator(PairEstimator):
    """Estimators whose likelihood involves only the discordant pairs."""

    @abstractmethod
    def _loglik(self, theta_vector: np.ndarray, data: Dataset) -> float:
        pass

    @abstractmethod
    def _grad(self, theta_vector: np.ndarray, data: Dataset) -> np.ndarray:
        pass

    @abstractmethod
    def _observed_outcome_prob(self, theta_vector: np.ndarray, arrays: PairArrays, mask: np.ndarray) -> np.ndarray:
        pass

    def fit(self, data: Dataset) -> EstimateResult:
        self._require_discordant(data)
        options = self.options
        outcome = maximize(
            lambda v: self._loglik(v, data),
            lambda v: self._grad(v, data),
            np.zeros(data.k + 1),
            gradient_tol=options.gradient_tol,
            step_tol=options.step_tol,
            max_iter=options.max_iter,
        )
        arrays = data.arrays
        mask = arrays.discordant
        notes = _separation_messages(
            outcome.x, self._observed_outcome_prob(outcome.x, arrays, mask), options.separation_bound
        )
        if not outcome.converged:
            logger.warning("%s fit stopped after %d iterations without converging", self.method, outcome.iterations)
            notes.append(f"no convergence after {outcome.iterations} iterations")
        report = check_identifiability(data) if options.check_identifiability else None
        if report is not None and not (report.rank_ok and report.cone_ok):
            notes.append(f"identifiability conditions not met: {report.details}")
        result = EstimateResult(
            method=self.method,
            theta_hat=Theta.from_vector(outcome.x),
            k_n=data.k_n,
            loglik=outcome.value,
            iterations=outcome.iterations,
            converged=outcome.converged,
            gradient_max=float(np.max(np.abs(outcome.gradient), initial=0.0)),
            identifiability=report,
            warnings=tuple(notes),
        )
        logger.info("%s fit: theta %s, loglik %.6f, %d iterations", self.method, outcome.x, outcome.value,
                    outcome.iterations)
        return result


class ConditionalMLE(DiscordantPairEstimator):
    """Maximizer of the G-ratio conditional likelihood of discordant outcomes."""
    method = Method.CONDITIONAL

    def _loglik(self, theta_vector, data):
        return loglik_vector(theta_vector, data)

    def _grad(self, theta_vector, data):
        return grad_vector(theta_vector, data)

    def _observed_outcome_prob(self, theta_vector, arrays, mask):
        p = prob_from_s(index_s(theta_vector, arrays)[mask])
        return np.where(arrays.y_a[mask] == 1, p, 1.0 - p)


class ConditionalLogit(DiscordantPairEstimator):
    """Chamberlain's conditional logit: P((1,0) | discordant) = logistic(-s)."""
    method = Method.CML

    def _loglik(self, theta_vector, data):
        arrays = data.arrays
        mask = arrays.discordant
        s = index_s(theta_vector, arrays)[mask]
        return float(np.sum(arrays.y_a[mask] * log_expit(-s) + arrays.y_b[mask] * log_expit(s)))

    def _grad(self, theta_vector, data):
        arrays = data.arrays
        mask = arrays.discordant
        s = index_s(theta_vector, arrays)[mask]
        score_s = arrays.y_b[mask] - expit(s)
        design = np.column_stack([arrays.x_diff[mask], 1.0 - 2.0 * arrays.d[mask]])
        return design.T @ score_s

    def _observed_outcome_prob(self, theta_vector, arrays, mask):
        p = expit(-index_s(theta_vector, arrays)[mask])
        return np.where(arrays.y_a[mask] == 1, p, 1.0 - p)


def heckman_loglik(beta, lam: float, sigma: float, data: Dataset, order: int = 40) -> float:
    """
    Random-effects probit log-likelihood with tau ~ N(0, sigma^2).

    The pair effect is integrated out by Gauss-Hermite quadrature with
    tau = sqrt(2) * sigma * t. With sigma = 0 the two members are
    independent probits.
    """
    rule = gauss_hermite(order)
    vector = np.concatenate([np.asarray(beta, dtype=float).reshape(-1), [lam]])
    value, _ = _heckman_terms(vector, sigma, data.arrays, rule, with_grad=False)
    return value


def _heckman_terms(theta_vector, sigma, arrays: PairArrays, rule, with_grad: bool):
    beta, lam = theta_vector[:-1], theta_vector[-1]
    nodes, weights = rule.arrays()
    weights = weights / SQRT_PI
    tau = SQRT_2 * sigma * nodes
    sign_a = 2.0 * arrays.y_a - 1.0
    sign_b = 2.0 * arrays.y_b - 1.0
    index_a = arrays.x_a @ beta + lam * arrays.d
    index_b = arrays.x_b @ beta + lam * (1.0 - arrays.d)
    arg_a = sign_a[:, None] * (index_a[:, None] + tau[None, :])
    arg_b = sign_b[:, None] * (index_b[:, None] + tau[None, :])
    cdf_a, cdf_b = clamped_cdf(arg_a), clamped_cdf(arg_b)
    likelihood = np.maximum((cdf_a * cdf_b) @ weights, PROB_FLOOR)
    value = float(np.sum(np.log(likelihood)))
    if not with_grad:
        return value, None

    dens_a = sign_a[:, None] * std_normal_pdf(arg_a) * cdf_b
    dens_b = sign_b[:, None] * std_normal_pdf(arg_b) * cdf_a
    d_index_a = (dens_a @ weights) / likelihood
    d_index_b = (dens_b @ weights) / likelihood
    d_log_sigma = ((dens_a + dens_b) @ (weights * tau)) / likelihood
    grad_beta = arrays.x_a.T @ d_index_a + arrays.x_b.T @ d_index_b
    grad_lam = np.dot(d_index_a, arrays.d) + np.dot(d_index_b, 1.0 - arrays.d)
    return value, np.concatenate([grad_beta, [grad_lam, np.sum(d_log_sigma)]])


def _heckman_lambda_variance(grad, params: np.ndarray, k: int, at_boundary: bool) -> Optional[float]:
    """
    Observed-information variance of lambda_hat from the joint Hessian in
    (beta, lambda, log sigma).

    On the sigma = 0 boundary the log sigma direction carries no
    information and sigma is held at its estimate, so only the
    (beta, lambda) block is inverted. Returns None when the information
    matrix is not positive definite.
    """
    free = k + 1 if at_boundary else params.size
    fixed = params[free:]
    hessian = numerical_hessian(lambda v: grad(np.concatenate([v, fixed]))[:free], params[:free])
    try:
        np.linalg.cholesky(-hessian)
        covariance = np.linalg.inv(-hessian)
    except np.linalg.LinAlgError:
        logger.warning("Heckman information matrix is not positive definite; no variance for lambda_hat")
        return None
    return float(covariance[k, k])


class HeckmanML(PairEstimator):
    """Random-effects probit ML with a normal pair effect, fitted in (beta, lambda, log sigma)."""
    method = Method.HECKMAN

    def fit(self, data: Dataset) -> HeckmanResult:
        if data.n < 2:
            raise UsageError("the random-effects fit needs at least two pairs")
        rule = gauss_hermite(self.options.quad_order)
        arrays = data.arrays

        def value(params):
            return _heckman_terms(params[:-1], np.exp(params[-1]), arrays, rule, with_grad=False)[0]

        def grad(params):
            return _heckman_terms(params[:-1], np.exp(params[-1]), arrays, rule, with_grad=True)[1]

        outcome = maximize(value, grad, np.zeros(data.k + 2), gradient_tol=self.options.gradient_tol,
                           step_tol=self.options.step_tol, max_iter=self.options.max_iter)
        sigma = float(np.exp(outcome.x[-1]))
        if not outcome.converged:
            logger.warning("Heckman fit stopped after %d iterations without converging", outcome.iterations)
        at_boundary = sigma < SIGMA_BOUNDARY
        if at_boundary:
            logger.info("Heckman fit at the sigma = 0 boundary (sigma_hat = %.3g)", sigma)
        lambda_variance = _heckman_lambda_variance(grad, outcome.x, data.k, at_boundary)
        return HeckmanResult(
            lambda_hat=float(outcome.x[-2]),
            sigma_hat=sigma,
            beta_hat=tuple(float(v) for v in outcome.x[:-2]),
            loglik=outcome.value,
            iterations=outcome.iterations,
            converged=outcome.converged,
            lambda_variance=lambda_variance,
            at_boundary=at_boundary,
        )


def fit_conditional_mle(data: Dataset, options: Optional[FitOptions] = None) -> EstimateResult:
    """
    Conditional maximum-likelihood estimate of (beta, lambda).

    Parameters:
    -----------
    data : Dataset
        Matched pairs with at least one discordant pair.
    options : Optional[FitOptions]
        Tolerances, iteration cap and the identifiability switch.

    Returns:
    --------
    EstimateResult
        converged=False when the iteration cap was reached; separation is
        signalled with a SeparationWarning and recorded in warnings.

    Raises:
    -------
    NoDiscordantPairsError
        If no pair is discordant.
    """
    return ConditionalMLE(options).fit(data)


def fit_cml_logit(data: Dataset, options: Optional[FitOptions] = None) -> EstimateResult:
    return ConditionalLogit(options).fit(data)


def fit_heckman_ml(data: Dataset, options: Optional[FitOptions] = None) -> HeckmanResult:
    return HeckmanML(options).fit(data)


def ipw_ate(sample: UnpairedSample, options: Optional[FitOptions] = None) -> float:
    """
    Inverse-probability-weighted ATE (difference of Horvitz-Thompson means).

    The propensity is a logistic regression of d on an intercept and the
    covariates, fitted by Newton-Raphson and trimmed to the configured
    bounds.
    """
    options = options or FitOptions()
    y, x, d = sample.arrays()
    if d.sum() == 0 or d.sum() == d.size:
        raise PropensityDegenerateError("IPW needs both treated and untreated records")
    exog = np.column_stack([np.ones(d.size), x])
    with warnings.catch_warnings():
        warnings.simplefilter("error", PerfectSeparationWarning)
        try:
            fitted = sm.Logit(d, exog).fit(method="newton", disp=0, maxiter=100)
        except (PerfectSeparationError, PerfectSeparationWarning, np.linalg.LinAlgError) as error:
            raise PropensityDegenerateError(f"propensity model cannot be fitted: {error}") from error
    propensity = np.clip(fitted.predict(exog), *options.propensity_bounds)
    return float(np.mean(y * d / propensity) - np.mean(y * (1.0 - d) / (1.0 - propensity)))


def naive_ate(data: Dataset) -> float:
    arrays = data.arrays
    treated = arrays.y_a * arrays.d + arrays.y_b * (1.0 - arrays.d)
    control = arrays.y_a * (1.0 - arrays.d) + arrays.y_b * arrays.d
    return float(np.mean(treated - control))


def ate_closed_form_normal(lam: float, mu_tau: float, sigma_tau: float) -> float:
    """ATE under tau ~ N(mu_tau, sigma_tau^2): Phi((lam - mu)/r) - Phi(-mu/r), r = sqrt(1 + sigma^2)."""
    scale = np.sqrt(1.0 + sigma_tau ** 2)
    return std_normal_cdf((lam - mu_tau) / scale) - std_normal_cdf(-mu_tau / scale)


def ate_closed_form_mixture(lam: float, p: float, mu1: float, sigma1: float, mu2: float, sigma2: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"mixture weight must lie in [0, 1], got {p}")
    return p * ate_closed_form_normal(lam, mu1, sigma1) + (1.0 - p) * ate_closed_form_normal(lam, mu2, sigma2)
