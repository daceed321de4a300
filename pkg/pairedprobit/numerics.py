import logging
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite import hermgauss
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.special import ndtr

from pairedprobit.config import MAX_QUAD_ORDER, PROB_CEIL_GAP, PROB_FLOOR
from pairedprobit.exceptions import QuadratureOrderError

logger = logging.getLogger(__name__)

SQRT_PI = float(np.sqrt(np.pi))
SQRT_2 = float(np.sqrt(2.0))


class QuadratureRule(BaseModel):
    """Nodes and weights of a rule for integrals against exp(-t^2)."""
    model_config = ConfigDict(frozen=True)

    nodes: tuple[float, ...]
    weights: tuple[float, ...]

    @model_validator(mode="after")
    def check_rule(self):
        if len(self.nodes) != len(self.weights) or not self.nodes:
            raise ValueError("nodes and weights must be non-empty and of equal length")
        if any(b <= a for a, b in zip(self.nodes, self.nodes[1:])):
            raise ValueError("nodes must be strictly increasing")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive")
        return self

    @property
    def order(self) -> int:
        return len(self.nodes)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.nodes), np.asarray(self.weights)

    def integrate(self, func) -> float:
        """Approximate the integral of func(t) * exp(-t^2) over the real line."""
        nodes, weights = self.arrays()
        return float(np.dot(weights, func(nodes)))


def std_normal_cdf(x):
    """
    Standard normal distribution function.

    Works on scalars and arrays; evaluated through the complementary error
    function so both tails keep full relative precision.
    """
    result = ndtr(x)
    if np.ndim(result) == 0:
        return float(result)
    return result


def clamped_cdf(x):
    """Phi(x) clipped away from 0 and 1 so that its logarithm stays finite."""
    return np.clip(ndtr(x), PROB_FLOOR, 1.0 - PROB_CEIL_GAP)


def std_normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / np.sqrt(2.0 * np.pi)


def g_function(x):
    """
    G(x) = -sqrt(pi) * x * Phi(-x / sqrt(2)) + exp(-x^2 / 4).

    Equals sqrt(pi) times the integral of Phi(u) * Phi(-x - u) over u; positive
    for every finite x and decreasing, with G(-x) - G(x) = sqrt(pi) * x.
    """
    x = np.asarray(x, dtype=float)
    result = -SQRT_PI * x * ndtr(-x / SQRT_2) + np.exp(-0.25 * x * x)
    if result.ndim == 0:
        return float(result)
    return result


def g_prime(x):
    """Derivative of g_function: -sqrt(pi) * Phi(-x / sqrt(2))."""
    x = np.asarray(x, dtype=float)
    result = -SQRT_PI * ndtr(-x / SQRT_2)
    if result.ndim == 0:
        return float(result)
    return result


def gauss_hermite(order: int) -> QuadratureRule:
    """
    Gauss-Hermite rule of the given order (weight function exp(-t^2)).

    Parameters:
    -----------
    order : int
        Number of nodes, between 1 and 128. The rule integrates polynomials
        up to degree 2 * order - 1 exactly.

    Returns:
    --------
    QuadratureRule
        Cached, immutable rule.

    Raises:
    -------
    QuadratureOrderError
        If order is outside 1..128.
    """
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)) or not 1 <= order <= MAX_QUAD_ORDER:
        raise QuadratureOrderError(order)
    return _cached_gauss_hermite(int(order))


@lru_cache(maxsize=None)
def _cached_gauss_hermite(order: int) -> QuadratureRule:
    logger.debug("Computing Gauss-Hermite rule of order %d", order)
    nodes, weights = hermgauss(order)
    # hermgauss returns a symmetric rule; force exact symmetry
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    return QuadratureRule(nodes=tuple(float(v) for v in nodes), weights=tuple(float(v) for v in weights))
