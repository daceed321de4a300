import logging
from typing import Callable, NamedTuple

import numpy as np

logger = logging.getLogger(__name__)

# central differences of an analytic gradient: step ~ cbrt(machine epsilon)
HESSIAN_STEP = float(np.cbrt(np.finfo(float).eps))
MAX_BACKTRACKS = 60
# relative gradient bound accepted once the line search can no longer ascend
STALL_GRADIENT_RTOL = 1e-6


class AscentOutcome(NamedTuple):
    x: np.ndarray
    value: float
    gradient: np.ndarray
    iterations: int
    converged: bool


def numerical_hessian(grad: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = HESSIAN_STEP) -> np.ndarray:
    """Symmetrized central-difference Jacobian of an analytic gradient."""
    size = x.size
    hessian = np.zeros((size, size))
    for i in range(size):
        step = np.zeros(size)
        step[i] = h * max(1.0, abs(x[i]))
        hessian[i, :] = (grad(x + step) - grad(x - step)) / (2.0 * step[i])
    return 0.5 * (hessian + hessian.T)


def _stalled_at_optimum(gradient: np.ndarray, value: float, gradient_tol: float) -> bool:
    size = np.max(np.abs(gradient), initial=0.0)
    return bool(size <= max(gradient_tol, STALL_GRADIENT_RTOL * (1.0 + abs(value))))


def _newton_direction(hessian: np.ndarray, gradient: np.ndarray):
    # Newton is used only where the objective is locally concave
    try:
        factor = np.linalg.cholesky(-hessian)
    except np.linalg.LinAlgError:
        return None
    return np.linalg.solve(factor.T, np.linalg.solve(factor, gradient))


def maximize(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0,
    gradient_tol: float,
    step_tol: float,
    max_iter: int,
) -> AscentOutcome:
    """
    Damped Newton ascent with an analytic gradient.

    The Hessian is a finite-difference Jacobian of grad. When it is not
    negative definite the iteration falls back to steepest ascent. Every
    step is halved until the objective increases.

    Stops when the gradient max-norm is below gradient_tol, when the
    accepted step is shorter than step_tol, or after max_iter iterations.
    When the iteration stalls (no ascent step found, or a step shorter
    than step_tol) the fit still counts as converged if the gradient
    max-norm is within STALL_GRADIENT_RTOL * (1 + |f|). Hitting max_iter needs the
    absolute gradient_tol.
    """
    x = np.array(x0, dtype=float)
    value = fun(x)
    gradient = grad(x)
    for iteration in range(1, max_iter + 1):
        if np.max(np.abs(gradient), initial=0.0) <= gradient_tol:
            return AscentOutcome(x, value, gradient, iteration - 1, True)

        direction = _newton_direction(numerical_hessian(grad, x), gradient)
        if direction is None:
            direction = gradient / max(1.0, np.linalg.norm(gradient))
            logger.debug("Iteration %d: Hessian not negative definite, steepest ascent", iteration)

        step = 1.0
        for _ in range(MAX_BACKTRACKS):
            candidate = x + step * direction
            candidate_value = fun(candidate)
            if np.isfinite(candidate_value) and candidate_value >= value:
                break
            step *= 0.5
        else:
            logger.debug("Iteration %d: line search exhausted", iteration)
            converged = _stalled_at_optimum(gradient, value, gradient_tol)
            return AscentOutcome(x, value, gradient, iteration, converged)

        moved = np.max(np.abs(candidate - x))
        x, value = candidate, candidate_value
        gradient = grad(x)
        logger.debug("Iteration %d: value %.12g, |grad| %.3e, step %.3e", iteration, value,
                     np.max(np.abs(gradient), initial=0.0), moved)
        if moved <= step_tol:
            converged = _stalled_at_optimum(gradient, value, gradient_tol)
            return AscentOutcome(x, value, gradient, iteration, converged)

    converged = np.max(np.abs(gradient), initial=0.0) <= gradient_tol
    return AscentOutcome(x, value, gradient, max_iter, bool(converged))
