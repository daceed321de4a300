import logging
import math
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.optimize import linprog

from pairedprobit.config import LP_TOL, PROB_CEIL_GAP, PROB_FLOOR, RANK_TOL
from pairedprobit.exceptions import (
    DimensionMismatchError,
    InconsistentDimensionError,
    NoDiscordantPairsError,
)
from pairedprobit.numerics import SQRT_PI, g_function, g_prime

logger = logging.getLogger(__name__)


class MatchedPair(BaseModel):
    """One matched pair: A receives treatment d, B receives 1 - d."""
    model_config = ConfigDict(frozen=True)

    y_a: int
    y_b: int
    x_a: tuple[float, ...] = ()
    x_b: tuple[float, ...] = ()
    d: int

    @field_validator("y_a", "y_b", "d")
    @classmethod
    def check_binary(cls, value: int) -> int:
        if value not in (0, 1):
            raise ValueError(f"must be 0 or 1, got {value}")
        return value

    @model_validator(mode="after")
    def check_covariates(self):
        if len(self.x_a) != len(self.x_b):
            raise ValueError(f"x_a has {len(self.x_a)} entries but x_b has {len(self.x_b)}")
        if not all(math.isfinite(v) for v in self.x_a + self.x_b):
            raise ValueError("covariates must be finite")
        return self

    @property
    def k(self) -> int:
        return len(self.x_a)

    @property
    def discordant(self) -> bool:
        return self.y_a + self.y_b == 1

    def swapped(self) -> "MatchedPair":
        """The same pair with the A and B labels exchanged."""
        return MatchedPair(y_a=self.y_b, y_b=self.y_a, x_a=self.x_b, x_b=self.x_a, d=1 - self.d)


class PairArrays(NamedTuple):
    y_a: np.ndarray
    y_b: np.ndarray
    d: np.ndarray
    x_a: np.ndarray  # shape (n, k)
    x_b: np.ndarray

    @property
    def discordant(self) -> np.ndarray:
        return (self.y_a + self.y_b) == 1

    @property
    def x_diff(self) -> np.ndarray:
        return self.x_b - self.x_a


def _covariate_matrix(values, n: int) -> np.ndarray:
    if values is None or np.size(values) == 0:
        return np.zeros((n, 0))
    return np.asarray(values, dtype=float).reshape(n, -1)


class Dataset(BaseModel):
    """An ordered sample of matched pairs sharing covariate dimension k."""
    model_config = ConfigDict(frozen=True)

    pairs: tuple[MatchedPair, ...]
    k: int

    @model_validator(mode="before")
    @classmethod
    def infer_k(cls, values):
        if isinstance(values, dict) and "k" not in values and values.get("pairs"):
            first = values["pairs"][0]
            values = dict(values, k=first.k if isinstance(first, MatchedPair) else len(first.get("x_a", ())))
        return values

    @model_validator(mode="after")
    def check_pairs(self):
        if not self.pairs:
            raise ValueError("a dataset needs at least one pair")
        if any(pair.k != self.k for pair in self.pairs):
            raise InconsistentDimensionError()
        return self

    @classmethod
    def from_arrays(cls, y_a, y_b, d, x_a=None, x_b=None) -> "Dataset":
        """Build a dataset from column arrays (covariate arrays of shape (n, k))."""
        y_a = np.asarray(y_a, dtype=int)
        n = y_a.shape[0]
        x_a = _covariate_matrix(x_a, n)
        x_b = _covariate_matrix(x_b, n)
        pairs = tuple(
            MatchedPair(y_a=int(ya), y_b=int(yb), d=int(di), x_a=tuple(xa.tolist()), x_b=tuple(xb.tolist()))
            for ya, yb, di, xa, xb in zip(y_a, np.asarray(y_b, dtype=int), np.asarray(d, dtype=int), x_a, x_b)
        )
        return cls(pairs=pairs, k=x_a.shape[1])

    @cached_property
    def arrays(self) -> PairArrays:
        n = len(self.pairs)
        return PairArrays(
            y_a=np.fromiter((p.y_a for p in self.pairs), dtype=float, count=n),
            y_b=np.fromiter((p.y_b for p in self.pairs), dtype=float, count=n),
            d=np.fromiter((p.d for p in self.pairs), dtype=float, count=n),
            x_a=np.array([p.x_a for p in self.pairs], dtype=float).reshape(n, self.k),
            x_b=np.array([p.x_b for p in self.pairs], dtype=float).reshape(n, self.k),
        )

    @property
    def n(self) -> int:
        return len(self.pairs)

    @property
    def discordant_count(self) -> int:
        return sum(1 for p in self.pairs if p.discordant)

    @property
    def k_n(self) -> float:
        return math.sqrt(self.discordant_count)

    def discordance_tally(self) -> tuple[int, int]:
        """Counts of (1, 0) and (0, 1) outcome pairs."""
        n10 = sum(1 for p in self.pairs if p.y_a == 1 and p.y_b == 0)
        n01 = sum(1 for p in self.pairs if p.y_a == 0 and p.y_b == 1)
        return n10, n01

    def swapped(self) -> "Dataset":
        return Dataset(pairs=tuple(p.swapped() for p in self.pairs), k=self.k)

    def with_pairs(self, extra: Sequence[MatchedPair]) -> "Dataset":
        return Dataset(pairs=self.pairs + tuple(extra), k=self.k)


class Theta(BaseModel):
    """Parameter point (beta, lambda); flattened as [beta..., lambda]."""
    model_config = ConfigDict(frozen=True)

    beta: tuple[float, ...] = ()
    lam: float

    @model_validator(mode="after")
    def check_finite(self):
        if not all(math.isfinite(v) for v in self.beta + (self.lam,)):
            raise ValueError("theta entries must be finite")
        return self

    @property
    def k(self) -> int:
        return len(self.beta)

    def to_vector(self) -> np.ndarray:
        return np.array(self.beta + (self.lam,), dtype=float)

    @classmethod
    def from_vector(cls, vector) -> "Theta":
        vector = np.asarray(vector, dtype=float)
        return cls(beta=tuple(float(v) for v in vector[:-1]), lam=float(vector[-1]))

    @classmethod
    def zeros(cls, k: int) -> "Theta":
        return cls(beta=(0.0,) * k, lam=0.0)


class IdentifiabilityReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    rank_ok: bool
    cone_ok: bool
    discordant_count: int
    details: str = ""

    @property
    def identified(self) -> bool:
        return self.rank_ok and self.cone_ok and self.discordant_count > 0


def check_dimension(theta: Theta, k: int) -> None:
    if theta.k != k:
        raise DimensionMismatchError(expected=k, got=theta.k)


def index_s(theta_vector: np.ndarray, arrays: PairArrays) -> np.ndarray:
    """s_i = lambda * (1 - 2 d_i) + beta' (x_b - x_a) for every pair."""
    beta, lam = theta_vector[:-1], theta_vector[-1]
    return lam * (1.0 - 2.0 * arrays.d) + arrays.x_diff @ beta


def prob_from_s(s):
    """Conditional probability of (1, 0) given discordance, as a function of s."""
    g_s = g_function(s)
    return g_s / (2.0 * g_s + SQRT_PI * np.asarray(s))


def dprob_ds(s):
    s = np.asarray(s, dtype=float)
    g_pos, g_neg = g_function(s), g_function(-s)
    k = g_pos + g_neg
    return (g_prime(s) * g_neg + g_pos * g_prime(-s)) / (k * k)


def pair_s(theta: Theta, pair: MatchedPair) -> float:
    check_dimension(theta, pair.k)
    diff = np.asarray(pair.x_b, dtype=float) - np.asarray(pair.x_a, dtype=float)
    return float(theta.lam * (1 - 2 * pair.d) + np.dot(np.asarray(theta.beta, dtype=float), diff))


def conditional_prob(theta: Theta, pair: MatchedPair) -> float:
    """
    P(Y^A = 1, Y^B = 0 | Y^A + Y^B = 1) for one pair.

    Equals G(s) / (G(s) + G(-s)) with s = lambda (1 - 2d) + beta'(x_b - x_a);
    the pair effect drops out of the ratio.
    """
    s = pair_s(theta, pair)
    g_s, g_neg = g_function(s), g_function(-s)
    return g_s / (g_s + g_neg)


def k_integral(theta: Theta, pair: MatchedPair) -> float:
    """K = G(s) + G(-s), the sum of the two discordant-outcome integrals."""
    s = pair_s(theta, pair)
    return g_function(s) + g_function(-s)


def _discordant_terms(theta_vector: np.ndarray, data: Dataset):
    arrays = data.arrays
    mask = arrays.discordant
    if not mask.any():
        raise NoDiscordantPairsError()
    s = index_s(theta_vector, arrays)[mask]
    p = np.clip(prob_from_s(s), PROB_FLOOR, 1.0 - PROB_CEIL_GAP)
    return arrays, mask, s, p


def loglik_vector(theta_vector: np.ndarray, data: Dataset) -> float:
    arrays, mask, _, p = _discordant_terms(theta_vector, data)
    return float(np.sum(arrays.y_a[mask] * np.log(p) + arrays.y_b[mask] * np.log1p(-p)))


def grad_vector(theta_vector: np.ndarray, data: Dataset) -> np.ndarray:
    arrays, mask, s, p = _discordant_terms(theta_vector, data)
    score_s = (arrays.y_a[mask] - p) / (p * (1.0 - p)) * dprob_ds(s)
    design = np.column_stack([arrays.x_diff[mask], 1.0 - 2.0 * arrays.d[mask]])
    return design.T @ score_s


def conditional_loglik(theta: Theta, data: Dataset) -> float:
    """
    Log of the conditional likelihood of the discordant outcomes.

    Parameters:
    -----------
    theta : Theta
        Parameter point; its beta must have length data.k.
    data : Dataset
        Matched pairs. Concordant pairs contribute exactly zero.

    Returns:
    --------
    float
        Sum over discordant pairs of y_a log p_i + y_b log(1 - p_i).

    Raises:
    -------
    NoDiscordantPairsError
        If no pair is discordant.
    DimensionMismatchError
        If theta and data disagree on k.
    """
    check_dimension(theta, data.k)
    return loglik_vector(theta.to_vector(), data)


def conditional_loglik_grad(theta: Theta, data: Dataset) -> np.ndarray:
    """Analytic gradient of conditional_loglik, ordered [beta..., lambda]."""
    check_dimension(theta, data.k)
    return grad_vector(theta.to_vector(), data)


def _cone_contains(target: np.ndarray, generators: np.ndarray) -> bool:
    """True when target = sum c_i g_i has a solution with every c_i <= 0."""
    if not np.any(np.abs(target) > LP_TOL):
        return True
    if generators.shape[0] == 0:
        return False
    result = linprog(
        c=np.zeros(generators.shape[0]),
        A_eq=generators.T,
        b_eq=target,
        bounds=[(None, 0.0)] * generators.shape[0],
        method="highs",
        options={"primal_feasibility_tolerance": LP_TOL},
    )
    return result.status == 0


def _cone_condition(diffs: np.ndarray, group: np.ndarray) -> bool:
    members = np.flatnonzero(group)
    for j in members:
        others = diffs[members[members != j]]
        if _cone_contains(diffs[j], others):
            return True
    return False


def check_identifiability(data: Dataset) -> IdentifiabilityReport:
    """
    Advisory check of the rank and cone conditions for a unique maximizer.

    The rank condition asks the discordant covariate differences to span
    R^k. The cone condition asks for a pair j whose difference equals a
    non-positive combination of the other differences in the same
    treatment arm (d = 0, or alternatively d = 1). Both are vacuous when
    k = 0.
    """
    arrays = data.arrays
    discordant = arrays.discordant
    count = int(discordant.sum())
    if data.k == 0:
        return IdentifiabilityReport(
            rank_ok=count > 0, cone_ok=count > 0, discordant_count=count,
            details="no covariates; lambda is identified by any discordant pair",
        )
    diffs = arrays.x_diff
    rows = diffs[discordant]
    if rows.shape[0] == 0:
        rank = 0
    else:
        singular = np.linalg.svd(rows, compute_uv=False)
        rank = int(np.sum(singular >= RANK_TOL * singular[0])) if singular[0] > 0 else 0
    rank_ok = rank == data.k
    control_arm = _cone_condition(diffs, arrays.d == 0)
    cone_ok = control_arm or _cone_condition(diffs, arrays.d == 1)
    details = f"rank {rank} of {data.k}; cone condition {'holds' if cone_ok else 'fails'}"
    if cone_ok:
        details += " (d = 0 arm)" if control_arm else " (d = 1 arm)"
    logger.debug("Identifiability: %s", details)
    return IdentifiabilityReport(rank_ok=rank_ok, cone_ok=cone_ok, discordant_count=count, details=details)
