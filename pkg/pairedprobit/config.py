from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from pairedprobit.exceptions import QuadratureOrderError

DEFAULT_GRADIENT_TOL = 1e-8
DEFAULT_STEP_TOL = 1e-12
DEFAULT_MAX_ITER = 200
DEFAULT_QUAD_ORDER = 40
MAX_QUAD_ORDER = 128
DEFAULT_PROPENSITY_BOUNDS = (0.01, 0.99)
SEPARATION_BOUND = 50.0
RANK_TOL = 1e-8
SIGMA_RANK_TOL = 1e-10
LP_TOL = 1e-9
# Phi is clamped to [PROB_FLOOR, 1 - PROB_CEIL_GAP] inside log-likelihoods
PROB_FLOOR = 1e-300
PROB_CEIL_GAP = 1e-16
RNG_ALGORITHM = "PCG64"
DEFAULT_WORKERS = 4
# printf format that round-trips every float64 through text
FLOAT_FORMAT = "%.17g"


class FitOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    gradient_tol: float = Field(DEFAULT_GRADIENT_TOL, gt=0)
    step_tol: float = Field(DEFAULT_STEP_TOL, gt=0)
    max_iter: int = Field(DEFAULT_MAX_ITER, ge=1)
    quad_order: int = DEFAULT_QUAD_ORDER
    propensity_bounds: tuple[float, float] = DEFAULT_PROPENSITY_BOUNDS
    separation_bound: float = Field(SEPARATION_BOUND, gt=0)
    check_identifiability: bool = True

    @field_validator("quad_order")
    @classmethod
    def validate_quad_order(cls, order: int) -> int:
        if not 1 <= order <= MAX_QUAD_ORDER:
            raise QuadratureOrderError(order)
        return order

    @field_validator("propensity_bounds")
    @classmethod
    def validate_propensity_bounds(cls, bounds: tuple[float, float]) -> tuple[float, float]:
        low, high = bounds
        if not 0.0 < low < high < 1.0:
            raise ValueError(f"propensity bounds must satisfy 0 < low < high < 1, got {bounds}")
        return bounds


class SimulationOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    replications: int = Field(100, ge=2)
    seed: int = Field(1, ge=0)
    workers: int = Field(DEFAULT_WORKERS, ge=1)
    rng_algorithm: str = RNG_ALGORITHM
    fit: Optional[FitOptions] = None

    def fit_options(self) -> FitOptions:
        # the identifiability LP is skipped in Monte-Carlo runs
        return self.fit or FitOptions(check_identifiability=False)
