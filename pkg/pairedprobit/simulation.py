import asyncio
import io
import logging
import math
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from pairedprobit.config import FLOAT_FORMAT, RNG_ALGORITHM, FitOptions, SimulationOptions
from pairedprobit.estimators import (
    UnpairedSample,
    fit_cml_logit,
    fit_conditional_mle,
    fit_heckman_ml,
    ipw_ate,
    naive_ate,
)
from pairedprobit.exceptions import (
    AllReplicationsFailedError,
    InvalidScenarioError,
    NumericalError,
    PairedProbitError,
)
from pairedprobit.inference import TauDistribution
from pairedprobit.model import Dataset
from pairedprobit.utils.enums import CovariateLaw, Method, OutputFormat, TreatmentLaw

logger = logging.getLogger(__name__)

# the simulation study writes N(0, pi^2 / 3) with pi = 3.14
LOGISTIC_VARIANCE = 3.14 ** 2 / 3
TABLE_COLUMNS = ("scenario", "lambda", "estimator", "BIAS", "SE", "RMSE", "R", "failures")

# an estimator adapter maps (data, scenario, options) to {label: (estimate, true value)}
EstimatorFn = Callable[[Dataset, "Scenario", FitOptions], dict[str, tuple[float, float]]]


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = ""
    tau: TauDistribution
    lam: float
    beta: tuple[float, ...] = ()
    n: int = Field(ge=1)
    covariate_law: CovariateLaw = CovariateLaw.NONE
    treatment_law: TreatmentLaw = TreatmentLaw.BERNOULLI
    treatment_p: float = Field(2 / 3, gt=0, lt=1)

    @model_validator(mode="after")
    def check_laws(self):
        if self.covariate_law is CovariateLaw.NONE and self.beta:
            raise InvalidScenarioError("covariate_law 'none' requires an empty beta")
        if self.covariate_law is not CovariateLaw.NONE and not self.beta:
            raise InvalidScenarioError(f"covariate_law '{self.covariate_law}' requires beta")
        if self.treatment_law is TreatmentLaw.PROPENSITY_LOGISTIC and self.covariate_law is not CovariateLaw.IPW_DESIGN:
            raise InvalidScenarioError("treatment_law 'propensity_logistic' requires covariate_law 'ipw_design'")
        if self.covariate_law is CovariateLaw.IPW_DESIGN and len(self.beta) != 1:
            raise InvalidScenarioError("covariate_law 'ipw_design' has exactly one covariate")
        return self

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        text = f"{self.tau.label()} n={self.n}"
        if self.beta:
            text += " beta=" + ",".join(f"{b:g}" for b in self.beta)
        return text


class SummaryRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    scenario: str
    lam: float
    estimator: str
    bias: float
    se: float
    rmse: float
    replications: int
    failures: int


class SimulationSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    rows: tuple[SummaryRow, ...]

    def row(self, estimator: str, scenario: Optional[str] = None) -> SummaryRow:
        for candidate in self.rows:
            if candidate.estimator == estimator and (scenario is None or candidate.scenario == scenario):
                return candidate
        raise KeyError(f"no row for estimator '{estimator}'")

    def __add__(self, other: "SimulationSummary") -> "SimulationSummary":
        return SimulationSummary(rows=self.rows + other.rows)


def replication_rng(seed: int, index: int, algorithm: str = RNG_ALGORITHM) -> np.random.Generator:
    """Independent stream for replication `index`, a pure function of (seed, index)."""
    bit_generator = getattr(np.random, algorithm)
    return np.random.Generator(bit_generator(np.random.SeedSequence([seed, index])))


def generate_pairs(scenario: Scenario, rng: np.random.Generator) -> Dataset:
    """
    Draw scenario.n matched pairs from the latent-index probit model.

    The pair effect tau is shared by both members, the idiosyncratic errors
    are independent standard normal. Under the Bernoulli law A is treated
    with probability treatment_p; under the propensity law
    d = I(0.75 x_a + 0.25 x_b + e > 0) with e standard logistic.
    """
    n, k = scenario.n, len(scenario.beta)
    beta = np.asarray(scenario.beta, dtype=float)
    if scenario.covariate_law is CovariateLaw.STANDARD:
        x_a = rng.standard_normal((n, k))
        x_b = x_a + rng.standard_normal((n, k))
    elif scenario.covariate_law is CovariateLaw.IPW_DESIGN:
        x_a = rng.standard_normal((n, 1))
        x_b = rng.uniform(-1.0, 1.0, (n, 1))
    else:
        x_a = x_b = np.zeros((n, 0))

    if scenario.treatment_law is TreatmentLaw.PROPENSITY_LOGISTIC:
        d = (0.75 * x_a[:, 0] + 0.25 * x_b[:, 0] + rng.logistic(size=n) > 0).astype(int)
    else:
        d = (rng.random(n) < scenario.treatment_p).astype(int)

    tau = scenario.tau.sample(rng, n)
    eps_a = rng.standard_normal(n)
    eps_b = rng.standard_normal(n)
    y_a = (x_a @ beta + tau + scenario.lam * d + eps_a > 0).astype(int)
    y_b = (x_b @ beta + tau + scenario.lam * (1 - d) + eps_b > 0).astype(int)
    return Dataset.from_arrays(y_a, y_b, d, x_a, x_b)


def _conditional(data, scenario, options):
    result = fit_conditional_mle(data, options)
    if not result.converged:
        raise NumericalError("conditional fit did not converge")
    values = {"conditional": (result.theta_hat.lam, scenario.lam)}
    for j, (estimate, truth) in enumerate(zip(result.theta_hat.beta, scenario.beta), start=1):
        values[f"conditional[beta_{j}]"] = (estimate, truth)
    return values


def _heckman(data, scenario, options):
    result = fit_heckman_ml(data, options)
    if not result.converged:
        raise NumericalError("Heckman fit did not converge")
    values = {"heckman": (result.lambda_hat, scenario.lam)}
    for j, (estimate, truth) in enumerate(zip(result.beta_hat, scenario.beta), start=1):
        values[f"heckman[beta_{j}]"] = (estimate, truth)
    sigma = scenario.tau.std()
    if math.isfinite(sigma):
        values["heckman[sigma]"] = (result.sigma_hat, sigma)
    return values


def _cml(data, scenario, options):
    result = fit_cml_logit(data, options)
    if not result.converged:
        raise NumericalError("conditional logit fit did not converge")
    return {"cml": (result.theta_hat.lam, scenario.lam)}


def _ipw(data, scenario, options):
    return {"ipw": (ipw_ate(UnpairedSample.from_dataset(data), options), scenario.lam)}


def _naive(data, scenario, options):
    return {"naive": (naive_ate(data), scenario.lam)}


ESTIMATORS: dict[Method, EstimatorFn] = {
    Method.CONDITIONAL: _conditional,
    Method.HECKMAN: _heckman,
    Method.CML: _cml,
    Method.IPW: _ipw,
    Method.NAIVE: _naive,
}


def resolve_estimators(estimators: Union[Iterable[Union[Method, str]], Mapping[str, EstimatorFn]]) -> dict[str, EstimatorFn]:
    if isinstance(estimators, Mapping):
        return dict(estimators)
    resolved = {}
    for name in estimators:
        method = Method(str(name))
        resolved[method.value] = ESTIMATORS[method]
    if not resolved:
        raise InvalidScenarioError("at least one estimator is required")
    return resolved


def _replicate(scenario: Scenario, estimators: dict[str, EstimatorFn], seed: int, index: int,
               options: FitOptions, algorithm: str) -> dict[str, Optional[dict[str, tuple[float, float]]]]:
    data = generate_pairs(scenario, replication_rng(seed, index, algorithm))
    outcome = {}
    for name, estimator in estimators.items():
        try:
            outcome[name] = estimator(data, scenario, options)
        except (PairedProbitError, np.linalg.LinAlgError) as error:
            logger.debug("Replication %d, %s failed: %s", index, name, error)
            outcome[name] = None
    return outcome


def _moments(errors: np.ndarray) -> tuple[float, float, float]:
    bias = float(np.mean(errors))
    se = float(np.std(errors, ddof=1)) if errors.size > 1 else 0.0
    rmse = float(np.sqrt(np.mean(errors * errors)))
    return bias, se, rmse


def summarize(scenario: Scenario, outcomes: list[dict], estimator_names: Iterable[str]) -> list[SummaryRow]:
    """Fold replication outcomes, in replication order, into BIAS/SE/RMSE rows."""
    rows = []
    for name in estimator_names:
        failures = sum(1 for outcome in outcomes if outcome[name] is None)
        labels: dict[str, list[float]] = {}
        for outcome in outcomes:
            for label, (estimate, truth) in (outcome[name] or {}).items():
                labels.setdefault(label, []).append(estimate - truth)
        if failures:
            logger.warning("%s: %d of %d replications of %s failed and were excluded",
                           scenario.label, failures, len(outcomes), name)
        if not labels:
            rows.append(SummaryRow(scenario=scenario.label, lam=scenario.lam, estimator=name, bias=math.nan,
                                   se=math.nan, rmse=math.nan, replications=0, failures=failures))
        for label, errors in labels.items():
            bias, se, rmse = _moments(np.asarray(errors))
            rows.append(SummaryRow(scenario=scenario.label, lam=scenario.lam, estimator=label, bias=bias,
                                   se=se, rmse=rmse, replications=len(errors), failures=failures))
    return rows


async def async_run_replications(
    scenario: Scenario,
    estimators,
    replications: int = 100,
    seed: int = 1,
    options: Optional[SimulationOptions] = None,
) -> SimulationSummary:
    if replications < 2:
        raise InvalidScenarioError("at least two replications are required")
    options = options or SimulationOptions(replications=replications, seed=seed)
    resolved = resolve_estimators(estimators)
    fit_options = options.fit_options()
    semaphore = asyncio.Semaphore(options.workers)

    async def run_one(index: int):
        async with semaphore:
            return await asyncio.to_thread(_replicate, scenario, resolved, seed, index, fit_options,
                                           options.rng_algorithm)

    outcomes = await asyncio.gather(*[run_one(index) for index in range(replications)])
    if all(outcome[name] is None for outcome in outcomes for name in resolved):
        raise AllReplicationsFailedError(replications)
    rows = summarize(scenario, list(outcomes), resolved)
    logger.info("%s: %d replications done", scenario.label, replications)
    return SimulationSummary(rows=tuple(rows))


def run_replications(
    scenario: Scenario,
    estimators,
    replications: int = 100,
    seed: int = 1,
    options: Optional[SimulationOptions] = None,
) -> SimulationSummary:
    """
    Monte-Carlo BIAS, SE and RMSE of every requested estimator.

    Parameters:
    -----------
    scenario : Scenario
        Data-generating process.
    estimators : iterable of Method names, or a mapping label -> adapter
        Adapters take (data, scenario, fit options) and return
        {label: (estimate, true value)}.
    replications : int
        Number of datasets, at least 2.
    seed : int
        Replication i draws from a stream seeded by (seed, i), so the
        summary does not depend on the number of workers.

    Returns:
    --------
    SimulationSummary
        One row per estimate label. Failed or non-converged fits are counted
        in failures and excluded from the moments.
    """
    return asyncio.run(async_run_replications(scenario, estimators, replications, seed, options))


def emit_table(summary: SimulationSummary, output_format: Union[OutputFormat, str] = OutputFormat.CSV) -> str:
    if not summary.rows:
        raise ValueError("cannot render an empty summary")
    output_format = OutputFormat(str(output_format))
    frame = pd.DataFrame(
        [(r.scenario, r.lam, r.estimator, r.bias, r.se, r.rmse, r.replications, r.failures) for r in summary.rows],
        columns=list(TABLE_COLUMNS),
    )
    if output_format is OutputFormat.CSV:
        return frame.to_csv(index=False, lineterminator="\n", float_format=FLOAT_FORMAT, na_rep="nan")
    if output_format is OutputFormat.MARKDOWN:
        lines = ["| " + " | ".join(TABLE_COLUMNS) + " |", "|" + "---|" * len(TABLE_COLUMNS)]
        for r in summary.rows:
            lines.append(f"| {r.scenario} | {r.lam:g} | {r.estimator} | {r.bias:.3f} | {r.se:.3f} | "
                         f"{r.rmse:.3f} | {r.replications} | {r.failures} |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"tables are rendered as csv or markdown, not {output_format}")


def parse_table(text: str) -> SimulationSummary:
    frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
    if tuple(frame.columns) != TABLE_COLUMNS:
        raise ValueError(f"summary table header must be {','.join(TABLE_COLUMNS)}")
    rows = tuple(
        SummaryRow(scenario=scenario, lam=float(lam), estimator=estimator, bias=float(bias), se=float(se),
                   rmse=float(rmse), replications=int(reps), failures=int(failures))
        for scenario, lam, estimator, bias, se, rmse, reps, failures in frame.itertuples(index=False, name=None)
    )
    return SimulationSummary(rows=rows)


class Preset(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    scenarios: tuple[Scenario, ...]
    estimators: tuple[Method, ...]


LAMBDA_GRID = (1.0, 0.5, 0.0, -0.5, -1.0)


def _grid(taus, sizes, lambdas, **extra) -> tuple[Scenario, ...]:
    return tuple(Scenario(tau=tau, lam=lam, n=n, **extra) for n, tau in ((n, t) for n in sizes for t in taus)
                 for lam in lambdas)


def _table1() -> tuple[Scenario, ...]:
    lambdas = (2.0, 1.5, 1.0, 0.5, 0.0, -0.5, -1.0, -1.5, -2.0)
    small = (TauDistribution.uniform(-4, 4), TauDistribution.normal(0, 4), TauDistribution.student_t(1))
    large = (TauDistribution.uniform(-10, 10), TauDistribution.normal(0, 25), TauDistribution.student_t(1))
    return _grid(small, (1000,), lambdas) + _grid(large, (5000,), lambdas)


def _table3() -> tuple[Scenario, ...]:
    grid = ((1, 1), (0.5, 0.5), (0, 0), (-0.5, -0.5), (-1, -1), (1, -1), (0.5, -0.5), (-0.5, 0.5), (-1, 1),
            (0, 1), (0, 0.5), (0, -0.5), (0, -1), (1, 0), (0.5, 0), (-0.5, 0), (-1, 0))
    tau = TauDistribution.normal(0, LOGISTIC_VARIANCE)
    return tuple(Scenario(name=f"{tau.label()} n=1000 beta={beta:g}", tau=tau, lam=lam, beta=(beta,), n=1000,
                          covariate_law=CovariateLaw.STANDARD) for lam, beta in grid)


def preset(name: str) -> Preset:
    """Scenario grids of the simulation study: table1 .. table6."""
    logistic = TauDistribution.normal(0, LOGISTIC_VARIANCE)
    if name == "table1":
        return Preset(name=name, scenarios=_table1(), estimators=(Method.CONDITIONAL,))
    if name == "table2":
        return Preset(name=name, scenarios=_grid((logistic,), (200, 500, 1000, 2000, 3000, 5000), LAMBDA_GRID),
                      estimators=(Method.CONDITIONAL,))
    if name == "table3":
        return Preset(name=name, scenarios=_table3(), estimators=(Method.CONDITIONAL,))
    if name == "table4":
        taus = (TauDistribution.normal(0, 1), TauDistribution.normal(0, 4),
                TauDistribution.mixture(0.5, -6, 9, 6, 9), TauDistribution.mixture(0.5, -6, 3, 6, 3),
                TauDistribution.mixture(0.5, -6, 3, 6, 9))
        return Preset(name=name, scenarios=_grid(taus, (1000,), LAMBDA_GRID),
                      estimators=(Method.CONDITIONAL, Method.HECKMAN))
    if name == "table5":
        taus = (TauDistribution.normal(0, 1), logistic, TauDistribution.normal(0, 6),
                TauDistribution.mixture(0.5, -4, 6, 4, 6))
        return Preset(name=name, scenarios=_grid(taus, (500,), LAMBDA_GRID), estimators=(Method.CONDITIONAL, Method.CML))
    if name == "table6":
        return Preset(name=name, scenarios=_grid((logistic,), (1000,), LAMBDA_GRID, beta=(1.0,),
                                                 covariate_law=CovariateLaw.IPW_DESIGN,
                                                 treatment_law=TreatmentLaw.PROPENSITY_LOGISTIC),
                      estimators=(Method.CONDITIONAL, Method.IPW, Method.HECKMAN))
    raise InvalidScenarioError(f"unknown preset '{name}'; choose table1 .. table6")


async def async_run_preset(name: str, options: SimulationOptions) -> SimulationSummary:
    chosen = preset(name)
    summary = SimulationSummary(rows=())
    for scenario in chosen.scenarios:
        summary = summary + await async_run_replications(scenario, chosen.estimators, options.replications,
                                                         options.seed, options)
    return summary


def run_preset(name: str, options: Optional[SimulationOptions] = None) -> SimulationSummary:
    return asyncio.run(async_run_preset(name, options or SimulationOptions()))


class ScenarioFile(BaseModel):
    model_config = ConfigDict(frozen=True)

    scenario: Scenario
    estimators: tuple[Method, ...] = (Method.CONDITIONAL,)
    replications: Optional[int] = None
    seed: Optional[int] = None


def parse_scenario_text(text: str) -> ScenarioFile:
    """
    Parse a flat `key = value` scenario description.

    Keys: name, tau (e.g. normal:0,4), lambda, beta (comma list), n,
    covariates, treatment, treatment_p, estimators (comma list), reps, seed.
    Blank lines and lines starting with # are ignored.
    """
    entries: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InvalidScenarioError(f"line {number}: expected 'key = value', got '{raw}'")
        entries[key.strip().lower()] = value.strip()

    known = {"name", "tau", "lambda", "beta", "n", "covariates", "treatment", "treatment_p", "estimators",
             "reps", "seed"}
    unknown = set(entries) - known
    if unknown:
        raise InvalidScenarioError(f"unknown scenario keys: {', '.join(sorted(unknown))}")
    try:
        scenario = Scenario(
            name=entries.get("name", ""),
            tau=TauDistribution.parse(entries["tau"]),
            lam=float(entries["lambda"]),
            beta=tuple(float(v) for v in entries.get("beta", "").split(",") if v.strip()),
            n=int(entries["n"]),
            covariate_law=CovariateLaw(entries.get("covariates", "none")),
            treatment_law=TreatmentLaw(entries.get("treatment", "bernoulli")),
            treatment_p=float(entries.get("treatment_p", 2 / 3)),
        )
        estimators = tuple(Method(v.strip()) for v in entries.get("estimators", "conditional").split(","))
    except KeyError as error:
        raise InvalidScenarioError(f"missing scenario key {error}") from None
    except ValueError as error:
        raise InvalidScenarioError(str(error)) from None
    return ScenarioFile(
        scenario=scenario,
        estimators=estimators,
        replications=int(entries["reps"]) if "reps" in entries else None,
        seed=int(entries["seed"]) if "seed" in entries else None,
    )


def load_scenario_file(path: Union[str, Path]) -> ScenarioFile:
    return parse_scenario_text(Path(path).read_text(encoding="utf-8"))
