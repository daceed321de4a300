import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd
from pydantic import BaseModel, ConfigDict

from pairedprobit.config import (
    DEFAULT_GRADIENT_TOL,
    DEFAULT_MAX_ITER,
    DEFAULT_QUAD_ORDER,
    DEFAULT_WORKERS,
    FLOAT_FORMAT,
    FitOptions,
    SimulationOptions,
)
from pairedprobit.data_io import BUILTIN_DATASETS, emit_dataset, load_builtin, parse_dataset
from pairedprobit.estimators import UnpairedSample, fit_cml_logit, fit_conditional_mle, fit_heckman_ml, ipw_ate, naive_ate
from pairedprobit.exceptions import NumericalError, UsageError
from pairedprobit.inference import TauDistribution, asymptotic_variance, treatment_odds, wald_test
from pairedprobit.model import Dataset
from pairedprobit.simulation import emit_table, load_scenario_file, parse_table, run_preset, run_replications
from pairedprobit.utils.enums import CensoringConvention, Dichotomization, Method, OutputFormat

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
PRESETS = ("table1", "table2", "table3", "table4", "table5", "table6")


class EstimateReport(BaseModel):
    """Flat result record printed by `estimate`; theta_hat is ordered (beta_1..beta_k, lambda)."""
    model_config = ConfigDict(frozen=True)

    method: Method
    theta_hat: tuple[float, ...]
    se: Optional[tuple[float, ...]] = None
    k_n: float
    loglik: Optional[float] = None
    converged: bool
    warnings: tuple[str, ...] = ()
    sigma2: Optional[float] = None
    lambda_var: Optional[float] = None
    ate: Optional[float] = None
    observed_se: Optional[tuple[float, ...]] = None
    wald_z: Optional[float] = None
    wald_p: Optional[float] = None
    odds: Optional[float] = None


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> CliParser:
    parser = CliParser(prog="pairedprobit", description="Treatment effects for matched-pairs probit data.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG logging")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    estimate = commands.add_parser("estimate", help="fit one estimator to a dataset")
    estimate.add_argument("--data", "--input", dest="data", required=True,
                          help=f"pair CSV path or a builtin dataset ({', '.join(BUILTIN_DATASETS)})")
    estimate.add_argument("--method", choices=[m.value for m in Method], default=Method.CONDITIONAL.value)
    estimate.add_argument("--se", action="store_true", help="plug-in standard errors and a Wald test for lambda")
    estimate.add_argument("--odds-tau", help="group-effect law for the odds ratio, e.g. normal:0,0.1257, "
                                             "or 'heckman' for N(0, sigma2_hat) of the random-effects fit")
    estimate.add_argument("--quad-order", type=int, default=DEFAULT_QUAD_ORDER)
    estimate.add_argument("--tol", type=float, default=DEFAULT_GRADIENT_TOL)
    estimate.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    estimate.add_argument("--threshold", type=float, help="dichotomization threshold of a builtin dataset")
    estimate.add_argument("--rule", choices=[r.value for r in Dichotomization], default=Dichotomization.INCLUSIVE.value)
    estimate.add_argument("--censoring", choices=[c.value for c in CensoringConvention],
                          default=CensoringConvention.FACE_VALUE.value)
    output = estimate.add_mutually_exclusive_group()
    output.add_argument("--json", dest="output", action="store_const", const=OutputFormat.JSON, default=OutputFormat.JSON)
    output.add_argument("--csv", dest="output", action="store_const", const=OutputFormat.CSV)
    estimate.set_defaults(output=OutputFormat.JSON)

    simulate = commands.add_parser("simulate", help="Monte-Carlo BIAS/SE/RMSE table")
    source = simulate.add_mutually_exclusive_group(required=True)
    source.add_argument("--preset", choices=PRESETS)
    source.add_argument("--scenario", type=Path, help="flat key = value scenario file")
    simulate.add_argument("--reps", type=int)
    simulate.add_argument("--seed", type=int)
    simulate.add_argument("--workers", type=int, default=DEFAULT_WORKERS)
    simulate.add_argument("--out", type=Path)
    simulate.add_argument("--format", choices=[OutputFormat.CSV.value, OutputFormat.MARKDOWN.value],
                          default=OutputFormat.CSV.value)

    table = commands.add_parser("table", help="re-render a summary CSV")
    table.add_argument("path", type=Path)
    table.add_argument("--format", choices=[OutputFormat.CSV.value, OutputFormat.MARKDOWN.value],
                       default=OutputFormat.MARKDOWN.value)

    data = commands.add_parser("data", help="export a builtin dataset as pair CSV")
    data.add_argument("name", choices=BUILTIN_DATASETS)
    data.add_argument("--threshold", type=float)
    data.add_argument("--rule", choices=[r.value for r in Dichotomization], default=Dichotomization.INCLUSIVE.value)
    data.add_argument("--censoring", choices=[c.value for c in CensoringConvention],
                      default=CensoringConvention.FACE_VALUE.value)
    data.add_argument("--out", type=Path)
    return parser


def _load_data(args) -> Dataset:
    if args.data not in BUILTIN_DATASETS:
        return parse_dataset(args.data)
    kwargs = {"rule": args.rule}
    if args.threshold is not None:
        kwargs["threshold"] = args.threshold
    if args.data == "leukaemia":
        kwargs["censoring"] = args.censoring
    return load_builtin(args.data, **kwargs)


def _write(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")
        logger.info("Wrote %s", out)


def _odds(args, data: Dataset, lam: float, options: FitOptions) -> Optional[float]:
    if args.odds_tau is None:
        return None
    if args.odds_tau == "heckman":
        tau = TauDistribution.normal(0.0, fit_heckman_ml(data, options).sigma2_hat)
    else:
        tau = TauDistribution.parse(args.odds_tau)
    return treatment_odds(lam, tau, options.quad_order)


def _estimate_report(args, data: Dataset, options: FitOptions) -> EstimateReport:
    method = Method(args.method)
    if method in (Method.CONDITIONAL, Method.CML):
        fit = fit_conditional_mle if method is Method.CONDITIONAL else fit_cml_logit
        result = fit(data, options)
        extra = {}
        if args.se and method is Method.CONDITIONAL:
            inference = asymptotic_variance(result.theta_hat, data)
            result = result.with_se(inference.se)
            z, p_value = wald_test(result, inference)
            extra = {"observed_se": inference.observed_se, "wald_z": z, "wald_p": p_value}
        return EstimateReport(
            method=method, theta_hat=tuple(result.theta_hat.to_vector()), se=result.se, k_n=result.k_n,
            loglik=result.loglik, converged=result.converged, warnings=result.warnings,
            odds=_odds(args, data, result.theta_hat.lam, options), **extra,
        )
    if method is Method.HECKMAN:
        result = fit_heckman_ml(data, options)
        return EstimateReport(
            method=method, theta_hat=result.beta_hat + (result.lambda_hat,), k_n=data.k_n, loglik=result.loglik,
            converged=result.converged, sigma2=result.sigma2_hat, lambda_var=result.lambda_variance,
            odds=_odds(args, data, result.lambda_hat, options),
        )
    if method is Method.IPW:
        ate = ipw_ate(UnpairedSample.from_dataset(data), options)
    else:
        ate = naive_ate(data)
    return EstimateReport(method=method, theta_hat=(), k_n=data.k_n, converged=True, ate=ate)


def _render_report(report: EstimateReport, output_format: OutputFormat) -> str:
    if output_format is OutputFormat.JSON:
        return report.model_dump_json() + "\n"
    record = {}
    for key, value in report.model_dump(mode="json").items():
        if key == "warnings":
            value = ";".join(value)
        elif isinstance(value, list):
            value = ";".join(FLOAT_FORMAT % v for v in value)
        record[key] = value
    return pd.DataFrame([record]).to_csv(index=False, lineterminator="\n", float_format=FLOAT_FORMAT)


def run_estimate(args) -> int:
    options = FitOptions(gradient_tol=args.tol, max_iter=args.max_iter, quad_order=args.quad_order)
    data = _load_data(args)
    report = _estimate_report(args, data, options)
    _write(_render_report(report, args.output), None)
    if not report.converged:
        logger.error("%s fit did not converge", report.method)
        return EXIT_NUMERICAL
    return EXIT_OK


def run_simulate(args) -> int:
    if args.preset is not None:
        options = SimulationOptions(replications=args.reps or 100, seed=1 if args.seed is None else args.seed,
                                    workers=args.workers)
        summary = run_preset(args.preset, options)
    else:
        scenario_file = load_scenario_file(args.scenario)
        replications = args.reps or scenario_file.replications or 100
        seed = args.seed if args.seed is not None else (scenario_file.seed if scenario_file.seed is not None else 1)
        options = SimulationOptions(replications=replications, seed=seed, workers=args.workers)
        summary = run_replications(scenario_file.scenario, scenario_file.estimators, replications, seed, options)
    _write(emit_table(summary, args.format), args.out)
    return EXIT_OK


def run_table(args) -> int:
    summary = parse_table(args.path.read_text(encoding="utf-8"))
    _write(emit_table(summary, args.format), None)
    return EXIT_OK


def run_data(args) -> int:
    kwargs = {"rule": args.rule}
    if args.threshold is not None:
        kwargs["threshold"] = args.threshold
    if args.name == "leukaemia":
        kwargs["censoring"] = args.censoring
    _write(emit_dataset(load_builtin(args.name, **kwargs)), args.out)
    return EXIT_OK


COMMANDS = {"estimate": run_estimate, "simulate": run_simulate, "table": run_table, "data": run_data}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Command-line entry point.

    Returns 0 on success, 1 on a usage error (bad flag, bad file, bad
    scenario) and 2 on a numerical failure (no discordant pairs,
    non-convergence, singular Sigma, degenerate propensity model).
    """
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except NumericalError as error:
        print(f"pairedprobit: numerical failure: {error.message}", file=sys.stderr)
        return EXIT_NUMERICAL
    except UsageError as error:
        print(f"pairedprobit: error: {error.message}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as error:
        print(f"pairedprobit: error: {error}", file=sys.stderr)
        return EXIT_USAGE

