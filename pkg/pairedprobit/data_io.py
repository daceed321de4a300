import logging
import math
import re
from pathlib import Path
from typing import Union

import pandas as pd
from pandas.errors import EmptyDataError

from pairedprobit.config import FLOAT_FORMAT
from pairedprobit.exceptions import (
    EmptyFileError,
    InconsistentDimensionError,
    MalformedRowError,
    UnknownConventionError,
)
from pairedprobit.model import Dataset, MatchedPair
from pairedprobit.utils.enums import CensoringConvention, Dichotomization
from pairedprobit.utils.study_tables import CONTROL_GROUP, LEAD_LEVELS, LEUKAEMIA_REMISSIONS, TREATED_GROUP

logger = logging.getLogger(__name__)

OUTCOME_COLUMNS = ("y_a", "y_b", "d")
COVARIATE_PATTERN = re.compile(r"^x_([ab])_(\d+)$")
BUILTIN_DATASETS = ("lead", "leukaemia")


def pair_csv_columns(k: int) -> list[str]:
    return list(OUTCOME_COLUMNS) + [f"x_a_{j}" for j in range(1, k + 1)] + [f"x_b_{j}" for j in range(1, k + 1)]


def _infer_k(path, columns: list[str]) -> int:
    missing = [c for c in OUTCOME_COLUMNS if c not in columns]
    if missing:
        raise MalformedRowError(line=1, column=missing[0], reason="required column missing from header")
    indices = {"a": set(), "b": set()}
    for column in columns:
        match = COVARIATE_PATTERN.match(column)
        if match:
            indices[match.group(1)].add(int(match.group(2)))
        elif column not in OUTCOME_COLUMNS:
            raise MalformedRowError(line=1, column=column, reason="unknown column")
    k = len(indices["a"])
    if indices["a"] != indices["b"] or indices["a"] != set(range(1, k + 1)):
        raise InconsistentDimensionError(
            f"'{path}': covariate columns must be x_a_1..x_a_k and x_b_1..x_b_k with the same k"
        )
    return k


def _binary(value: str, line: int, column: str) -> int:
    if value.strip() not in ("0", "1"):
        raise MalformedRowError(line=line, column=column, reason=f"expected 0 or 1, got '{value}'")
    return int(value)


def _finite(value: str, line: int, column: str) -> float:
    try:
        number = float(value)
    except ValueError:
        raise MalformedRowError(line=line, column=column, reason=f"not a number: '{value}'") from None
    if not math.isfinite(number):
        raise MalformedRowError(line=line, column=column, reason=f"not finite: '{value}'")
    return number


def parse_dataset(path: Union[str, Path]) -> Dataset:
    """
    Read a pair CSV file (header y_a, y_b, d, x_a_1..x_a_k, x_b_1..x_b_k).

    Parameters:
    -----------
    path : str | Path
        UTF-8, comma-separated file with a mandatory header row.

    Returns:
    --------
    Dataset
        Pairs in file order; k is inferred from the header.

    Raises:
    -------
    MalformedRowError
        Naming the 1-based line number and the column of the first bad value.
    InconsistentDimensionError
        If the covariate columns do not form two blocks of equal size.
    EmptyFileError
        If the file has no data rows.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except EmptyDataError:
        raise EmptyFileError(path) from None
    columns = [c.strip() for c in frame.columns]
    frame.columns = columns
    k = _infer_k(path, columns)
    if frame.empty:
        raise EmptyFileError(path)

    pairs = []
    for offset, row in enumerate(frame.itertuples(index=False, name=None)):
        line = offset + 2
        values = dict(zip(columns, row))
        pairs.append(MatchedPair(
            y_a=_binary(values["y_a"], line, "y_a"),
            y_b=_binary(values["y_b"], line, "y_b"),
            d=_binary(values["d"], line, "d"),
            x_a=tuple(_finite(values[f"x_a_{j}"], line, f"x_a_{j}") for j in range(1, k + 1)),
            x_b=tuple(_finite(values[f"x_b_{j}"], line, f"x_b_{j}") for j in range(1, k + 1)),
        ))
    logger.info("Read %d pairs with %d covariates from %s", len(pairs), k, path)
    return Dataset(pairs=tuple(pairs), k=k)


def dataset_frame(data: Dataset) -> pd.DataFrame:
    arrays = data.arrays
    frame = pd.DataFrame({
        "y_a": arrays.y_a.astype(int),
        "y_b": arrays.y_b.astype(int),
        "d": arrays.d.astype(int),
    })
    for j in range(data.k):
        frame[f"x_a_{j + 1}"] = arrays.x_a[:, j]
    for j in range(data.k):
        frame[f"x_b_{j + 1}"] = arrays.x_b[:, j]
    return frame[pair_csv_columns(data.k)]


def emit_dataset(data: Dataset) -> str:
    """Pair CSV text; floats are written with round-trip precision."""
    return dataset_frame(data).to_csv(index=False, lineterminator="\n", float_format=FLOAT_FORMAT)


def write_dataset(data: Dataset, path: Union[str, Path]) -> None:
    Path(path).write_text(emit_dataset(data), encoding="utf-8")


def _outcome(value: float, threshold: float, rule: Dichotomization) -> int:
    if rule is Dichotomization.STRICT:
        return int(value > threshold)
    return int(value >= threshold)


def _dichotomization(rule) -> Dichotomization:
    try:
        return Dichotomization(str(rule))
    except ValueError:
        raise UnknownConventionError(rule) from None


def load_lead_dataset(threshold: float = 16, rule: Union[Dichotomization, str] = Dichotomization.INCLUSIVE) -> Dataset:
    """
    Blood-lead matched pairs; A is the exposed (case) child with d = 1, k = 0.

    The default inclusive rule (level >= threshold) reproduces the published
    conditional and random-effects estimates; rule="strict" scores a level
    equal to the threshold as 0.
    """
    rule = _dichotomization(rule)
    pairs = tuple(
        MatchedPair(y_a=_outcome(case, threshold, rule), y_b=_outcome(control, threshold, rule), d=1)
        for _, case, control in LEAD_LEVELS
    )
    return Dataset(pairs=pairs, k=0)


def load_leukaemia_dataset(
    threshold: float = 12,
    censoring: Union[CensoringConvention, str] = CensoringConvention.FACE_VALUE,
    rule: Union[Dichotomization, str] = Dichotomization.INCLUSIVE,
) -> Dataset:
    """
    Leukaemia remission pairs; A is the 6-MP patient with d = 1, k = 0.

    censoring="face_value" dichotomizes censored times as recorded;
    censoring="drop_censored_below" drops pairs holding a censored time that
    does not pass the threshold, since such an outcome is unknown.
    """
    try:
        censoring = CensoringConvention(str(censoring))
    except ValueError:
        raise UnknownConventionError(censoring) from None
    rule = _dichotomization(rule)

    by_pair: dict[int, dict[str, tuple[int, int]]] = {}
    for pair_id, weeks, event, group in LEUKAEMIA_REMISSIONS:
        by_pair.setdefault(pair_id, {})[group] = (weeks, event)

    pairs = []
    for pair_id in sorted(by_pair):
        members = by_pair[pair_id]
        if censoring is CensoringConvention.DROP_CENSORED_BELOW and any(
            event == 0 and not _outcome(weeks, threshold, rule) for weeks, event in members.values()
        ):
            logger.debug("Dropping leukaemia pair %d: censored below threshold", pair_id)
            continue
        treated, control = members[TREATED_GROUP], members[CONTROL_GROUP]
        pairs.append(MatchedPair(
            y_a=_outcome(treated[0], threshold, rule),
            y_b=_outcome(control[0], threshold, rule),
            d=1,
        ))
    return Dataset(pairs=tuple(pairs), k=0)


def load_builtin(name: str, **kwargs) -> Dataset:
    if name == "lead":
        return load_lead_dataset(**kwargs)
    if name == "leukaemia":
        return load_leukaemia_dataset(**kwargs)
    raise ValueError(f"unknown builtin dataset '{name}'; choose from {', '.join(BUILTIN_DATASETS)}")
