# Import Libraries
from pathlib import Path
from src.estimators import OneWayLayout
from src.exceptions import ConfigurationError, IngestError
import json
import logging
import numpy as np
import polars as pl

# Initialization
logger = logging.getLogger(__name__)
ROW_INDEX = "_row"
# Data row i (0-based) sits on line i + 2 of the file: line 1 is the header.
FIRST_DATA_LINE = 2

def _read_text_frame(path: Path) -> pl.DataFrame:
    """
    Reads a CSV file with every column kept as text, so that parsing problems can be
    reported against their line instead of failing inside schema inference.

    Args:
        path (Path): The CSV file.

    Returns:
        pl.DataFrame: The raw table.
    """
    if not path.exists():
        raise IngestError(f"Input file not found: {path}")
    if path.stat().st_size == 0:
        raise IngestError(f"Input file is empty: {path}")
    logger.info(f"Reading CSV file: {path}")
    try:
        return pl.read_csv(path, infer_schema_length=0)
    except pl.exceptions.NoDataError as error:
        raise IngestError(f"Input file is empty: {path}") from error
    except pl.exceptions.ComputeError as error:
        raise IngestError(f"Input file {path} is not a readable CSV: {error}") from error

def _ordered_levels(observed: list[str], level_order: list[str] | None) -> list[str]:
    if level_order is None:
        return observed
    level_order = [str(level) for level in level_order]
    if len(set(level_order)) != len(level_order):
        raise ConfigurationError(f"Level order contains duplicates: {level_order}")
    missing = [level for level in level_order if level not in observed]
    if missing:
        raise ConfigurationError(f"Declared level(s) not found in the data: {missing}")
    undeclared = [level for level in observed if level not in level_order]
    if undeclared:
        raise ConfigurationError(f"Data level(s) missing from the declared order: {undeclared}")
    return level_order

def ingest_csv(path: Path, group_column: str, response_column: str,
               level_order: list[str] | None = None) -> OneWayLayout:
    """
    Loads a long-format dose-response table into a one-way layout.

    Groups are ordered by `level_order` when given, otherwise by first appearance;
    the first group is the control for Williams-type comparisons.

    Args:
        path (Path): UTF-8 CSV with a header row.
        group_column (str): Column holding the treatment level labels.
        response_column (str): Column holding the numeric responses.
        level_order (list[str] | None): Dose order of the levels, control first.

    Returns:
        OneWayLayout: The grouped responses.
    """
    path = Path(path)
    if group_column == response_column:
        raise ConfigurationError("Group and response columns must be different")
    frame = _read_text_frame(path)
    missing = [column for column in (group_column, response_column) if column not in frame.columns]
    if missing:
        raise ConfigurationError(f"Column(s) {missing} not found in {path}; available: {frame.columns}")
    if frame.is_empty():
        raise IngestError(f"Input file {path} has a header but no data rows")
    frame = frame.with_row_index(ROW_INDEX).with_columns(
        pl.col(group_column).str.strip_chars().alias(group_column),
        pl.col(response_column).str.strip_chars().cast(pl.Float64, strict=False).alias("_value"),
    )
    bad = frame.filter(pl.col("_value").is_null() | pl.col("_value").is_nan() | pl.col("_value").is_infinite())
    if not bad.is_empty():
        details = ", ".join(
            f"line {row[ROW_INDEX] + FIRST_DATA_LINE} ({row[response_column]!r})"
            for row in bad.head(10).iter_rows(named=True)
        )
        raise IngestError(f"Non-numeric {response_column!r} response on {details}")
    unlabeled = frame.filter(pl.col(group_column).is_null() | (pl.col(group_column) == ""))
    if not unlabeled.is_empty():
        line = unlabeled.get_column(ROW_INDEX)[0] + FIRST_DATA_LINE
        raise IngestError(f"Missing {group_column!r} label on line {line}")
    observed = frame.get_column(group_column).unique(maintain_order=True).to_list()
    levels = _ordered_levels(observed, level_order)
    groups = {
        level: frame.filter(pl.col(group_column) == level).get_column("_value").to_numpy().astype(np.float64)
        for level in levels
    }
    layout = OneWayLayout.from_groups(groups)
    logger.info(f"Loaded {layout.n_total} observations in {layout.k} groups: {dict(zip(layout.levels, layout.group_sizes.tolist()))}")
    return layout

def load_scenarios(path: Path) -> dict:
    """
    Reads a JSON study file: optional `defaults` and `pitman`, and a `scenarios` list.

    Args:
        path (Path): The study file.

    Returns:
        dict: The parsed study, ready for `build_scenarios`.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"Study file not found: {path}")
    logger.info(f"Reading study file: {path}")
    try:
        study = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as error:
        raise IngestError(f"Study file {path} is not valid JSON: {error}") from error
    if not isinstance(study, dict):
        raise IngestError(f"Study file {path} must hold a JSON object")
    return study
