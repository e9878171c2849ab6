# Import Libraries
from enum import Enum
from pathlib import Path
from src.simulation import SimulationTable
from src.trend_tests import TestFamily, TestReport
import json
import logging
import math
import polars as pl

# Initialization
logger = logging.getLogger(__name__)

class OutputFormat(str, Enum):
    TEXT = "text"
    JSON = "json"
    CSV = "csv"

    @classmethod
    def from_suffix(cls, path: Path) -> "OutputFormat":
        suffix = Path(path).suffix.lower().lstrip(".")
        return cls(suffix) if suffix in (cls.JSON.value, cls.CSV.value) else cls.TEXT

REPORT_CSV_SCHEMA = {
    "test": pl.String,
    "family": pl.String,
    "sides": pl.String,
    "variance_mode": pl.String,
    "direction": pl.String,
    "contrast": pl.String,
    "statistic": pl.Float64,
    "estimate": pl.Float64,
    "adjusted_p": pl.Float64,
    "global_p": pl.Float64,
    "df": pl.Int64,
    "ci_lower": pl.Float64,
    "ci_upper": pl.Float64,
    "mvt_error_bound": pl.Float64,
    "williams_classic": pl.Float64,
}

def _format_number(value: float | None, digits: int = 4) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    if math.isinf(value):
        return "Inf" if value > 0 else "-Inf"
    return f"{value:.{digits}f}"

def _format_p(value: float) -> str:
    return "<0.0001" if value < 1e-4 else f"{value:.4f}"

def render_group_summary(summary: list[dict]) -> str:
    """Aligned table of n, mean, sd and PAVA mean per level."""
    width = max([len("level")] + [len(str(row["level"])) for row in summary])
    lines = [f"{'level':<{width}}  {'n':>5}  {'mean':>10}  {'sd':>10}  {'pava_mean':>10}"]
    for row in summary:
        lines.append(
            f"{row['level']:<{width}}  {row['n']:>5}  {row['mean']:>10.4f}  {row['sd']:>10.4f}  {row['pava_mean']:>10.4f}"
        )
    return "\n".join(lines)

def render_report_text(report: TestReport) -> str:
    """
    Human-readable block for one test: a header line with the method and global p-value,
    then one line per statistic with its adjusted p-value and, when present, its
    simultaneous confidence interval.
    """
    spec = report.method
    header = (
        f"{spec.label}  [{spec.family.value}, sides={spec.sides.value}, variance={spec.variance_mode.value}, "
        f"direction={spec.direction.value}, df={report.df}]  global p = {_format_p(report.global_p)}"
    )
    if report.mvt_error_bound > 0:
        header += f"  (MVT error <= {report.mvt_error_bound:.1e})"
    labels = report.contrast_labels or tuple(f"T{i + 1}" for i in range(len(report.statistics)))
    width = max(len(label) for label in labels)
    lines = [header]
    for index, (label, statistic, p_value) in enumerate(zip(labels, report.statistics, report.adjusted_p)):
        line = f"  {label:<{width}}  stat = {statistic:>9.4f}  adj. p = {_format_p(p_value):>8}"
        if report.confidence_intervals is not None:
            low, high = report.confidence_intervals[index]
            line += f"  estimate = {report.estimates[index]:>9.4f}  CI [{_format_number(low)}, {_format_number(high)}]"
        lines.append(line)
    if spec.family is TestFamily.WILLIAMS_MCT:
        if report.williams_classic is None:
            lines.append("  classic Williams t = - (unbalanced design)")
        else:
            lines.append(f"  classic Williams t = {report.williams_classic:.4f}")
    return "\n".join(lines)

def render_analysis_text(reports: list[TestReport], summary: list[dict] | None = None) -> str:
    blocks = []
    if summary:
        blocks.append("Group summary\n" + render_group_summary(summary))
    blocks.extend(render_report_text(report) for report in reports)
    return "\n\n".join(blocks) + "\n"

def reports_to_json(reports: list[TestReport], summary: list[dict] | None = None) -> str:
    """Serializes reports (and the optional group summary) with full float precision."""
    payload = {"summary": summary or [], "reports": [report.to_dict() for report in reports]}
    return json.dumps(payload, indent=2, allow_nan=True) + "\n"

def reports_from_json(text: str) -> list[TestReport]:
    return [TestReport.from_dict(item) for item in json.loads(text)["reports"]]

def reports_to_frame(reports: list[TestReport]) -> pl.DataFrame:
    """Long table, one row per statistic of every report."""
    records = []
    for report in reports:
        spec = report.method
        labels = report.contrast_labels or tuple(f"T{i + 1}" for i in range(len(report.statistics)))
        for index, label in enumerate(labels):
            interval = report.confidence_intervals[index] if report.confidence_intervals is not None else (None, None)
            records.append({
                "test": spec.label,
                "family": spec.family.value,
                "sides": spec.sides.value,
                "variance_mode": spec.variance_mode.value,
                "direction": spec.direction.value,
                "contrast": label,
                "statistic": report.statistics[index],
                "estimate": report.estimates[index] if report.estimates else None,
                "adjusted_p": report.adjusted_p[index],
                "global_p": report.global_p,
                "df": report.df,
                "ci_lower": interval[0],
                "ci_upper": interval[1],
                "mvt_error_bound": report.mvt_error_bound,
                "williams_classic": report.williams_classic,
            })
    return pl.DataFrame(records, schema=REPORT_CSV_SCHEMA)

def render_analysis(reports: list[TestReport], summary: list[dict] | None = None,
                    output_format: OutputFormat = OutputFormat.TEXT) -> str:
    """Renders analysis reports as aligned text, JSON, or the long CSV table."""
    output_format = OutputFormat(output_format)
    if output_format is OutputFormat.JSON:
        return reports_to_json(reports, summary)
    if output_format is OutputFormat.CSV:
        return reports_to_frame(reports).write_csv()
    return render_analysis_text(reports, summary)

def write_text(text: str, output_path: Path):
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text(text, encoding="utf-8")
    logger.info(f"Report saved to: {output_path}")

def write_analysis_reports(reports: list[TestReport], output_path: Path, summary: list[dict] | None = None,
                           output_format: OutputFormat | None = None):
    """
    Writes analysis reports in `output_format`, or in the format named by the file suffix
    (.json, .csv, text otherwise) when no format is given.

    Args:
        reports (list[TestReport]): The test outcomes.
        output_path (Path): Destination file.
        summary (list[dict] | None): Group summary rows, included in text and JSON output.
        output_format (OutputFormat | None): Format overriding the suffix.
    """
    if not reports:
        logger.warning("No test reports were generated. Skipping report creation.")
        return
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_format = OutputFormat.from_suffix(output_path) if output_format is None else OutputFormat(output_format)
    if output_format is OutputFormat.CSV:
        reports_to_frame(reports).write_csv(output_path)
        logger.info(f"Analysis report saved to: {output_path}")
    else:
        write_text(render_analysis(reports, summary, output_format), output_path)

def render_simulation_text(table: SimulationTable, conservative_below: float = 0.04,
                           liberal_above: float = 0.065) -> str:
    """
    Wide table with one line per scenario and one column per test. Size cells of H0
    scenarios carry '-' when conservative and '+' when liberal. A Pit column shows
    the empirical Pitman efficacy when the study requested one.
    """
    scenarios = table.scenario_labels()
    tests = table.test_labels()
    has_pitman = any(row.pitman is not None for row in table.rows)
    label_width = max(len("scenario"), *(len(label) for label in scenarios))
    cell_width = max(7, *(len(test) for test in tests))
    header = f"{'scenario':<{label_width}}" + "".join(f"  {test:>{cell_width}}" for test in tests)
    if has_pitman:
        header += f"  {'Pit':>6}"
    lines = [header]
    for label in scenarios:
        line = f"{label:<{label_width}}"
        pitman = None
        for test in tests:
            try:
                row = table.row(label, test)
            except KeyError:
                line += f"  {'':>{cell_width}}"
                continue
            cell = f"{row.rate:.3f}{row.flag(conservative_below, liberal_above) or ' '}"
            line += f"  {cell:>{cell_width}}"
            if row.pitman is not None:
                pitman = row.pitman
        if has_pitman:
            line += f"  {_format_number(pitman, 2):>6}"
        lines.append(line)
    return "\n".join(lines) + "\n"

def write_simulation_reports(table: SimulationTable, output_path: Path, conservative_below: float = 0.04,
                             liberal_above: float = 0.065):
    """
    Writes the long CSV table to `output_path` and the aligned text rendering next to it.

    Args:
        table (SimulationTable): The study results.
        output_path (Path): Destination of the CSV file; the text table gets a .txt suffix.
        conservative_below (float): Highlighting threshold for conservative sizes.
        liberal_above (float): Highlighting threshold for liberal sizes.
    """
    if not table.rows:
        logger.warning("No simulation rows were generated. Skipping simulation report creation.")
        return
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    table.to_frame().write_csv(output_path)
    logger.info(f"Simulation table saved to: {output_path}")
    write_text(render_simulation_text(table, conservative_below, liberal_above), output_path.with_suffix(".txt"))
