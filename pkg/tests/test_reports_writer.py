# Import Libraries
from src.estimators import group_summary
from src.reports_writer import (
    REPORT_CSV_SCHEMA, OutputFormat, render_analysis, render_analysis_text, render_simulation_text, reports_from_json,
    reports_to_frame, reports_to_json,
    write_analysis_reports, write_simulation_reports,
)
from src.simulation import SimulationRow, SimulationTable
from src.trend_tests import anova_f, bartholomew_permutation, mct, standard_spec
import json
import polars as pl
import pytest

@pytest.fixture
def reports(balanced_layout, fast_mvt):
    """An F test, a one-sided Williams MCT with intervals and a permutation E2 report."""
    return [
        anova_f(balanced_layout, standard_spec("AOV")),
        mct(balanced_layout, standard_spec("WIho1"), fast_mvt),
        bartholomew_permutation(balanced_layout, permutations=99, seed=1, spec=standard_spec("E2k", permutations=99)),
    ]

@pytest.fixture
def simulation_table():
    return SimulationTable((
        SimulationRow("H0", "AOV", "", "pooled", "arithmetic", 1000, 52, True),
        SimulationRow("H0", "MCTEho1", "one", "pooled", "pava", 1000, 30, True, 1.2),
        SimulationRow("H0", "E2k", "", "pooled", "arithmetic", 1000, 25, True),
        SimulationRow("shift", "AOV", "", "pooled", "arithmetic", 1000, 777, False),
        SimulationRow("shift", "MCTEho1", "one", "pooled", "pava", 1000, 867, False, 1.08),
        SimulationRow("shift", "E2k", "", "pooled", "arithmetic", 1000, 803, False),
    ))

def test_json_round_trip(reports, balanced_layout):
    """Tests that the JSON rendering restores every report exactly, including open interval limits."""
    text = reports_to_json(reports, group_summary(balanced_layout))
    assert reports_from_json(text) == reports
    payload = json.loads(text)
    assert [row["level"] for row in payload["summary"]] == ["0", "1", "2", "3"]

def test_frame_has_one_row_per_statistic(reports):
    """1 F statistic, 3 Williams contrasts and 1 E2 statistic."""
    frame = reports_to_frame(reports)
    assert frame.height == 5
    assert dict(frame.schema) == REPORT_CSV_SCHEMA
    williams = frame.filter(pl.col("test") == "WIho1")
    assert williams["ci_lower"].null_count() == 0
    assert frame.filter(pl.col("test") == "E2k")["estimate"].null_count() == 1

def test_text_rendering(reports, balanced_layout):
    text = render_analysis_text(reports, group_summary(balanced_layout))
    assert text.startswith("Group summary")
    assert "AOV  [anova-f" in text
    assert "CI [" in text and "Inf]" in text
    assert "E2" in text

@pytest.mark.parametrize("name", ["report.csv", "report.json", "report.txt"])
def test_write_analysis_reports_by_suffix(tmp_path, caplog, reports, name):
    """Tests that the output format follows the suffix and the destination is logged."""
    path = tmp_path / "out" / name
    with caplog.at_level("INFO"):
        write_analysis_reports(reports, path)
    assert path.exists()
    assert "saved to:" in caplog.text
    if name.endswith(".csv"):
        assert pl.read_csv(path).height == 5
    elif name.endswith(".json"):
        assert len(reports_from_json(path.read_text())) == 3

def test_write_analysis_reports_skips_on_empty(tmp_path, caplog):
    """
    Tests that nothing is written and a warning is logged when
    no reports were produced.
    """
    path = tmp_path / "out" / "report.txt"
    write_analysis_reports([], path)
    assert not path.parent.exists()
    assert "No test reports were generated. Skipping report creation." in caplog.text

def test_simulation_text_marks_null_rows_and_pitman(simulation_table):
    """Conservative and liberal H0 cells are marked; power cells never are; Pit shows the ratio."""
    text = render_simulation_text(simulation_table)
    header, null_line, power_line = text.splitlines()
    assert header.split()[-1] == "Pit"
    assert "0.052 " in null_line
    assert "0.030-" in null_line and "0.025-" in null_line
    assert "1.20" in null_line
    assert "-" not in power_line.split("shift", 1)[1]
    assert "1.08" in power_line

def test_simulation_text_liberal_flag():
    table = SimulationTable((SimulationRow("H0", "WIho1", "one", "pooled", "arithmetic", 1000, 90, True),))
    assert "0.090+" in render_simulation_text(table)

def test_write_simulation_reports(tmp_path, caplog, simulation_table):
    """Tests that the CSV and its text companion are written."""
    path = tmp_path / "tables" / "homogeneous.csv"
    with caplog.at_level("INFO"):
        write_simulation_reports(simulation_table, path)
    frame = pl.read_csv(path)
    assert frame.height == 6
    assert "pitman" in frame.columns
    assert path.with_suffix(".txt").exists()
    assert "Simulation table saved to:" in caplog.text

def test_write_simulation_reports_skips_on_empty(tmp_path, caplog):
    path = tmp_path / "tables" / "empty.csv"
    write_simulation_reports(SimulationTable(()), path)
    assert not path.parent.exists()
    assert "No simulation rows were generated. Skipping simulation report creation." in caplog.text

@pytest.mark.parametrize("name, expected", [
    ("out.json", OutputFormat.JSON), ("OUT.CSV", OutputFormat.CSV), ("out.txt", OutputFormat.TEXT), ("out", OutputFormat.TEXT),
])
def test_output_format_from_suffix(name, expected):
    assert OutputFormat.from_suffix(name) is expected

def test_render_analysis_dispatches_on_format(reports):
    assert render_analysis(reports, None, "json").startswith("{")
    assert render_analysis(reports, None, OutputFormat.CSV).startswith("test,family")
    assert render_analysis(reports).startswith("AOV")

def test_williams_report_shows_the_classic_statistic(reports):
    """The balanced Williams MCT reports the classic statistic; other tests do not."""
    williams = reports[1]
    assert williams.williams_classic is not None
    assert reports[0].williams_classic is None
    assert f"classic Williams t = {williams.williams_classic:.4f}" in render_analysis_text(reports)
    frame = reports_to_frame(reports)
    assert frame.filter(pl.col("test") == "WIho1")["williams_classic"].null_count() == 0
    assert frame.filter(pl.col("test") != "WIho1")["williams_classic"].null_count() == 2

def test_explicit_format_overrides_the_suffix(tmp_path, reports):
    path = tmp_path / "analysis.out"
    write_analysis_reports(reports, path, output_format=OutputFormat.JSON)
    assert reports_from_json(path.read_text()) == reports
