# Import Libraries
from dataclasses import dataclass, field, replace
from pathlib import Path
from src.config import CONFIG_PATH, load_config, validate_config
from src.contrasts import ContrastKind, build_contrasts
from src.data_ingestion import ingest_csv, load_scenarios
from src.distributions import MvtSettings
from src.estimators import group_summary
from src.exceptions import ConfigurationError, IngestError, InvalidInputError, NumericError
from src.isotonic import Direction
from src.reports_writer import (
    OutputFormat, render_analysis, render_simulation_text, write_analysis_reports, write_simulation_reports,
)
from src.simulation import PowerSimulationEngine
from src.trend_tests import DEFAULT_PERMUTATION_SEED, TestFamily, TestReport, TestSpec, run_test
import argparse
import json
import logging
import sys
import yaml

# Initialization
logger = logging.getLogger(__name__)
DIRECTIONS = {"up": "increasing", "down": "decreasing"}
SIDES = {"1": "one", "2": "two"}
ANALYSIS_FAMILIES = [family.value for family in TestFamily]
CONTRAST_FAMILIES = {"grandmean": TestFamily.GRAND_MEAN_MCT.value, "williams": TestFamily.WILLIAMS_MCT.value}
STDOUT = "-"

def _comma_list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]

def _float_list(text: str) -> list[float]:
    try:
        return [float(item) for item in _comma_list(text)]
    except ValueError as error:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from error

def _int_list(text: str) -> list[int]:
    try:
        return [int(item) for item in _comma_list(text)]
    except ValueError as error:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from error

def _add_shared_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--settings", type=Path, default=CONFIG_PATH, help="YAML configuration file")
    parser.add_argument("--alpha", type=float, help="Test level (default from configuration)")
    parser.add_argument("--mvt-tol", type=float, help="Absolute tolerance of multivariate t probabilities")
    parser.add_argument("--mvt-seed", type=int, help="Seed of the quasi-Monte Carlo randomization")
    parser.add_argument("--perm-seed", type=int, help="Seed of the permutation test")

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trend-tests", description="Order-restricted trend tests for one-way layouts.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    analyze = subparsers.add_parser("analyze", help="Run trend tests on a dose-response CSV file")
    analyze.add_argument("input", type=Path, help="CSV file with a header row")
    analyze.add_argument("--group-column", default="dose", help="Column holding the treatment levels")
    analyze.add_argument("--response-column", default="response", help="Column holding the responses")
    analyze.add_argument("--level-order", type=_comma_list, help="Dose order of the levels, control first, e.g. 0,1,2,3")
    analyze.add_argument("--tests", type=_comma_list,
                         help=f"Comma-separated test families out of {', '.join(ANALYSIS_FAMILIES)} (default: all)")
    analyze.add_argument("--contrasts", choices=sorted(CONTRAST_FAMILIES),
                         help="Run only the multiple contrast test of this family (ignored with --tests)")
    analyze.add_argument("--direction", choices=sorted(DIRECTIONS), help="Direction of the ordered alternative")
    analyze.add_argument("--sides", choices=sorted(SIDES), help="One- or two-sided multiple contrast tests")
    analyze.add_argument("--variance", choices=["pooled", "sandwich"], help="Covariance of the group means")
    analyze.add_argument("--hc", choices=["hc0", "hc1", "hc2", "hc3"], help="Sandwich flavour")
    analyze.add_argument("--studentize", choices=["full", "sigma-only"], help="Denominator of the contrast statistics")
    analyze.add_argument("--permutations", type=int, help="Permutations of the permutation test")
    analyze.add_argument("--contrast-file", type=Path, help="Adds a multiple contrast test with custom contrasts")
    analyze.add_argument("--format", choices=[fmt.value for fmt in OutputFormat], default=OutputFormat.TEXT.value,
                         help="Format printed to standard output")
    analyze.add_argument("--json", nargs="?", const=STDOUT, metavar="PATH",
                         help="Write the JSON report to PATH; without a path, print JSON instead of --format")
    analyze.add_argument("--out", type=Path, help="Also write the report; .json, .csv or text by suffix")
    _add_shared_flags(analyze)

    simulate = subparsers.add_parser("simulate", help="Empirical size and power of a study file")
    simulate.add_argument("--config", type=Path, required=True, help="JSON study file")
    simulate.add_argument("--out", type=Path, help="CSV table; an aligned text table is written next to it")
    simulate.add_argument("--parallel", type=int, help="Worker processes")
    simulate.add_argument("--seed", type=int, help="Base seed replacing the study's own")
    simulate.add_argument("--json", action="store_true", help="Print the rows as JSON instead of text")
    _add_shared_flags(simulate)

    calibrate = subparsers.add_parser("calibrate", help="Span of a mean profile giving a target ANOVA F power")
    calibrate.add_argument("--shape", type=_float_list, required=True, help="Mean profile, e.g. 0,0,0,1")
    calibrate.add_argument("--group-sizes", type=_int_list, required=True, help="Group sizes, e.g. 10,10,10,10")
    calibrate.add_argument("--sigma", type=_float_list, default=[1.0], help="One or k standard deviations")
    calibrate.add_argument("--target", type=float, required=True, help="Target AOV power")
    calibrate.add_argument("--runs", type=int, default=2000, help="Runs per simulated rate (heterogeneous sigma)")
    calibrate.add_argument("--seed", type=int, default=1, help="Seed of the common random numbers")
    calibrate.add_argument("--json", action="store_true", help="Print JSON instead of text")
    _add_shared_flags(calibrate)
    return parser

def configure_logging(section: dict):
    logging.basicConfig(
        level=getattr(logging, str(section["level"]).upper(), logging.INFO),
        format=section["format"],
        datefmt=section["datefmt"],
        force=True,
    )

def _load_settings(path: Path) -> dict:
    try:
        config = load_config(path)
    except FileNotFoundError as error:
        raise ConfigurationError(f"Configuration Error: {path} not found") from error
    except yaml.YAMLError as error:
        raise ConfigurationError(f"Configuration Error: {path} is not valid YAML: {error}") from error
    return validate_config(config)

def _apply_overrides(config: dict, args: argparse.Namespace) -> dict:
    """Returns a copy of the configuration with the command-line flags applied."""
    config = {section: dict(values) for section, values in config.items()}
    analysis = config["analysis"]
    if args.alpha is not None:
        analysis["alpha"] = args.alpha
    if args.mvt_seed is not None:
        config["mvt"]["seed"] = args.mvt_seed
    if args.perm_seed is not None:
        analysis["permutation_seed"] = args.perm_seed
    if args.mvt_tol is not None:
        section = "simulation" if args.command == "simulate" else "mvt"
        config[section]["abs_tolerance"] = args.mvt_tol
    for flag, key, mapping in (("direction", "direction", DIRECTIONS), ("sides", "sides", SIDES),
                               ("variance", "variance", None), ("hc", "hc", None),
                               ("studentize", "studentize", None), ("permutations", "permutations", None)):
        value = getattr(args, flag, None)
        if value is not None:
            analysis[key] = mapping[value] if mapping else value
    if getattr(args, "parallel", None) is not None:
        config["simulation"]["parallel"] = args.parallel
    return validate_config(config)

def analysis_specs(config: dict, families: list[str]) -> list[TestSpec]:
    """The tests `analyze` runs, configured from the analysis section."""
    analysis = config["analysis"]
    specs = []
    for name in families:
        try:
            family = TestFamily(name)
        except ValueError as error:
            raise ConfigurationError(f"Unknown test family '{name}'; choose from {', '.join(ANALYSIS_FAMILIES)}") from error
        specs.append(TestSpec(
            family=family, sides=analysis["sides"], variance_mode=analysis["variance"],
            direction=analysis["direction"], alpha=float(analysis["alpha"]),
            permutations=int(analysis["permutations"]), hc=analysis["hc"], studentize=analysis["studentize"],
        ))
    return specs

@dataclass(frozen=True)
class AnalysisConfig:
    """
    One `analyze` invocation: the dataset, the tests to run on it and the output format.
    A contrast file adds a grand-mean style MCT with the file's contrasts.
    """
    input_path: Path
    tests: tuple[TestSpec, ...]
    group_column: str = "dose"
    response_column: str = "response"
    level_order: tuple[str, ...] | None = None
    output: OutputFormat = OutputFormat.TEXT
    contrast_file: Path | None = None
    mvt: MvtSettings = field(default_factory=MvtSettings)
    permutation_seed: int = DEFAULT_PERMUTATION_SEED

    def __post_init__(self):
        if self.group_column == self.response_column:
            raise ConfigurationError("Group and response columns must be different")
        if not self.tests and self.contrast_file is None:
            raise ConfigurationError("Nothing to analyze: no tests and no contrast file")
        object.__setattr__(self, "output", OutputFormat(self.output))
        object.__setattr__(self, "tests", tuple(self.tests))
        if self.level_order is not None:
            object.__setattr__(self, "level_order", tuple(str(level) for level in self.level_order))

def run_analysis(config: AnalysisConfig) -> tuple[list[TestReport], list[dict]]:
    """
    Loads the dataset and evaluates every configured test on it.

    Args:
        config (AnalysisConfig): The invocation.

    Returns:
        tuple: The test reports and the per-level group summary.
    """
    level_order = list(config.level_order) if config.level_order is not None else None
    layout = ingest_csv(config.input_path, config.group_column, config.response_column, level_order)
    reports = []
    for spec in config.tests:
        reports.append(run_test(layout, spec, config.mvt, config.permutation_seed))
        logger.info(f"Test {spec.label} finished: global p = {reports[-1].global_p:.4g}")
    direction = config.tests[0].direction if config.tests else Direction.INCREASING
    if config.contrast_file is not None:
        contrasts = build_contrasts(ContrastKind.CUSTOM, layout.group_sizes, config.contrast_file)
        base = config.tests[0] if config.tests else TestSpec(TestFamily.GRAND_MEAN_MCT)
        spec = replace(base, family=TestFamily.GRAND_MEAN_MCT,
                       label=f"custom-mct-{base.sides.value}-{base.variance_mode.value}")
        reports.append(run_test(layout, spec, config.mvt, config.permutation_seed, contrasts))
    return reports, group_summary(layout, direction)

def analyze(config: AnalysisConfig) -> str:
    """Runs the configured tests and returns the rendered report in the configured format."""
    reports, summary = run_analysis(config)
    return render_analysis(reports, summary, config.output)

def _analysis_config(args: argparse.Namespace, config: dict) -> AnalysisConfig:
    if args.tests is not None:
        families = args.tests
    elif args.contrasts is not None:
        families = [CONTRAST_FAMILIES[args.contrasts]]
    else:
        families = ANALYSIS_FAMILIES
    output = OutputFormat.JSON if args.json == STDOUT else OutputFormat(args.format)
    return AnalysisConfig(
        input_path=args.input,
        tests=tuple(analysis_specs(config, families)),
        group_column=args.group_column,
        response_column=args.response_column,
        level_order=args.level_order,
        output=output,
        contrast_file=args.contrast_file,
        mvt=MvtSettings.from_config(config["mvt"]),
        permutation_seed=int(config["analysis"]["permutation_seed"]),
    )

def run_analyze(args: argparse.Namespace, config: dict) -> int:
    analysis = _analysis_config(args, config)
    reports, summary = run_analysis(analysis)
    sys.stdout.write(render_analysis(reports, summary, analysis.output))
    if args.out is not None:
        write_analysis_reports(reports, args.out, summary)
    if args.json not in (None, STDOUT):
        write_analysis_reports(reports, Path(args.json), summary, OutputFormat.JSON)
    return 0

def run_simulate(args: argparse.Namespace, config: dict) -> int:
    engine = PowerSimulationEngine(config)
    study = load_scenarios(args.config)
    table = engine.run_study(study, seed=args.seed)
    thresholds = (engine.settings.conservative_below, engine.settings.liberal_above)
    if args.json:
        sys.stdout.write(table.to_frame().write_json() + "\n")
    else:
        sys.stdout.write(render_simulation_text(table, *thresholds))
    if args.out is not None:
        write_simulation_reports(table, args.out, *thresholds)
    return 0

def run_calibrate(args: argparse.Namespace, config: dict) -> int:
    engine = PowerSimulationEngine(config)
    alpha = float(config["analysis"]["alpha"])
    sigma = args.sigma[0] if len(args.sigma) == 1 else args.sigma
    span = engine.calibrate(args.shape, args.group_sizes, sigma, args.target, alpha=alpha, runs=args.runs, seed=args.seed)
    mu = [span * value for value in args.shape]
    if args.json:
        sys.stdout.write(json.dumps({"span": span, "mu": mu, "target_aov_power": args.target}) + "\n")
    else:
        sys.stdout.write(f"span = {span:.6f}\nmu = {', '.join(f'{value:.6f}' for value in mu)}\n")
    return 0

COMMANDS = {"analyze": run_analyze, "simulate": run_simulate, "calibrate": run_calibrate}

def main(argv: list[str] | None = None) -> int:
    """
    Entry point of the command line. Errors are logged and mapped to exit codes:
    2 for configuration, 3 for input data, 4 for numerical failures.

    Args:
        argv (list[str] | None): Arguments without the program name; sys.argv when None.

    Returns:
        int: The process exit code.
    """
    args = build_parser().parse_args(argv)
    try:
        config = _load_settings(args.settings)
        configure_logging(config["logging"])
        config = _apply_overrides(config, args)
        return COMMANDS[args.command](args, config)
    except (ConfigurationError, IngestError, InvalidInputError, NumericError) as error:
        logger.error(f"{type(error).__name__}: {error}")
        return error.exit_code
