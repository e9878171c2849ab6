# Import Libraries
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from scipy import optimize, stats
from src.config import validate_config
from src.distributions import MvtSettings
from src.estimators import OneWayLayout
from src.exceptions import ConfigurationError, DegenerateVarianceError, InvalidInputError
from src.trend_tests import STANDARD_TEST_GRID, TestFamily, TestSpec, global_p_value, standard_spec
import logging
import math
import numpy as np
import polars as pl

# Initialization
logger = logging.getLogger(__name__)
CHUNK_RUNS = 250
SIMULATION_MVT_TOLERANCE = 1e-3
MAX_SEED = 2 ** 64 - 1

@dataclass(frozen=True)
class SimulationSettings:
    """
    Knobs shared by every run of a study.

    Attributes:
        mvt (MvtSettings): Integrator settings, with the looser simulation tolerance.
        permutations (int): Permutations per run for the permutation test.
        conservative_below (float): H0 rates below this are marked conservative.
        liberal_above (float): H0 rates above this are marked liberal.
    """
    mvt: MvtSettings = field(default_factory=lambda: MvtSettings(abs_tolerance=SIMULATION_MVT_TOLERANCE))
    permutations: int = 1000
    conservative_below: float = 0.04
    liberal_above: float = 0.065

    @classmethod
    def from_config(cls, config: dict) -> "SimulationSettings":
        section = config["simulation"]
        return cls(
            mvt=MvtSettings.from_config(config["mvt"], abs_tolerance=section["abs_tolerance"]),
            permutations=int(section["permutations"]),
            conservative_below=float(section["conservative_below"]),
            liberal_above=float(section["liberal_above"]),
        )

@dataclass(frozen=True)
class Scenario:
    """
    One mean/standard-deviation profile of a balanced or unbalanced one-way layout
    with Gaussian errors, and the tests to run on every simulated dataset.
    `sigma` may be given as a scalar and is broadcast to every group.
    """
    label: str
    group_sizes: tuple[int, ...]
    mu: tuple[float, ...]
    sigma: tuple[float, ...]
    runs: int
    tests: tuple[TestSpec, ...] = STANDARD_TEST_GRID
    alpha: float = 0.05
    seed: int = 1

    def __post_init__(self):
        group_sizes = tuple(int(n) for n in np.atleast_1d(self.group_sizes))
        mu = tuple(float(value) for value in np.atleast_1d(self.mu))
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        if sigma.size == 1:
            sigma = np.full(len(group_sizes), sigma[0])
        sigma = tuple(float(value) for value in sigma)
        if len(group_sizes) < 2:
            raise InvalidInputError(f"Scenario '{self.label}' needs at least 2 groups")
        if not len(mu) == len(sigma) == len(group_sizes):
            raise InvalidInputError(
                f"Scenario '{self.label}': {len(group_sizes)} group sizes, {len(mu)} means and {len(sigma)} standard deviations"
            )
        if min(group_sizes) < 2:
            raise InvalidInputError(f"Scenario '{self.label}': every group needs at least 2 observations")
        if not all(math.isfinite(value) for value in mu):
            raise InvalidInputError(f"Scenario '{self.label}': means must be finite")
        if not all(math.isfinite(value) and value > 0 for value in sigma):
            raise InvalidInputError(f"Scenario '{self.label}': standard deviations must be finite and positive")
        if self.runs < 1:
            raise InvalidInputError(f"Scenario '{self.label}': runs must be at least 1, got {self.runs}")
        if not 0 < self.alpha < 1:
            raise InvalidInputError(f"Scenario '{self.label}': alpha must lie in (0, 1)")
        if not 0 <= self.seed <= MAX_SEED:
            raise InvalidInputError(f"Scenario '{self.label}': seed must be an unsigned 64-bit integer")
        tests = tuple(self.tests)
        if not tests:
            raise InvalidInputError(f"Scenario '{self.label}' has no tests")
        labels = [spec.label for spec in tests]
        if len(set(labels)) != len(labels):
            raise InvalidInputError(f"Scenario '{self.label}': test labels must be unique")
        object.__setattr__(self, "group_sizes", group_sizes)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "tests", tests)

    @property
    def k(self) -> int:
        return len(self.group_sizes)

    @property
    def is_null(self) -> bool:
        return len(set(self.mu)) == 1

    def draw(self, run: int) -> OneWayLayout:
        """
        The dataset of run `run`. Group g is drawn from its own substream keyed by
        (seed, run, g), so any single run can be reproduced in isolation.
        """
        groups = [
            np.random.default_rng([self.seed, run, g]).normal(self.mu[g], self.sigma[g], self.group_sizes[g])
            for g in range(self.k)
        ]
        return OneWayLayout(levels=tuple(f"D{g}" for g in range(self.k)), responses=tuple(groups))

    def permutation_seed(self, run: int, test_index: int) -> list[int]:
        return [self.seed, run, self.k + test_index]

@dataclass(frozen=True)
class SimulationRow:
    label: str
    test: str
    sides: str
    variance_mode: str
    estimand: str
    runs: int
    rejections: int
    is_null: bool = False
    pitman: float | None = None

    @property
    def rate(self) -> float:
        return self.rejections / self.runs

    @property
    def se(self) -> float:
        rate = self.rate
        return math.sqrt(rate * (1.0 - rate) / self.runs)

    def flag(self, conservative_below: float = 0.04, liberal_above: float = 0.065) -> str:
        """'-' for a conservative and '+' for a liberal size; power rows are never flagged."""
        if not self.is_null:
            return ""
        if self.rate < conservative_below:
            return "-"
        if self.rate > liberal_above:
            return "+"
        return ""

    def to_dict(self) -> dict:
        return {
            "label": self.label, "test": self.test, "sides": self.sides, "variance_mode": self.variance_mode,
            "estimand": self.estimand, "runs": self.runs, "rejections": self.rejections,
            "rate": self.rate, "se": self.se, "pitman": self.pitman,
        }

@dataclass(frozen=True)
class SimulationTable:
    rows: tuple[SimulationRow, ...]

    def scenario_labels(self) -> list[str]:
        return list(dict.fromkeys(row.label for row in self.rows))

    def test_labels(self) -> list[str]:
        return list(dict.fromkeys(row.test for row in self.rows))

    def row(self, label: str, test: str) -> SimulationRow:
        for row in self.rows:
            if row.label == label and row.test == test:
                return row
        raise KeyError(f"No row for scenario '{label}' and test '{test}'")

    def to_frame(self) -> pl.DataFrame:
        """Long format, one row per (scenario, test); the pitman column only when a ratio was requested."""
        frame = pl.DataFrame([row.to_dict() for row in self.rows], schema={
            "label": pl.Utf8, "test": pl.Utf8, "sides": pl.Utf8, "variance_mode": pl.Utf8, "estimand": pl.Utf8,
            "runs": pl.Int64, "rejections": pl.Int64, "rate": pl.Float64, "se": pl.Float64, "pitman": pl.Float64,
        })
        if all(row.pitman is None for row in self.rows):
            frame = frame.drop("pitman")
        return frame

def _simulate_runs(scenario: Scenario, first_run: int, last_run: int, settings: SimulationSettings) -> np.ndarray:
    """Rejection counts per test over runs first_run..last_run; every test sees the same dataset."""
    rejections = np.zeros(len(scenario.tests), dtype=np.int64)
    for run in range(first_run, last_run + 1):
        layout = scenario.draw(run)
        for index, spec in enumerate(scenario.tests):
            try:
                p_value = global_p_value(layout, spec, settings.mvt, scenario.permutation_seed(run, index))
            except DegenerateVarianceError as error:
                raise DegenerateVarianceError(f"Scenario '{scenario.label}', run {run}, test {spec.label}: {error}") from error
            rejections[index] += p_value <= scenario.alpha
    return rejections

def _work_items(scenarios: list[Scenario]):
    for index, scenario in enumerate(scenarios):
        for first in range(1, scenario.runs + 1, CHUNK_RUNS):
            yield index, first, min(first + CHUNK_RUNS - 1, scenario.runs)

def _count_rejections(scenarios: list[Scenario], settings: SimulationSettings, parallelism: int) -> list[np.ndarray]:
    totals = [np.zeros(len(scenario.tests), dtype=np.int64) for scenario in scenarios]
    items = list(_work_items(scenarios))
    if parallelism > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as executor:
            futures = {
                executor.submit(_simulate_runs, scenarios[index], first, last, settings): index
                for index, first, last in items
            }
            for future in as_completed(futures):
                totals[futures[future]] += future.result()
    else:
        for index, first, last in items:
            totals[index] += _simulate_runs(scenarios[index], first, last, settings)
    return totals

def _rows(scenario: Scenario, rejections: np.ndarray) -> list[SimulationRow]:
    return [
        SimulationRow(
            label=scenario.label,
            test=spec.label,
            sides="" if spec.family is TestFamily.ANOVA_F else spec.sides.value,
            variance_mode=spec.variance_mode.value,
            estimand=spec.estimand.value,
            runs=scenario.runs,
            rejections=int(count),
            is_null=scenario.is_null,
        )
        for spec, count in zip(scenario.tests, rejections)
    ]

def with_pitman(rows: list[SimulationRow], pitman: tuple[str, str]) -> list[SimulationRow]:
    """
    Attaches the empirical Pitman efficacy rate(numerator) / rate(denominator) to the
    numerator row of every scenario. A zero denominator rate leaves the ratio empty.
    """
    numerator, denominator = pitman
    rates = {(row.label, row.test): row.rate for row in rows}
    updated = []
    for row in rows:
        if row.test == numerator:
            if (row.label, denominator) not in rates:
                raise ConfigurationError(f"Pitman denominator '{denominator}' is not run in scenario '{row.label}'")
            base = rates[(row.label, denominator)]
            row = replace(row, pitman=row.rate / base if base > 0 else None)
        updated.append(row)
    if not any(row.test == numerator for row in rows):
        raise ConfigurationError(f"Pitman numerator '{numerator}' is not run in any scenario")
    return updated

def run_scenario(scenario: Scenario, settings: SimulationSettings = SimulationSettings()) -> list[SimulationRow]:
    """
    Empirical rejection rates of every test of one scenario, computed in this process.

    Args:
        scenario (Scenario): The profile, its tests and its seed.
        settings (SimulationSettings): Integrator and permutation settings.

    Returns:
        list[SimulationRow]: One row per test, in the scenario's test order.
    """
    rejections = _simulate_runs(scenario, 1, scenario.runs, settings)
    logger.info(f"Scenario '{scenario.label}' finished: {scenario.runs} runs, {len(scenario.tests)} tests")
    return _rows(scenario, rejections)

def run_study(scenarios: list[Scenario], parallelism: int = 1, settings: SimulationSettings = SimulationSettings(),
              pitman: tuple[str, str] | None = None) -> SimulationTable:
    """
    Runs every scenario, spreading chunks of runs over `parallelism` worker processes.

    Rejection counts are integers reduced by scenario index, so the table does not
    depend on the number of workers or the order in which chunks finish.

    Args:
        scenarios (list[Scenario]): The study, in output order.
        parallelism (int): Number of worker processes; 1 runs in-process.
        settings (SimulationSettings): Integrator and permutation settings.
        pitman (tuple[str, str] | None): Test labels of an empirical Pitman efficacy ratio.

    Returns:
        SimulationTable: Rows grouped by scenario, tests in scenario order.
    """
    if not scenarios:
        raise InvalidInputError("A study needs at least one scenario")
    if parallelism < 1:
        raise InvalidInputError(f"Parallelism must be positive, got {parallelism}")
    logger.info(f"Running {len(scenarios)} scenario(s) with {parallelism} worker(s)")
    totals = _count_rejections(scenarios, settings, parallelism)
    rows = []
    for scenario, rejections in zip(scenarios, totals):
        rows.extend(_rows(scenario, rejections))
        logger.info(f"Scenario '{scenario.label}' finished: {scenario.runs} runs, {len(scenario.tests)} tests")
    if pitman is not None:
        rows = with_pitman(rows, pitman)
    return SimulationTable(rows=tuple(rows))

def anova_power(group_sizes, mu, sigma: float, alpha: float = 0.05) -> float:
    """Exact power of the ANOVA F-test under homogeneous sigma, from the non-central F."""
    sizes = np.asarray(group_sizes, dtype=float)
    mu = np.asarray(mu, dtype=float)
    df1, df2 = sizes.size - 1, int(sizes.sum()) - sizes.size
    grand_mean = np.sum(sizes * mu) / sizes.sum()
    noncentrality = float(np.sum(sizes * (mu - grand_mean) ** 2) / sigma ** 2)
    critical = stats.f.isf(alpha, df1, df2)
    if noncentrality == 0:
        return alpha
    return float(stats.ncf.sf(critical, df1, df2, noncentrality))

def _bracket_span(power, target: float, limit: int) -> float:
    high = 1.0
    for _ in range(limit):
        if power(high) >= target:
            return high
        high *= 2.0
    raise InvalidInputError(f"Target AOV power {target} is not reached within span {high}")

def calibrate_span(shape, group_sizes, sigma, target_power: float, alpha: float = 0.05, runs: int = 2000,
                   seed: int = 1, tolerance: float = 0.02,
                   settings: SimulationSettings = SimulationSettings()) -> float:
    """
    Finds the span s such that the ANOVA F-test has power `target_power` at mu = s * shape.

    Homogeneous sigma uses the exact non-central F power and a root search. Otherwise
    the AOV rejection rate is simulated with common random numbers (the same seed for
    every candidate span) and the span is bisected.

    Args:
        shape: Mean profile, length k, not constant.
        group_sizes: Group sizes, length k.
        sigma: Scalar or per-group standard deviations.
        target_power (float): Desired AOV power in (alpha, 1).
        alpha (float): Test level.
        runs (int): Runs per simulated rate.
        seed (int): Seed of the common random numbers.
        tolerance (float): Accepted distance between simulated and target power.
        settings (SimulationSettings): Simulation settings for the heterogeneous case.

    Returns:
        float: The calibrated span.
    """
    shape = np.asarray(shape, dtype=float)
    sizes = np.asarray(group_sizes, dtype=int)
    sigmas = np.broadcast_to(np.asarray(sigma, dtype=float), shape.shape)
    if shape.size != sizes.size:
        raise InvalidInputError(f"Shape has {shape.size} entries for {sizes.size} groups")
    if np.ptp(shape) == 0:
        raise InvalidInputError("A constant shape has no power to calibrate")
    if not alpha < target_power < 1:
        raise InvalidInputError(f"Target power must lie in ({alpha}, 1), got {target_power}")
    if np.all(sigmas == sigmas[0]):
        def excess(span: float) -> float:
            return anova_power(sizes, span * shape, float(sigmas[0]), alpha) - target_power

        high = _bracket_span(lambda span: excess(span) + target_power, target_power, limit=60)
        span = float(optimize.brentq(excess, 0.0, high, xtol=1e-10))
        logger.info(f"Calibrated span {span:.6f} for exact AOV power {target_power}")
        return span
    aov = (standard_spec("AOV", alpha=alpha),)

    def simulated_power(span: float) -> float:
        scenario = Scenario(label="calibration", group_sizes=tuple(sizes), mu=tuple(span * shape),
                            sigma=tuple(sigmas), runs=runs, tests=aov, alpha=alpha, seed=seed)
        return _simulate_runs(scenario, 1, runs, settings)[0] / runs

    low, high = 0.0, _bracket_span(simulated_power, target_power, limit=30)
    best_span, best_gap = high, abs(simulated_power(high) - target_power)
    for _ in range(40):
        middle = (low + high) / 2.0
        rate = simulated_power(middle)
        if abs(rate - target_power) < best_gap:
            best_span, best_gap = middle, abs(rate - target_power)
        if rate < target_power:
            low = middle
        else:
            high = middle
        if high - low < 1e-6 * high:
            break
    if best_gap > tolerance:
        logger.warning(f"Simulated AOV power misses target {target_power} by {best_gap:.3f} at span {best_span:.4f}")
    logger.info(f"Calibrated span {best_span:.6f} for simulated AOV power {target_power} ({runs} runs)")
    return best_span

def calibration_seed(seed: int) -> int:
    """Seed of the common random numbers that calibrate a scenario, spawned apart from its data streams."""
    return int(np.random.SeedSequence(seed).spawn(1)[0].generate_state(1)[0])

def _study_tests(entry: dict, alpha: float, settings: SimulationSettings) -> tuple[TestSpec, ...]:
    tests = entry.get("tests", "standard")
    overrides = {"alpha": alpha, "permutations": settings.permutations}
    if tests == "standard":
        return tuple(standard_spec(spec.label, **overrides) for spec in STANDARD_TEST_GRID)
    if not isinstance(tests, list) or not tests:
        raise ConfigurationError("Study 'tests' must be \"standard\" or a non-empty list")
    specs = []
    for item in tests:
        if isinstance(item, str):
            specs.append(standard_spec(item, **overrides))
        else:
            specs.append(TestSpec.from_dict({**overrides, **item}))
    return tuple(specs)

def build_scenarios(study: dict, settings: SimulationSettings = SimulationSettings(),
                    seed: int | None = None) -> tuple[list[Scenario], tuple[str, str] | None]:
    """
    Turns a parsed study file into scenarios. Every entry inherits the study's
    `defaults`; its means come from `mu`, from `shape` and `span`, or from `shape`
    calibrated to `target_aov_power`. Entries without a seed get the base seed plus
    their position.

    Args:
        study (dict): Parsed study file.
        settings (SimulationSettings): Supplies the permutation count and calibration settings.
        seed (int | None): Replaces the base seed of the study.

    Returns:
        tuple: The scenarios and the optional Pitman pair.
    """
    if "scenarios" not in study or not study["scenarios"]:
        raise ConfigurationError("Configuration Error: Study has no 'scenarios'")
    defaults = study.get("defaults", {})
    base_seed = int(seed if seed is not None else defaults.get("seed", 1))
    scenarios = []
    for position, raw in enumerate(study["scenarios"]):
        entry = {**defaults, **raw}
        for key in ("label", "group_sizes", "sigma", "runs"):
            if key not in entry:
                raise ConfigurationError(f"Configuration Error: Scenario {position + 1} is missing '{key}'")
        alpha = float(entry.get("alpha", 0.05))
        scenario_seed = int(raw["seed"]) if "seed" in raw and seed is None else base_seed + position
        if "mu" in entry:
            mu = entry["mu"]
        elif "shape" in entry and "span" in entry:
            mu = float(entry["span"]) * np.asarray(entry["shape"], dtype=float)
        elif "shape" in entry and "target_aov_power" in entry:
            span = calibrate_span(entry["shape"], entry["group_sizes"], entry["sigma"], float(entry["target_aov_power"]),
                                  alpha=alpha, seed=calibration_seed(scenario_seed), settings=settings)
            mu = span * np.asarray(entry["shape"], dtype=float)
        else:
            raise ConfigurationError(
                f"Configuration Error: Scenario '{entry['label']}' needs 'mu', 'shape' + 'span' or 'shape' + 'target_aov_power'"
            )
        scenarios.append(Scenario(
            label=str(entry["label"]), group_sizes=entry["group_sizes"], mu=mu, sigma=entry["sigma"],
            runs=int(entry["runs"]), tests=_study_tests(entry, alpha, settings), alpha=alpha, seed=scenario_seed,
        ))
    pitman = study.get("pitman")
    if pitman is not None and (not isinstance(pitman, list) or len(pitman) != 2):
        raise ConfigurationError("Configuration Error: 'pitman' must list a numerator and a denominator test label")
    return scenarios, tuple(pitman) if pitman is not None else None

class PowerSimulationEngine:
    def __init__(self, config: dict):
        """
        Initializes the simulation engine, loads, and validates the configuration.

        Args:
            config (dict): The loaded configuration from config.yaml.
        """
        self.config = config
        self._validate_config()
        self.settings = SimulationSettings.from_config(self.config)
        self.parallelism = int(self.config["simulation"]["parallel"])
        logger.info("Power Simulation Engine Initialized.")

    def _validate_config(self):
        """
        Checks the sections every engine needs, then the simulation-specific ranges.
        Fails fast on startup if the config is invalid.
        """
        validate_config(self.config)
        section = self.config["simulation"]
        if int(section["parallel"]) < 1:
            raise ConfigurationError("Configuration Error: 'simulation.parallel' must be at least 1")
        if int(section["permutations"]) < 1:
            raise ConfigurationError("Configuration Error: 'simulation.permutations' must be at least 1")
        if not section["conservative_below"] < section["liberal_above"]:
            raise ConfigurationError("Configuration Error: 'conservative_below' must be below 'liberal_above'")

    def run_study(self, study: dict, parallelism: int | None = None, seed: int | None = None) -> SimulationTable:
        """
        Builds the scenarios of a parsed study file and runs them.

        Args:
            study (dict): Parsed study file.
            parallelism (int | None): Worker processes; the configured value when None.
            seed (int | None): Replaces the study's base seed.

        Returns:
            SimulationTable: The empirical size and power table.
        """
        scenarios, pitman = build_scenarios(study, self.settings, seed)
        return run_study(scenarios, parallelism or self.parallelism, self.settings, pitman)

    def calibrate(self, shape, group_sizes, sigma, target_power: float, alpha: float = 0.05,
                  runs: int = 2000, seed: int = 1) -> float:
        return calibrate_span(shape, group_sizes, sigma, target_power, alpha=alpha, runs=runs, seed=seed,
                              settings=self.settings)
