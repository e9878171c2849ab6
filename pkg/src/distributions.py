# Import Libraries
from dataclasses import dataclass
from functools import lru_cache
from enum import Enum
from scipy import optimize, special
from scipy.stats import chi, qmc
from src.exceptions import InvalidInputError, NumericError
import logging
import math
import numpy as np

# Initialization
logger = logging.getLogger(__name__)
DEFAULT_MVT_SEED = 1729
QUANTILE_BRACKET = (0.0, 50.0)
QUANTILE_TOLERANCE = 1e-4
_UNIFORM_CLIP = 1e-15

class Sides(str, Enum):
    ONE_SIDED = "one"
    TWO_SIDED = "two"

@dataclass(frozen=True)
class MvtSettings:
    """
    Accuracy and reproducibility knobs of the multivariate-t integrator.

    Attributes:
        abs_tolerance (float): Target for the 3.5-sigma error bound.
        seed (int): Root seed; every randomization gets its own child stream.
        randomizations (int): Number of independent random shifts of the Sobol' point set.
        initial_points (int): Points per randomization in the first pass (a power of two).
        max_points (int): Points per randomization after which iteration stops.
        jitter (float): Diagonal load used when the correlation matrix is singular.
    """
    abs_tolerance: float = 1e-4
    seed: int = DEFAULT_MVT_SEED
    randomizations: int = 12
    initial_points: int = 1024
    max_points: int = 2 ** 17
    jitter: float = 1e-10

    @classmethod
    def from_config(cls, section: dict, abs_tolerance: float | None = None) -> "MvtSettings":
        """Builds settings from the `mvt` section of config.yaml, optionally overriding the tolerance."""
        return cls(
            abs_tolerance=float(abs_tolerance if abs_tolerance is not None else section["abs_tolerance"]),
            seed=int(section["seed"]),
            randomizations=int(section["randomizations"]),
            initial_points=int(section["initial_points"]),
            max_points=int(section["max_points"]),
            jitter=float(section["jitter"]),
        )

    def rectangle(self, lower, upper, correlation, df: int) -> "ProbabilityEstimate":
        problem = MvtProblem(lower=lower, upper=upper, correlation=correlation, df=df,
                             abs_tolerance=self.abs_tolerance, max_samples=self.max_points)
        return mvt_rectangle(problem, seed=self.seed, randomizations=self.randomizations,
                             initial_points=self.initial_points, jitter=self.jitter)

@dataclass(frozen=True)
class MvtProblem:
    lower: np.ndarray
    upper: np.ndarray
    correlation: np.ndarray
    df: int
    abs_tolerance: float = 1e-4
    max_samples: int = 2 ** 17

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        correlation = np.atleast_2d(np.asarray(self.correlation, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise InvalidInputError("Lower and upper limits must be vectors of equal length")
        if correlation.shape != (lower.size, lower.size):
            raise InvalidInputError("Correlation matrix does not match the number of limits")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)) or np.any(lower >= upper):
            raise InvalidInputError("Every lower limit must be strictly below its upper limit")
        if self.df < 1:
            raise InvalidInputError(f"Degrees of freedom must be at least 1, got {self.df}")
        if self.abs_tolerance <= 0 or self.max_samples < 1:
            raise InvalidInputError("Tolerance and sample budget must be positive")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "correlation", correlation)

@dataclass(frozen=True)
class ProbabilityEstimate:
    value: float
    error_bound: float
    samples: int = 0
    converged: bool = True

def _t_cdf_values(x: np.ndarray, df: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        tail = 0.5 * special.betainc(df / 2.0, 0.5, df / (df + x * x))
    tail = np.where(np.isinf(x), 0.0, tail)
    return np.where(x > 0, 1.0 - tail, tail)

def t_cdf(x: float, df: float) -> float:
    """
    Student t distribution function via the regularized incomplete beta function.

    Args:
        x (float): Evaluation point; +/-inf are accepted.
        df (float): Degrees of freedom, at least 1.

    Returns:
        float: P(T <= x).
    """
    if df < 1:
        raise InvalidInputError(f"Degrees of freedom must be at least 1, got {df}")
    if math.isnan(x):
        raise InvalidInputError("t_cdf is undefined at NaN")
    return float(_t_cdf_values(x, df))

def f_cdf(x: float, df1: float, df2: float) -> float:
    """
    F distribution function via the regularized incomplete beta function.

    Args:
        x (float): Non-negative evaluation point.
        df1 (float): Numerator degrees of freedom.
        df2 (float): Denominator degrees of freedom.

    Returns:
        float: P(F <= x).
    """
    if math.isnan(x) or x < 0:
        raise InvalidInputError(f"f_cdf needs a non-negative argument, got {x}")
    if df1 < 1 or df2 < 1:
        raise InvalidInputError("Degrees of freedom must be at least 1")
    if math.isinf(x):
        return 1.0
    return float(special.betainc(df1 / 2.0, df2 / 2.0, df1 * x / (df1 * x + df2)))

def _cholesky(correlation: np.ndarray, jitter: float) -> np.ndarray:
    try:
        return np.linalg.cholesky(correlation)
    except np.linalg.LinAlgError:
        logger.debug(f"Correlation matrix is singular; retrying Cholesky with jitter {jitter}")
    try:
        return np.linalg.cholesky(correlation + jitter * np.eye(correlation.shape[0]))
    except np.linalg.LinAlgError as error:
        raise NumericError("Correlation matrix is not positive semi-definite within the jitter tolerance") from error

@lru_cache(maxsize=32)
def _sobol_points(dimension: int, count: int) -> np.ndarray:
    """First `count` points (a power of two) of the unscrambled Sobol' sequence."""
    points = qmc.Sobol(d=dimension, scramble=False).random_base2(int(math.log2(count)))
    points.setflags(write=False)
    return points

def _separation_of_variables(points: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                             cholesky: np.ndarray, df: int) -> np.ndarray:
    """
    Integrand of the rectangle probability after the Genz transformation.
    The last coordinate of every point drives the chi radial mixing that turns the
    normal probability into a t probability.
    """
    dimension = lower.size
    points = np.clip(points, _UNIFORM_CLIP, 1.0 - _UNIFORM_CLIP)
    radius = chi.ppf(points[:, -1], df) / math.sqrt(df)
    scaled_lower = np.outer(radius, lower)
    scaled_upper = np.outer(radius, upper)
    diagonal = np.diag(cholesky)
    normals = np.zeros((points.shape[0], dimension - 1))
    low = special.ndtr(scaled_lower[:, 0] / diagonal[0])
    high = special.ndtr(scaled_upper[:, 0] / diagonal[0])
    weight = high - low
    for i in range(1, dimension):
        position = np.clip(low + points[:, i - 1] * (high - low), _UNIFORM_CLIP, 1.0 - _UNIFORM_CLIP)
        normals[:, i - 1] = special.ndtri(position)
        shift = normals[:, :i] @ cholesky[i, :i]
        low = special.ndtr((scaled_lower[:, i] - shift) / diagonal[i])
        high = special.ndtr((scaled_upper[:, i] - shift) / diagonal[i])
        weight = weight * (high - low)
    return weight

def mvt_rectangle(problem: MvtProblem, seed: int = DEFAULT_MVT_SEED, randomizations: int = 12,
                  initial_points: int = 1024, jitter: float = 1e-10) -> ProbabilityEstimate:
    """
    Probability that a central multivariate t vector falls inside a rectangle.

    Randomized quasi-Monte Carlo over the separation-of-variables form: variables are
    reordered so the most restrictive interval comes first, the correlation is
    Cholesky-factorized (with diagonal jitter when singular), and `randomizations`
    independent random shifts (Cranley-Patterson rotations) of one Sobol' point set are
    extended by doubling until the
    3.5-sigma spread of their means is within tolerance or the budget is spent.
    Every randomization has a fixed child seed, so results do not depend on how the
    work is scheduled.

    Args:
        problem (MvtProblem): Limits, correlation, degrees of freedom and accuracy target.
        seed (int): Root seed of the random shifts.
        randomizations (int): Number of shifts (at least 2).
        initial_points (int): Points per shift in the first pass.
        jitter (float): Diagonal load for semi-definite correlation matrices.

    Returns:
        ProbabilityEstimate: Value in [0, 1] and its error bound.
    """
    lower, upper, df = problem.lower, problem.upper, problem.df
    if lower.size == 1:
        value = float(_t_cdf_values(upper[0], df) - _t_cdf_values(lower[0], df))
        return ProbabilityEstimate(value=min(max(value, 0.0), 1.0), error_bound=0.0)
    if randomizations < 2:
        raise InvalidInputError("At least two randomizations are needed for an error estimate")
    if initial_points < 1 or initial_points & (initial_points - 1):
        raise InvalidInputError(f"Initial points must be a power of two, got {initial_points}")
    marginal = _t_cdf_values(upper, df) - _t_cdf_values(lower, df)
    order = np.argsort(marginal, kind="stable")
    lower, upper = lower[order], upper[order]
    cholesky = _cholesky(problem.correlation[np.ix_(order, order)], jitter)
    dimension = lower.size
    streams = np.random.SeedSequence(seed).spawn(randomizations)
    shifts = np.stack([np.random.default_rng(stream).random(dimension) for stream in streams])
    sums = np.zeros(randomizations)
    generated = 0
    batch = initial_points
    while True:
        base = _sobol_points(dimension, generated + batch)[generated:]
        points = (base[None, :, :] + shifts[:, None, :]) % 1.0
        values = _separation_of_variables(points.reshape(-1, dimension), lower, upper, cholesky, df)
        sums += values.reshape(randomizations, batch).sum(axis=1)
        generated += batch
        estimates = sums / generated
        error_bound = 3.5 * estimates.std(ddof=1) / math.sqrt(randomizations)
        if error_bound <= problem.abs_tolerance or 2 * generated > problem.max_samples:
            break
        batch = generated
    value = min(max(float(estimates.mean()), 0.0), 1.0)
    converged = error_bound <= problem.abs_tolerance
    if error_bound > 10 * problem.abs_tolerance:
        logger.warning(f"MVT accuracy target {problem.abs_tolerance} missed: error bound {error_bound:.2e} after {generated} points per randomization")
    logger.debug(f"MVT rectangle ({lower.size}-dim, df={df}): {value:.6f} +/- {error_bound:.1e} from {generated * randomizations} points")
    return ProbabilityEstimate(value=value, error_bound=float(error_bound),
                               samples=generated * randomizations, converged=converged)

def max_statistic_cdf(threshold: float, correlation: np.ndarray, df: int, sides: Sides,
                      settings: MvtSettings = MvtSettings()) -> ProbabilityEstimate:
    """
    P(max T_i <= threshold) for one-sided, or P(max |T_i| <= threshold) for two-sided tests.
    A non-positive two-sided threshold has probability zero.
    """
    dimension = np.atleast_2d(correlation).shape[0]
    upper = np.full(dimension, float(threshold))
    if Sides(sides) is Sides.TWO_SIDED:
        if threshold <= 0:
            return ProbabilityEstimate(value=0.0, error_bound=0.0)
        lower = -upper
    else:
        lower = np.full(dimension, -np.inf)
    return settings.rectangle(lower, upper, correlation, df)

def mvt_equicoordinate_quantile(prob: float, correlation: np.ndarray, df: int, sides: Sides,
                                settings: MvtSettings = MvtSettings()) -> float:
    """
    Equicoordinate quantile of the multivariate t: the critical value of max-t tests
    and the half-width multiplier of simultaneous confidence intervals.

    Args:
        prob (float): Coverage probability in (0, 1).
        correlation (np.ndarray): Correlation matrix of the t vector.
        df (int): Degrees of freedom.
        sides (Sides): One-sided (max T) or two-sided (max |T|).
        settings (MvtSettings): Integrator settings.

    Returns:
        float: q with P(max <= q) = prob.
    """
    if not 0 < prob < 1:
        raise InvalidInputError(f"Quantile probability must lie in (0, 1), got {prob}")

    def coverage(q: float) -> float:
        return max_statistic_cdf(q, correlation, df, sides, settings).value - prob

    low, high = QUANTILE_BRACKET
    at_low, at_high = coverage(low), coverage(high)
    if at_low > 0 or at_high < 0:
        raise NumericError(f"Could not bracket the {prob} equicoordinate quantile in [{low}, {high}]")
    if at_low == 0:
        return low
    quantile = optimize.brentq(coverage, low, high, xtol=QUANTILE_TOLERANCE)
    logger.debug(f"Equicoordinate quantile ({Sides(sides).value}-sided, prob={prob}, df={df}): {quantile:.4f}")
    return float(quantile)
