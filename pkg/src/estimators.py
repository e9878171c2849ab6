# Import Libraries
from dataclasses import dataclass
from enum import Enum
from src.contrasts import ContrastMatrix
from src.exceptions import DegenerateVarianceError, InvalidDesignError, InvalidInputError
from src.isotonic import Direction, pava
import logging
import numpy as np

# Initialization
logger = logging.getLogger(__name__)

class VarianceMode(str, Enum):
    POOLED = "pooled"
    SANDWICH = "sandwich"

class HCType(str, Enum):
    HC0 = "hc0"
    HC1 = "hc1"
    HC2 = "hc2"
    HC3 = "hc3"

class Estimand(str, Enum):
    ARITHMETIC_MEANS = "arithmetic"
    PAVA_MEANS = "pava"

class Studentize(str, Enum):
    FULL = "full"
    SIGMA_ONLY = "sigma-only"

@dataclass(frozen=True)
class OneWayLayout:
    """
    Observations of a one-way layout, grouped by ordered treatment level.
    The first level is the control for Williams-type comparisons.
    """
    levels: tuple[str, ...]
    responses: tuple[np.ndarray, ...]

    def __post_init__(self):
        levels = tuple(str(level) for level in self.levels)
        responses = tuple(np.asarray(group, dtype=float).ravel() for group in self.responses)
        if len(levels) != len(responses):
            raise InvalidInputError(f"Got {len(levels)} level labels for {len(responses)} groups")
        if len(levels) < 2:
            raise InvalidDesignError(f"A one-way layout needs at least 2 groups, got {len(levels)}")
        if len(set(levels)) != len(levels):
            raise InvalidInputError("Level labels must be unique")
        for level, group in zip(levels, responses):
            if group.size < 2:
                raise InvalidDesignError(f"Group '{level}' has {group.size} observation(s); at least 2 are needed")
            if not np.all(np.isfinite(group)):
                raise InvalidInputError(f"Group '{level}' contains non-finite responses")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "responses", responses)

    @classmethod
    def from_groups(cls, groups: dict) -> "OneWayLayout":
        """Builds a layout from an insertion-ordered mapping of level label to observations."""
        return cls(levels=tuple(groups.keys()), responses=tuple(groups.values()))

    @property
    def k(self) -> int:
        return len(self.levels)

    @property
    def group_sizes(self) -> np.ndarray:
        return np.array([group.size for group in self.responses], dtype=int)

    @property
    def n_total(self) -> int:
        return int(self.group_sizes.sum())

    @property
    def is_balanced(self) -> bool:
        return bool(np.all(self.group_sizes == self.group_sizes[0]))

    def pooled_responses(self) -> np.ndarray:
        return np.concatenate(self.responses)

    def transformed(self, scale: float = 1.0, shift: float = 0.0) -> "OneWayLayout":
        """Returns a copy with every observation mapped to scale * x + shift."""
        return OneWayLayout(levels=self.levels, responses=tuple(scale * group + shift for group in self.responses))

@dataclass(frozen=True)
class GroupEstimates:
    """
    Group-level summaries of a layout and the estimated covariance of the group means.

    Attributes:
        group_sizes (np.ndarray): n_i.
        means (np.ndarray): Arithmetic means per group.
        group_variances (np.ndarray): Unbiased variances s_i^2 (denominator n_i - 1).
        pooled_s2 (float): Mean squared error S^2 = sum (n_i - 1) s_i^2 / (N - k).
        df (int): Error degrees of freedom N - k.
        grand_mean (float): Size-weighted mean of all observations.
        mean_covariance (np.ndarray): Diagonal k x k covariance of the group means.
        variance_mode (VarianceMode): Which estimator produced mean_covariance.
        hc (HCType): Sandwich flavour (meaningful in sandwich mode only).
    """
    group_sizes: np.ndarray
    means: np.ndarray
    group_variances: np.ndarray
    pooled_s2: float
    df: int
    grand_mean: float
    mean_covariance: np.ndarray
    variance_mode: VarianceMode = VarianceMode.POOLED
    hc: HCType = HCType.HC3

    @property
    def k(self) -> int:
        return self.means.size

def _sandwich_variances(sizes: np.ndarray, variances: np.ndarray, hc: HCType) -> np.ndarray:
    """
    Closed forms of the heteroskedasticity-consistent variance of a group mean in the
    cell-means model, where every observation of group i has leverage 1/n_i and the
    residual sum of squares of the group is (n_i - 1) s_i^2.
    """
    residual_ss = (sizes - 1) * variances
    if hc is HCType.HC0:
        return residual_ss / sizes ** 2
    if hc is HCType.HC1:
        total, k = sizes.sum(), sizes.size
        return total / (total - k) * residual_ss / sizes ** 2
    if hc is HCType.HC2:
        return variances / sizes
    return variances / (sizes - 1)

def summarize(layout: OneWayLayout, variance_mode: VarianceMode = VarianceMode.POOLED,
              hc: HCType = HCType.HC3) -> GroupEstimates:
    """
    Computes group means, variances and the covariance of the group means.

    Args:
        layout (OneWayLayout): The observations.
        variance_mode (VarianceMode): POOLED gives diag(S^2 / n_i); SANDWICH gives the
            heteroskedasticity-consistent diagonal of the chosen HC flavour.
        hc (HCType): Sandwich flavour, HC3 by default.

    Returns:
        GroupEstimates: The summaries.
    """
    variance_mode, hc = VarianceMode(variance_mode), HCType(hc)
    sizes = layout.group_sizes
    means = np.array([group.mean() for group in layout.responses])
    variances = np.array([group.var(ddof=1) for group in layout.responses])
    df = layout.n_total - layout.k
    pooled_s2 = float(np.sum((sizes - 1) * variances) / df)
    grand_mean = float(np.sum(sizes * means) / sizes.sum())
    if variance_mode is VarianceMode.SANDWICH:
        if np.any(variances <= 0):
            flat = [level for level, variance in zip(layout.levels, variances) if variance <= 0]
            raise DegenerateVarianceError(f"Sandwich covariance needs within-group variation; constant group(s): {flat}")
        diagonal = _sandwich_variances(sizes, variances, hc)
    else:
        diagonal = pooled_s2 / sizes
    return GroupEstimates(
        group_sizes=sizes, means=means, group_variances=variances, pooled_s2=pooled_s2, df=df,
        grand_mean=grand_mean, mean_covariance=np.diag(diagonal), variance_mode=variance_mode, hc=hc,
    )

def estimand_means(est: GroupEstimates, estimand: Estimand, direction: Direction = Direction.INCREASING) -> np.ndarray:
    """Arithmetic means, or their isotonic fit with weights n_i."""
    if Estimand(estimand) is Estimand.PAVA_MEANS:
        return pava(est.means, est.group_sizes, direction).fitted
    return est.means

def contrast_standard_errors(est: GroupEstimates, cm: ContrastMatrix,
                             studentize: Studentize = Studentize.FULL) -> np.ndarray:
    """Standard error of every contrast estimate, sqrt(c' V c); S alone in sigma-only mode."""
    if cm.n_groups != est.k:
        raise InvalidInputError(f"Contrast matrix has {cm.n_groups} columns but there are {est.k} groups")
    if Studentize(studentize) is Studentize.SIGMA_ONLY:
        errors = np.full(cm.n_contrasts, np.sqrt(est.pooled_s2))
    else:
        errors = np.sqrt(np.einsum("hi,ij,hj->h", cm.coefficients, est.mean_covariance, cm.coefficients))
    if np.any(errors <= 0):
        raise DegenerateVarianceError("A contrast has zero estimated standard error")
    return errors

def contrast_statistics(est: GroupEstimates, cm: ContrastMatrix,
                        estimand: Estimand = Estimand.ARITHMETIC_MEANS,
                        direction: Direction = Direction.INCREASING,
                        studentize: Studentize = Studentize.FULL) -> np.ndarray:
    """
    Studentized contrast statistics t_h = c_h' m / sqrt(c_h' V c_h).

    With pooled variance the denominator is S * sqrt(sum_i c_hi^2 / n_i). The isotonic
    fit always uses weights n_i; the variance mode only changes the denominator.

    Args:
        est (GroupEstimates): Group summaries.
        cm (ContrastMatrix): The contrast family.
        estimand (Estimand): Arithmetic means or PAVA-restricted means.
        direction (Direction): Order restriction used for PAVA means.
        studentize (Studentize): FULL standard errors, or S alone for comparison runs.

    Returns:
        np.ndarray: One statistic per contrast row.
    """
    errors = contrast_standard_errors(est, cm, studentize)
    return cm.coefficients @ estimand_means(est, estimand, direction) / errors

def group_summary(layout: OneWayLayout, direction: Direction = Direction.INCREASING) -> list[dict]:
    """Per-level n, mean, standard deviation and PAVA mean, enough to redraw a boxplot summary."""
    est = summarize(layout)
    restricted = pava(est.means, est.group_sizes, direction).fitted
    return [
        {"level": level, "n": int(n), "mean": float(mean), "sd": float(np.sqrt(variance)), "pava_mean": float(fit)}
        for level, n, mean, variance, fit in zip(layout.levels, est.group_sizes, est.means, est.group_variances, restricted)
    ]
