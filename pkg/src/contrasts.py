# Import Libraries
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from src.exceptions import IngestError, InvalidDesignError, InvalidInputError
import logging
import numpy as np
import polars as pl

# Initialization
logger = logging.getLogger(__name__)
ROW_SUM_TOLERANCE = 1e-12

class ContrastKind(str, Enum):
    GRAND_MEAN = "grandmean"
    WILLIAMS = "williams"
    CUSTOM = "custom"

@dataclass(frozen=True)
class ContrastMatrix:
    """
    A family of contrasts over k ordered groups.

    Attributes:
        coefficients (np.ndarray): Matrix of shape (xi, k); each row sums to zero.
        kind (ContrastKind): Which generator produced the rows.
        group_sizes (np.ndarray): Sample size of every group, length k.
    """
    coefficients: np.ndarray
    kind: ContrastKind
    group_sizes: np.ndarray

    def __post_init__(self):
        coefficients = np.atleast_2d(np.asarray(self.coefficients, dtype=float))
        group_sizes = np.asarray(self.group_sizes, dtype=int)
        _check_group_sizes(group_sizes)
        if coefficients.ndim != 2 or coefficients.shape[0] < 1:
            raise InvalidInputError("A contrast matrix needs at least one row")
        if coefficients.shape[1] != group_sizes.size:
            raise InvalidInputError(
                f"Contrast rows have {coefficients.shape[1]} coefficients but the design has {group_sizes.size} groups"
            )
        if not np.all(np.isfinite(coefficients)):
            raise InvalidInputError("Contrast coefficients must be finite")
        scale = np.maximum(np.abs(coefficients).max(axis=1), 1.0)
        if np.any(np.abs(coefficients.sum(axis=1)) > ROW_SUM_TOLERANCE * scale):
            raise InvalidInputError("Every contrast row must sum to zero")
        if np.any(np.all(coefficients == 0, axis=1)):
            raise InvalidInputError("A contrast row must not be all zero")
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "group_sizes", group_sizes)
        object.__setattr__(self, "kind", ContrastKind(self.kind))

    @property
    def n_contrasts(self) -> int:
        return self.coefficients.shape[0]

    @property
    def n_groups(self) -> int:
        return self.coefficients.shape[1]

def _check_group_sizes(group_sizes: np.ndarray):
    if group_sizes.ndim != 1 or group_sizes.size < 2:
        raise InvalidDesignError(f"A one-way design needs at least 2 groups, got {group_sizes.size}")
    if np.any(group_sizes < 1):
        raise InvalidDesignError("Every group size must be at least 1")

def grand_mean_contrasts(group_sizes) -> ContrastMatrix:
    """
    Comparisons of every group against the size-weighted grand mean.

    Row h has c_hh = 1 - n_h/N and c_hj = -n_j/N for j != h ("group minus grand mean"),
    so an increasing profile gives positive statistics for the upper groups. Negating
    the matrix recovers the "others minus self" orientation.

    Args:
        group_sizes: Positive group sizes n_1..n_k.

    Returns:
        ContrastMatrix: k rows of kind GRAND_MEAN.
    """
    sizes = np.asarray(group_sizes, dtype=int)
    _check_group_sizes(sizes)
    shares = sizes / sizes.sum()
    coefficients = np.eye(sizes.size) - np.tile(shares, (sizes.size, 1))
    return ContrastMatrix(coefficients=coefficients, kind=ContrastKind.GRAND_MEAN, group_sizes=sizes)

def williams_contrasts(group_sizes) -> ContrastMatrix:
    """
    Williams-type comparisons of the control (first group) against the size-weighted
    average of the top j dose groups, j = 1..k-1.

    Args:
        group_sizes: Positive group sizes, control first.

    Returns:
        ContrastMatrix: k-1 rows of kind WILLIAMS.
    """
    sizes = np.asarray(group_sizes, dtype=int)
    _check_group_sizes(sizes)
    k = sizes.size
    coefficients = np.zeros((k - 1, k))
    for j in range(1, k):
        top = slice(k - j, k)
        coefficients[j - 1, 0] = -1.0
        coefficients[j - 1, top] = sizes[top] / sizes[top].sum()
    return ContrastMatrix(coefficients=coefficients, kind=ContrastKind.WILLIAMS, group_sizes=sizes)

def contrast_correlation(cm: ContrastMatrix, mean_covariance: np.ndarray | None = None) -> np.ndarray:
    """
    Correlation matrix of the jointly distributed contrast statistics.

    With the default covariance diag(1/n_i) this is
    R_hl = sum_i c_hi c_li / n_i / sqrt(sum_i c_hi^2 / n_i * sum_i c_li^2 / n_i).
    Passing the estimated covariance of the group means (e.g. a sandwich estimate)
    gives the correlation of the correspondingly studentized contrasts.

    Args:
        cm (ContrastMatrix): The contrast family.
        mean_covariance (np.ndarray | None): k x k covariance of the group means.

    Returns:
        np.ndarray: Symmetric xi x xi correlation matrix with unit diagonal.
    """
    if mean_covariance is None:
        mean_covariance = np.diag(1.0 / cm.group_sizes)
    mean_covariance = np.asarray(mean_covariance, dtype=float)
    if mean_covariance.shape != (cm.n_groups, cm.n_groups):
        raise InvalidInputError("Mean covariance does not match the number of groups")
    covariance = cm.coefficients @ mean_covariance @ cm.coefficients.T
    scale = np.sqrt(np.diag(covariance))
    correlation = covariance / np.outer(scale, scale)
    correlation = np.clip((correlation + correlation.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(correlation, 1.0)
    return correlation

def validate_correlation(correlation: np.ndarray, tolerance: float = 1e-10) -> np.ndarray:
    """Checks symmetry, unit diagonal, bounds and positive semi-definiteness."""
    correlation = np.atleast_2d(np.asarray(correlation, dtype=float))
    if correlation.shape[0] != correlation.shape[1]:
        raise InvalidInputError("Correlation matrix must be square")
    if not np.allclose(correlation, correlation.T, atol=1e-12):
        raise InvalidInputError("Correlation matrix must be symmetric")
    if not np.allclose(np.diag(correlation), 1.0, atol=1e-12):
        raise InvalidInputError("Correlation matrix must have a unit diagonal")
    if np.any(np.abs(correlation) > 1.0 + 1e-12):
        raise InvalidInputError("Correlation entries must lie in [-1, 1]")
    if np.linalg.eigvalsh(correlation).min() < -tolerance:
        raise InvalidInputError("Correlation matrix is not positive semi-definite")
    return correlation

def load_contrast_file(path: Path, group_sizes) -> ContrastMatrix:
    """
    Reads a custom contrast matrix: one row per contrast, k comma-separated reals, no header.

    Args:
        path (Path): The CSV file.
        group_sizes: Group sizes of the design the contrasts will be applied to.

    Returns:
        ContrastMatrix: Matrix of kind CUSTOM.
    """
    path = Path(path)
    logger.info(f"Reading contrast file: {path}")
    if not path.exists() or path.stat().st_size == 0:
        raise IngestError(f"Contrast file {path} is missing or empty")
    frame = pl.read_csv(path, has_header=False, infer_schema_length=0)
    try:
        coefficients = frame.select(pl.all().str.strip_chars().cast(pl.Float64)).to_numpy()
    except (pl.exceptions.InvalidOperationError, pl.exceptions.ComputeError) as error:
        raise IngestError(f"Contrast file {path} contains non-numeric coefficients") from error
    return ContrastMatrix(coefficients=coefficients, kind=ContrastKind.CUSTOM, group_sizes=group_sizes)

def build_contrasts(kind: ContrastKind, group_sizes, contrast_file: Path | None = None) -> ContrastMatrix:
    """Dispatches to the generator named by `kind`."""
    kind = ContrastKind(kind)
    if kind is ContrastKind.GRAND_MEAN:
        return grand_mean_contrasts(group_sizes)
    if kind is ContrastKind.WILLIAMS:
        return williams_contrasts(group_sizes)
    if contrast_file is None:
        raise InvalidInputError("Custom contrasts need a contrast file")
    return load_contrast_file(contrast_file, group_sizes)
