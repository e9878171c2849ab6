# Import Libraries
from dataclasses import dataclass
from enum import Enum
from src.exceptions import InvalidInputError
import logging
import numpy as np

# Initialization
logger = logging.getLogger(__name__)

class Direction(str, Enum):
    """A-priori direction of the ordered alternative."""
    INCREASING = "increasing"
    DECREASING = "decreasing"

    @property
    def sign(self) -> float:
        return 1.0 if self is Direction.INCREASING else -1.0

@dataclass(frozen=True)
class IsotonicInput:
    """
    Group means, their positive weights and the order restriction to fit them under.
    Arrays are converted to float and validated on construction.
    """
    values: np.ndarray
    weights: np.ndarray
    direction: Direction = Direction.INCREASING

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise InvalidInputError("Isotonic input must be a non-empty vector")
        if weights.shape != values.shape:
            raise InvalidInputError(f"Got {values.size} values but {weights.size} weights")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("Isotonic input values must be finite")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise InvalidInputError("Isotonic weights must be finite and strictly positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "direction", Direction(self.direction))

@dataclass(frozen=True)
class Block:
    """A level set of the fit: indices start..stop-1 share `value`."""
    start: int
    stop: int
    value: float

@dataclass(frozen=True)
class IsotonicFit:
    fitted: np.ndarray
    blocks: tuple[Block, ...]

def _pool_increasing(values: np.ndarray, weights: np.ndarray) -> list[list]:
    """
    Stack-of-blocks pool-adjacent-violators for a non-decreasing fit.
    Each stack entry is [pooled value, pooled weight, start, stop]. Adjacent blocks
    with equal pooled values are left unmerged.
    """
    stack: list[list] = []
    for i, (value, weight) in enumerate(zip(values, weights)):
        stack.append([value, weight, i, i + 1])
        while len(stack) >= 2 and stack[-2][0] > stack[-1][0]:
            upper = stack.pop()
            lower = stack[-1]
            total = lower[1] + upper[1]
            lower[0] = (lower[1] * lower[0] + upper[1] * upper[0]) / total
            lower[1] = total
            lower[3] = upper[3]
    return stack

def pava(values, weights=None, direction: Direction = Direction.INCREASING) -> IsotonicFit:
    """
    Weighted isotonic regression by pool-adjacent-violators.

    The decreasing fit is obtained by negating the values, fitting the increasing
    order and negating the result back.

    Args:
        values: Group means, length k.
        weights: Positive weights, length k (group sizes in the test pipeline). Defaults to ones.
        direction (Direction): Order restriction of the fit.

    Returns:
        IsotonicFit: The fitted vector and its level-set blocks.
    """
    if weights is None:
        weights = np.ones(np.size(values))
    data = IsotonicInput(values, weights, direction)
    sign = data.direction.sign
    stack = _pool_increasing(sign * data.values, data.weights)
    fitted = np.empty(data.values.size)
    blocks = []
    for value, _, start, stop in stack:
        fitted[start:stop] = sign * value
        blocks.append(Block(start=start, stop=stop, value=float(sign * value)))
    return IsotonicFit(fitted=fitted, blocks=tuple(blocks))

def isotonic_fit_batch(values: np.ndarray, weights: np.ndarray, direction: Direction = Direction.INCREASING) -> np.ndarray:
    """
    Isotonic fits for many mean vectors at once, one per row.

    Uses the max-min characterisation fitted_i = max_{j<=i} min_{l>=i} Av(j..l),
    where Av is the weighted average of a contiguous range. It costs O(k^3) per row,
    which is negligible for the handful of treatment levels a one-way layout has, and
    it vectorises over rows where the stack algorithm cannot.

    Args:
        values (np.ndarray): Array of shape (rows, k).
        weights (np.ndarray): Positive weights of length k shared by every row.
        direction (Direction): Order restriction of the fits.

    Returns:
        np.ndarray: Fitted values, shape (rows, k).
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    weights = np.asarray(weights, dtype=float)
    if values.shape[1] != weights.size or np.any(weights <= 0):
        raise InvalidInputError("Batch isotonic fit needs one positive weight per column")
    sign = Direction(direction).sign
    rows, k = values.shape
    cum_weight = np.concatenate([[0.0], np.cumsum(weights)])
    cum_value = np.concatenate([np.zeros((rows, 1)), np.cumsum(sign * values * weights, axis=1)], axis=1)
    # averages[:, j, l] holds the weighted mean of columns j..l (only j <= l is used)
    averages = np.full((rows, k, k), np.inf)
    for j in range(k):
        for l in range(j, k):
            averages[:, j, l] = (cum_value[:, l + 1] - cum_value[:, j]) / (cum_weight[l + 1] - cum_weight[j])
    fitted = np.empty((rows, k))
    for i in range(k):
        fitted[:, i] = averages[:, : i + 1, i:].min(axis=2).max(axis=1)
    return sign * fitted

def weighted_sse(fitted, values, weights) -> float:
    """Weighted squared distance between a fit and its input."""
    fitted, values, weights = (np.asarray(a, dtype=float) for a in (fitted, values, weights))
    return float(np.sum(weights * (fitted - values) ** 2))
