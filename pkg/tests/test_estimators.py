# Import Libraries
from src.contrasts import grand_mean_contrasts, williams_contrasts
from src.estimators import (
    Estimand, HCType, OneWayLayout, Studentize, VarianceMode,
    contrast_standard_errors, contrast_statistics, group_summary, summarize,
)
from src.exceptions import DegenerateVarianceError, InvalidDesignError, InvalidInputError
from src.isotonic import Direction
import numpy as np
import pytest

def test_layout_properties(balanced_layout):
    assert balanced_layout.k == 4
    assert balanced_layout.levels == ("0", "1", "2", "3")
    assert balanced_layout.n_total == 20
    assert balanced_layout.is_balanced

@pytest.mark.parametrize("groups, error", [
    ({"a": [1.0, 2.0]}, InvalidDesignError),
    ({"a": [1.0, 2.0], "b": [3.0]}, InvalidDesignError),
    ({"a": [1.0, np.inf], "b": [3.0, 4.0]}, InvalidInputError),
])
def test_layout_validation(groups, error):
    """Uses @parametrize to check k >= 2, n_i >= 2 and finite responses."""
    with pytest.raises(error):
        OneWayLayout.from_groups(groups)

def test_small_group_is_named():
    with pytest.raises(InvalidDesignError, match="'b'"):
        OneWayLayout.from_groups({"a": [1.0, 2.0], "b": [3.0]})

def test_summarize_pooled(null_layout):
    """Every group of the null layout has mean 1 and variance 1."""
    est = summarize(null_layout)
    assert np.allclose(est.means, 1.0)
    assert np.allclose(est.group_variances, 1.0)
    assert est.pooled_s2 == pytest.approx(1.0)
    assert est.df == 6
    assert np.allclose(est.mean_covariance, np.diag([1 / 3] * 3))

def test_sandwich_hc3_equals_explicit_hat_matrix_formula():
    """
    HC3 from the cell-means design matrix, (X'X)^-1 X' diag(e^2 / (1 - h)^2) X (X'X)^-1,
    matches the closed form s_i^2 / (n_i - 1).
    """
    layout = OneWayLayout.from_groups({"a": [0.0, 2.0], "b": [1.0, 4.0, 4.0]})
    est = summarize(layout, VarianceMode.SANDWICH, HCType.HC3)
    design = np.zeros((5, 2))
    design[:2, 0] = 1.0
    design[2:, 1] = 1.0
    responses = layout.pooled_responses()
    bread = np.linalg.inv(design.T @ design)
    residuals = responses - design @ (bread @ design.T @ responses)
    leverage = np.einsum("ij,jk,ik->i", design, bread, design)
    meat = design.T @ np.diag(residuals ** 2 / (1 - leverage) ** 2) @ design
    assert np.allclose(est.mean_covariance, bread @ meat @ bread)

def test_sandwich_two_point_groups():
    """Groups (0, 2) have s^2 = 2, so HC3 gives 2 / (2 - 1) = 2 on the diagonal; pooled gives 1."""
    layout = OneWayLayout.from_groups({"a": [0.0, 2.0], "b": [0.0, 2.0]})
    assert np.allclose(summarize(layout, VarianceMode.SANDWICH).mean_covariance, np.diag([2.0, 2.0]))
    assert np.allclose(summarize(layout).mean_covariance, np.diag([1.0, 1.0]))

@pytest.mark.parametrize("hc, expected", [
    (HCType.HC0, 2.0 / 4.0),
    (HCType.HC1, 4.0 / 2.0 * 2.0 / 4.0),
    (HCType.HC2, 2.0 / 2.0),
    (HCType.HC3, 2.0 / 1.0),
])
def test_sandwich_flavours(hc, expected):
    """Closed forms of HC0..HC3 for two groups of two with s^2 = 2."""
    layout = OneWayLayout.from_groups({"a": [0.0, 2.0], "b": [1.0, 3.0]})
    est = summarize(layout, VarianceMode.SANDWICH, hc)
    assert np.allclose(np.diag(est.mean_covariance), expected)

def test_sandwich_and_pooled_agree_for_large_homogeneous_samples():
    rng = np.random.default_rng(0)
    layout = OneWayLayout.from_groups({str(i): rng.normal(0.0, 1.0, 1000) for i in range(3)})
    pooled = np.diag(summarize(layout).mean_covariance)
    sandwich = np.diag(summarize(layout, VarianceMode.SANDWICH).mean_covariance)
    assert np.all(np.abs(sandwich / pooled - 1.0) < 0.1)

def test_sandwich_rejects_constant_group():
    layout = OneWayLayout.from_groups({"a": [1.0, 1.0], "b": [0.0, 2.0]})
    with pytest.raises(DegenerateVarianceError, match="'a'"):
        summarize(layout, VarianceMode.SANDWICH)

def test_two_group_grand_mean_statistic():
    """k=2, n=5, means 0 and 1, S^2 = 0.5: t = 0.5 / sqrt(0.5 * 0.1) = 2.2361."""
    layout = OneWayLayout.from_groups({
        "a": [-1.0, 0.0, 0.0, 0.0, 1.0],
        "b": [0.0, 1.0, 1.0, 1.0, 2.0],
    })
    statistics = contrast_statistics(summarize(layout), grand_mean_contrasts([5, 5]))
    assert statistics[1] == pytest.approx(np.sqrt(5.0), abs=1e-4)
    assert statistics[0] == pytest.approx(-statistics[1])

def test_statistics_are_location_scale_invariant(random_layout):
    """Shifting and rescaling the responses leaves the statistics unchanged."""
    cm = williams_contrasts(random_layout.group_sizes)
    for mode in VarianceMode:
        base = contrast_statistics(summarize(random_layout, mode), cm)
        moved = contrast_statistics(summarize(random_layout.transformed(3.0, -7.0), mode), cm)
        assert np.allclose(base, moved)

def test_pava_estimand_uses_restricted_means():
    """A violator pair is pooled before the contrast is formed."""
    layout = OneWayLayout.from_groups({"a": [0.0, 2.0], "b": [2.0, 4.0], "c": [1.0, 3.0]})
    est = summarize(layout)
    cm = grand_mean_contrasts(est.group_sizes)
    raw = contrast_statistics(est, cm)
    restricted = contrast_statistics(est, cm, Estimand.PAVA_MEANS, Direction.INCREASING)
    errors = contrast_standard_errors(est, cm)
    assert np.allclose(restricted * errors, cm.coefficients @ np.array([1.0, 2.5, 2.5]))
    assert not np.allclose(raw, restricted)

def test_sigma_only_studentization():
    """Sigma-only statistics divide the contrast estimate by S alone."""
    layout = OneWayLayout.from_groups({"a": [0.0, 2.0], "b": [2.0, 4.0]})
    est = summarize(layout)
    cm = williams_contrasts(est.group_sizes)
    statistic = contrast_statistics(est, cm, studentize=Studentize.SIGMA_ONLY)
    assert statistic[0] == pytest.approx(2.0 / np.sqrt(2.0))

def test_standard_errors_reject_mismatched_contrasts(null_layout):
    with pytest.raises(InvalidInputError):
        contrast_standard_errors(summarize(null_layout), grand_mean_contrasts([3, 3]))

def test_zero_variance_statistic_is_degenerate():
    layout = OneWayLayout.from_groups({"a": [1.0, 1.0], "b": [2.0, 2.0]})
    with pytest.raises(DegenerateVarianceError):
        contrast_statistics(summarize(layout), grand_mean_contrasts([2, 2]))

def test_group_summary(balanced_layout):
    """One row per level with n, mean, sd and the isotonic mean."""
    rows = group_summary(balanced_layout)
    assert [row["level"] for row in rows] == ["0", "1", "2", "3"]
    assert rows[0]["n"] == 5
    assert rows[3]["mean"] == pytest.approx(12.26)
    assert all(row["pava_mean"] == pytest.approx(row["mean"]) for row in rows)
