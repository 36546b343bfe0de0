from itertools import combinations

import numpy as np
import pytest

from app.admm.projection import project_topk, support, topk_indices
from app.errors import BudgetError
from app.utils import derive_seed, normal


def test_keeps_largest_magnitudes():
    out = project_topk(np.array([3.0, -1.0, 0.5, 2.0]), 2)
    np.testing.assert_array_equal(out, [3.0, 0.0, 0.0, 2.0])


def test_ties_keep_lower_flat_index():
    out = project_topk(np.array([1.0, -1.0, 1.0]), 2)
    np.testing.assert_array_equal(out, [1.0, -1.0, 0.0])
    assert topk_indices(np.array([2.0, -2.0, 2.0, -2.0]), 3).tolist() == [0, 1, 2]


def test_extreme_keep_counts():
    x = np.array([[0.3, -0.1], [0.0, 2.0]])
    np.testing.assert_array_equal(project_topk(x, x.size), x)
    assert not np.any(project_topk(x, 0))
    with pytest.raises(BudgetError):
        project_topk(x, x.size + 1)
    with pytest.raises(BudgetError):
        project_topk(x, -1)


def test_shape_and_idempotence():
    x = normal(3, (4, 5))
    once = project_topk(x, 7)
    assert once.shape == x.shape
    assert np.count_nonzero(once) == 7
    np.testing.assert_array_equal(project_topk(once, 7), once)


@pytest.mark.parametrize("seed", range(4))
def test_projection_is_nearest_point(seed):
    x = normal(seed, 6)
    keep = 1 + seed % 4
    best = min(
        np.sum(np.delete(x, list(kept)) ** 2)
        for kept in combinations(range(x.size), keep)
    )
    distance = np.sum((x - project_topk(x, keep)) ** 2)
    assert distance == pytest.approx(best, rel=1e-12)


def test_support_mask():
    np.testing.assert_array_equal(support(np.array([0.0, -2.0, 0.0, 1e-300])), [0.0, 1.0, 0.0, 1.0])


def random_case(case):
    """Seeded tensor with 1..12 entries and a keep count in [0, n]; every third case has ties and zeros"""
    n = 1 + case % 12
    seed = derive_seed(2024, case)
    x = normal(seed, n)
    if case % 3 == 0:
        x = np.round(2.0 * x) / 2.0
    keep = derive_seed(seed, "keep") % (n + 1)
    return x, keep


CASES = [random_case(case) for case in range(1000)]


def test_projection_matches_exhaustive_search():
    for x, keep in CASES:
        squares = (x * x).tolist()
        best, best_kept = float("inf"), None
        for kept in combinations(range(x.size), keep):
            discarded = sum(s for j, s in enumerate(squares) if j not in kept)
            if discarded < best:
                best, best_kept = discarded, set(kept)
        distance = float(np.sum((x - project_topk(x, keep)) ** 2))
        assert distance == pytest.approx(best, rel=1e-12, abs=1e-12)

        magnitudes = np.sort(np.abs(x))[::-1]
        if keep in (0, x.size) or magnitudes[keep - 1] > magnitudes[keep]:
            assert set(topk_indices(x, keep).tolist()) == best_kept


def test_positive_scaling_commutes_with_projection():
    for x, keep in CASES:
        expected = project_topk(x, keep)
        for alpha in (0.25, 2.0, 8.0):
            np.testing.assert_array_equal(project_topk(alpha * x, keep), alpha * expected)


def test_cardinality_is_min_of_keep_and_nonzeros():
    for x, keep in CASES:
        assert np.count_nonzero(project_topk(x, keep)) == min(keep, np.count_nonzero(x))
