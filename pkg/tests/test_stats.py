import math
import statistics
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from batchsim.stats import (
    StatsError,
    bonferroni_cutoff,
    cliffs_delta,
    cliffs_delta_naive,
    compare,
    confidence_interval,
    doubled_midranks,
    wilcoxon_rank_sum,
)

scipy_stats = pytest.importorskip("scipy.stats")


def brute_force_p(x, y):
    """Exact two-sided p by enumerating every split of the pooled midranks."""
    pooled = list(x) + list(y)
    order = sorted(pooled)
    rank = {v: (order.index(v) + 1 + len(order) - order[::-1].index(v)) / 2 for v in set(pooled)}
    ranks = [rank[v] for v in pooled]
    n1 = len(x)
    w = sum(ranks[:n1])
    sums = [sum(ranks[i] for i in idx) for idx in combinations(range(len(ranks)), n1)]
    lower = sum(s <= w + 1e-9 for s in sums) / len(sums)
    upper = sum(s >= w - 1e-9 for s in sums) / len(sums)
    return min(1.0, 2 * min(lower, upper))


def test_ci_constant_samples():
    assert confidence_interval([5, 5, 5, 5]) == (5, 5)


def test_ci_matches_textbook_formula():
    xs = list(range(1, 101))
    z = scipy_stats.norm.ppf(0.975)
    half = z * statistics.stdev(xs) / math.sqrt(len(xs))
    lo, hi = confidence_interval(xs, 0.95)
    assert lo == pytest.approx(50.5 - half, rel=1e-9)
    assert hi == pytest.approx(50.5 + half, rel=1e-9)


def test_ci_widens_by_sqrt2_with_half_the_samples():
    full = [0, 2] * 50
    half = [0, 2] * 25
    w_full = np.subtract(*confidence_interval(full)[::-1]) / statistics.stdev(full)
    w_half = np.subtract(*confidence_interval(half)[::-1]) / statistics.stdev(half)
    assert w_half / w_full == pytest.approx(math.sqrt(2), rel=1e-12)


def test_ci_errors():
    with pytest.raises(StatsError):
        confidence_interval([1])
    with pytest.raises(StatsError):
        confidence_interval([1, 2], level=1.0)


def test_doubled_midranks():
    assert doubled_midranks([10, 20, 20, 5]).tolist() == [4, 7, 7, 2]


def test_wilcoxon_identical_samples():
    assert wilcoxon_rank_sum([1, 2, 3], [1, 2, 3]) == 1.0


def test_wilcoxon_complete_separation():
    assert wilcoxon_rank_sum([1, 2, 3], [4, 5, 6]) == pytest.approx(0.1, abs=1e-15)
    assert wilcoxon_rank_sum([4, 5, 6], [1, 2, 3]) == pytest.approx(0.1, abs=1e-15)


@pytest.mark.parametrize("seed", range(20))
def test_wilcoxon_exact_matches_brute_force_with_ties(seed):
    rng = np.random.default_rng(seed)
    n1, n2 = int(rng.integers(1, 7)), int(rng.integers(1, 7))
    x = rng.integers(0, 5, size=n1).tolist()
    y = rng.integers(0, 5, size=n2).tolist()
    assert wilcoxon_rank_sum(x, y, method="exact") == pytest.approx(brute_force_p(x, y), abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_wilcoxon_exact_matches_scipy_without_ties(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(0, 1, 8)
    y = rng.normal(0.7, 1, 9)
    ref = scipy_stats.mannwhitneyu(x, y, alternative="two-sided", method="exact").pvalue
    assert wilcoxon_rank_sum(x, y, method="exact") == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_wilcoxon_normal_matches_scipy_asymptotic(seed):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 30, 40)
    y = rng.integers(3, 33, 55)
    ref = scipy_stats.mannwhitneyu(x, y, alternative="two-sided", method="asymptotic", use_continuity=True).pvalue
    assert wilcoxon_rank_sum(x, y) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_wilcoxon_exact_close_to_normal_at_ten_each(seed):
    rng = np.random.default_rng(100 + seed)
    x, y = rng.normal(0, 1, 10), rng.normal(0.5, 1, 10)
    assert abs(wilcoxon_rank_sum(x, y, "exact") - wilcoxon_rank_sum(x, y, "normal")) < 0.01


def test_wilcoxon_large_shift_is_significant():
    rng = np.random.default_rng(0)
    assert wilcoxon_rank_sum(rng.normal(0, 1, 500), rng.normal(1, 1, 500)) < 0.0003


def test_wilcoxon_errors():
    with pytest.raises(StatsError):
        wilcoxon_rank_sum([], [1])
    with pytest.raises(ValueError):
        wilcoxon_rank_sum([1], [2], method="magic")


@pytest.mark.parametrize("alpha, n, cutoff", [(0.05, 1, 0.05), (0.05, 5, 0.01)])
def test_bonferroni(alpha, n, cutoff):
    assert bonferroni_cutoff(alpha, n) == pytest.approx(cutoff)


def test_bonferroni_170_comparisons():
    cutoff = bonferroni_cutoff(0.05, 10 * 17)
    assert cutoff == pytest.approx(0.000294, abs=1e-6)
    assert round(cutoff, 4) == 0.0003
    with pytest.raises(StatsError):
        bonferroni_cutoff(0.05, 0)


def test_cliffs_delta_examples():
    assert cliffs_delta([1, 2, 3], [1, 2, 3]) == 0
    assert cliffs_delta([5, 6], [1, 2, 3]) == 1
    assert cliffs_delta([1, 2], [1, 3]) == -0.25


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.integers(-5, 5), min_size=1, max_size=15),
    st.lists(st.integers(-5, 5), min_size=1, max_size=15),
)
def test_cliffs_delta_properties(x, y):
    d = cliffs_delta(x, y)
    assert d == cliffs_delta_naive(x, y)
    assert d == -cliffs_delta(y, x)
    assert -1 <= d <= 1
    assert d == cliffs_delta([v**3 + 7 for v in x], [v**3 + 7 for v in y])


def test_compare_row():
    r = compare("testall", "batchall", 8, [1, 2, 3], [4, 5, 6], cutoff=0.2)
    assert r.significant and r.cliffs_delta == -1
    assert r.csv_row() == ["testall", "batchall", "8", "0.1", "true", "-1.0000"]
