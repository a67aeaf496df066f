"""Comparing feedback-time distributions between algorithms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np

from . import kernels

EXACT_MAX_N = 20
_STD_NORMAL = NormalDist()


class StatsError(ValueError):
    pass


def confidence_interval(samples: Sequence[float], level: float = 0.95) -> tuple[float, float]:
    """Two-sided normal-approximation interval for the mean."""
    n = len(samples)
    if n < 2:
        raise StatsError("need at least two samples")
    if not 0 < level < 1:
        raise StatsError("level must be in (0, 1)")
    arr = np.asarray(samples, dtype=np.float64)
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1))
    half = _STD_NORMAL.inv_cdf(0.5 + level / 2) * sd / math.sqrt(n)
    return mean - half, mean + half


def doubled_midranks(values: Sequence[float]) -> np.ndarray:
    """Pooled ranks (ties share the average rank), times two."""
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="mergesort")
    sorted_vals = arr[order]
    out = np.empty(arr.shape[0], dtype=np.int64)
    i = 0
    n = arr.shape[0]
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        # positions i..j hold ranks i+1..j+1; their mean doubled is i+j+2
        out[order[i : j + 1]] = i + j + 2
        i = j + 1
    return out


def wilcoxon_rank_sum(x: Sequence[float], y: Sequence[float], method: str = "auto") -> float:
    """Two-sided Wilcoxon rank-sum (Mann-Whitney) p-value.

    ``method="auto"`` enumerates the exact permutation distribution of the
    rank sum (ties included) when ``len(x) + len(y) <= 20`` and otherwise uses
    the normal approximation with tie and continuity corrections. The exact
    p-value doubles the smaller tail probability, capped at 1.
    """
    n1, n2 = len(x), len(y)
    if n1 == 0 or n2 == 0:
        raise StatsError("both samples must be non-empty")
    if method not in ("auto", "exact", "normal"):
        raise ValueError(f"unknown method {method!r}")
    ranks = doubled_midranks(list(x) + list(y))
    w2 = int(ranks[:n1].sum())  # doubled rank sum of x
    n = n1 + n2
    if method == "exact" or (method == "auto" and n <= EXACT_MAX_N):
        counts = kernels.rank_sum_counts(ranks, n1)
        total = counts.sum()
        lower = counts[: w2 + 1].sum() / total
        upper = counts[w2:].sum() / total
        return float(min(1.0, 2 * min(lower, upper)))

    w = w2 / 2
    expected = n1 * (n + 1) / 2
    _, tie_counts = np.unique(ranks, return_counts=True)
    ties = float(((tie_counts.astype(np.float64) ** 3) - tie_counts).sum())
    var = n1 * n2 / 12 * ((n + 1) - ties / (n * (n - 1)))
    if var <= 0:
        return 1.0
    z = (abs(w - expected) - 0.5) / math.sqrt(var)
    if z <= 0:
        return 1.0
    return float(min(1.0, math.erfc(z / math.sqrt(2))))  # 2 * upper tail


def bonferroni_cutoff(alpha: float, comparisons: int) -> float:
    if comparisons < 1:
        raise StatsError("comparisons must be >= 1")
    return alpha / comparisons


def cliffs_delta(x: Sequence[float], y: Sequence[float]) -> float:
    """``(#{x_i > y_j} - #{x_i < y_j}) / (|x| |y|)`` via sorted merge counts."""
    if len(x) == 0 or len(y) == 0:
        raise StatsError("both samples must be non-empty")
    xs = np.sort(np.asarray(x, dtype=np.float64))
    ys = np.sort(np.asarray(y, dtype=np.float64))
    greater, less = kernels.dominance_counts(xs, ys)
    return (greater - less) / (len(xs) * len(ys))


def cliffs_delta_naive(x: Sequence[float], y: Sequence[float]) -> float:
    """Quadratic definition; reference for :func:`cliffs_delta`."""
    if len(x) == 0 or len(y) == 0:
        raise StatsError("both samples must be non-empty")
    greater = sum(1 for a in x for b in y if a > b)
    less = sum(1 for a in x for b in y if a < b)
    return (greater - less) / (len(x) * len(y))


@dataclass(frozen=True)
class ComparisonResult:
    algo_a: str
    algo_b: str
    machines: int
    p_value: float
    significant: bool
    cliffs_delta: float

    CSV_HEADER = ("algo_a", "algo_b", "machines", "p_value", "significant", "cliffs_delta")

    def csv_row(self) -> list[str]:
        return [
            self.algo_a,
            self.algo_b,
            str(self.machines),
            f"{self.p_value:.6g}",
            "true" if self.significant else "false",
            f"{self.cliffs_delta:.4f}",
        ]


def compare(algo_a: str, algo_b: str, machines: int, x, y, cutoff: float) -> ComparisonResult:
    p = wilcoxon_rank_sum(x, y)
    return ComparisonResult(algo_a, algo_b, machines, p, p < cutoff, cliffs_delta(x, y))
