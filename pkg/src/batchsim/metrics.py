"""Feedback-time, execution-reduction, batch-size and plateau metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .engine import SimResult
from .ledgers import ExecutionLedger, VerdictLedger
from .runs import Purpose
from .strategies import StrategyConfig, StrategyKind
from .trace import ChangeSpec, Trace


class MetricsError(ValueError):
    pass


def feedback_time(ledger: VerdictLedger, change: ChangeSpec) -> int:
    """Time from commit until the change's last test verdict."""
    latest = None
    for t in change.test_ids:
        entry = ledger.get(change.change_id, t)
        if entry is None:
            raise MetricsError(f"change {change.change_id!r} has no verdict for {t!r}")
        if latest is None or entry[1] > latest:
            latest = entry[1]
    fb = latest - change.commit_time
    if fb < 0:
        raise MetricsError(f"change {change.change_id!r} has a verdict before its commit")
    return fb


def avg_feedback(samples: Sequence[float]) -> float:
    if len(samples) == 0:
        raise MetricsError("no feedback samples")
    return math.fsum(samples) / len(samples)


def feedback_reduction(a1: float, a2: float) -> float:
    """Percentage decrease of average feedback ``a1`` relative to ``a2``."""
    if a2 == 0:
        raise MetricsError("reference average feedback is zero")
    return (1 - a1 / a2) * 100


def execution_reduction(ledger: ExecutionLedger, trace: Trace) -> float:
    """Machine time saved relative to testing every change in isolation, in %."""
    baseline = trace.total_execution_time
    if baseline == 0:
        raise MetricsError("trace has zero total execution time")
    # same value as (1 - K/N) * 100, without the float round trip on exact ratios
    return (baseline - ledger.total_machine_time) * 100 / baseline


def avg_batch_size(ledger: ExecutionLedger) -> float:
    """Mean member count over primary batch formations.

    For test-case batching every primary run is its own batch, so this is the
    mean member count per primary run.
    """
    if not ledger.batch_events:
        raise MetricsError("no batches were formed")
    return sum(count for _, count in ledger.batch_events) / len(ledger.batch_events)


@dataclass(frozen=True)
class PlateauCriterion:
    threshold_pct: float = 2.0
    machine_step: int = 25

    def __post_init__(self):
        if self.threshold_pct <= 0:
            raise ValueError("threshold_pct must be > 0")
        if self.machine_step < 1:
            raise ValueError("machine_step must be >= 1")


@dataclass(frozen=True)
class Plateau:
    machines: int
    avg_feedback: float
    plateaued: bool


def detect_plateau(series: Mapping[int, float], baseline: float, criterion: PlateauCriterion) -> Plateau:
    """Smallest ``m`` whose next step improves feedback by under the threshold.

    Improvement is ``(f(m) - f(m + step)) / baseline * 100``, only over pairs
    present in ``series``. When no pair is below the threshold, the largest
    ``m`` is returned with ``plateaued=False``.
    """
    if baseline <= 0:
        raise MetricsError("baseline must be positive")
    step = criterion.machine_step
    ms = sorted(series)
    pairs = [m for m in ms if m + step in series]
    if not pairs:
        raise MetricsError(f"series has no two machine counts {step} apart")
    for m in pairs:
        improvement = (series[m] - series[m + step]) / baseline * 100
        if improvement < criterion.threshold_pct:
            return Plateau(m, series[m], True)
    top = ms[-1]
    return Plateau(top, series[top], False)


def machines_to_hold(series: Mapping[int, float], baseline: float):
    """Smallest machine count whose average feedback is within the baseline."""
    for m in sorted(series):
        if series[m] <= baseline:
            return m
    return None


@dataclass(frozen=True)
class MetricsRow:
    algorithm: StrategyConfig
    machines: int
    avg_feedback: float
    feedback_samples: tuple[int, ...]
    execution_reduction_pct: float
    avg_batch_size: float
    total_runs: int
    culprit_runs: int
    total_machine_time: int
    untested: tuple[str, ...] = ()

    CSV_HEADER = (
        "algorithm",
        "machines",
        "avg_feedback_ms",
        "execution_reduction_pct",
        "avg_batch_size",
        "total_runs",
        "culprit_runs",
        "total_machine_time_ms",
        "changes",
    )

    def csv_row(self) -> list[str]:
        return [
            self.algorithm.label,
            str(self.machines),
            f"{self.avg_feedback:.2f}",
            f"{self.execution_reduction_pct:.2f}",
            f"{self.avg_batch_size:.2f}",
            str(self.total_runs),
            str(self.culprit_runs),
            str(self.total_machine_time),
            str(len(self.feedback_samples)),
        ]

    def to_dict(self) -> dict:
        return dict(zip(self.CSV_HEADER, self.csv_row()))


def metrics_row(result: SimResult) -> MetricsRow:
    """All per-cell metrics; a pure function of the result and its trace."""
    skip = set(result.untested)
    samples = tuple(
        feedback_time(result.verdicts, ch) for ch in result.trace.changes if ch.change_id not in skip
    )
    ex = result.executions
    return MetricsRow(
        algorithm=result.strategy,
        machines=result.machines,
        avg_feedback=avg_feedback(samples),
        feedback_samples=samples,
        execution_reduction_pct=execution_reduction(ex, result.trace),
        avg_batch_size=avg_batch_size(ex),
        total_runs=ex.total_runs,
        culprit_runs=ex.count(Purpose.CULPRIT),
        total_machine_time=ex.total_machine_time,
        untested=tuple(result.untested),
    )


def is_testall(config: StrategyConfig) -> bool:
    return config.kind is StrategyKind.TEST_ALL
