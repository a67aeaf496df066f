"""Batching policies driven by the engine's event loop.

Each policy reacts to four hooks:

``on_arrival(sim, change, last)``
    a change was committed (``last`` marks the final change of the trace)
``on_tick(sim)``
    all arrivals and completions of the current instant were processed
``on_batch_done(sim, batch)``
    every run of a batch, culprit finding included, has finished
``pull(sim)``
    a machine is idle and the ready queue is empty; may return a run

and talks back through ``sim.submit_batch`` / ``sim.open_batch``.
"""

from __future__ import annotations

import enum
import re
from collections import deque
from dataclasses import dataclass
from typing import Sequence

from .runs import Purpose, TestRunRequest, make_run
from .trace import Trace


class StrategyKind(str, enum.Enum):
    TEST_ALL = "testall"
    CONSTANT = "batch"
    BATCH_ALL = "batchall"
    TEST_CASE = "testcase"


@dataclass(frozen=True)
class StrategyConfig:
    kind: StrategyKind
    batch_size: int = 0
    flush_tail: bool = True

    def __post_init__(self):
        if self.kind is StrategyKind.CONSTANT and self.batch_size < 2:
            raise ValueError(f"constant batching needs batch_size >= 2, got {self.batch_size}")

    @classmethod
    def parse(cls, text: str) -> "StrategyConfig":
        """Parse ``testall``, ``batch:<n>[:noflush]``, ``batchall`` or ``testcase``."""
        value = text.strip().lower()
        m = re.fullmatch(r"batch:(\d+)(:noflush)?", value)
        if m:
            return cls(StrategyKind.CONSTANT, int(m.group(1)), flush_tail=m.group(2) is None)
        for kind in (StrategyKind.TEST_ALL, StrategyKind.BATCH_ALL, StrategyKind.TEST_CASE):
            if value == kind.value:
                return cls(kind)
        raise ValueError(f"unknown algorithm {text!r}; use testall, batch:<n>, batchall or testcase")

    @property
    def label(self) -> str:
        if self.kind is StrategyKind.CONSTANT:
            return f"batch:{self.batch_size}" + ("" if self.flush_tail else ":noflush")
        return self.kind.value

    @property
    def display_name(self) -> str:
        return {
            StrategyKind.TEST_ALL: "TestAll",
            StrategyKind.CONSTANT: f"Batch{self.batch_size}",
            StrategyKind.BATCH_ALL: "BatchAll",
            StrategyKind.TEST_CASE: "TestCaseBatching",
        }[self.kind]

    def __str__(self) -> str:
        return self.label


def form_batch(
    members: Sequence[str],
    trace: Trace,
    now: int,
    first_run_id: int = 0,
    batch_id: int = -1,
    tests: Sequence[str] | None = None,
) -> list[TestRunRequest]:
    """One primary run per test in the union of the members' requests.

    Runs are ordered by first appearance over the members in arrival order;
    each run includes only members that requested its test. ``tests``
    restricts the union (test-case batching runs one test at a time).
    """
    if not members:
        raise ValueError("batch has no members")
    union: dict[str, list[str]] = {}
    for cid in members:
        if cid not in trace:
            raise KeyError(f"change {cid!r} not in trace")
        for t in trace.change(cid).test_ids:
            union.setdefault(t, []).append(cid)
    if tests is not None:
        union = {t: union[t] for t in tests if t in union}
    return [
        make_run(first_run_id + i, t, ms, trace, Purpose.PRIMARY, now, batch_id)
        for i, (t, ms) in enumerate(union.items())
    ]


class Policy:
    def on_arrival(self, sim, change, last: bool) -> None:
        pass

    def on_tick(self, sim) -> None:
        pass

    def on_batch_done(self, sim, batch) -> None:
        pass

    def pull(self, sim):
        return None

    def leftover(self) -> list[str]:
        """Changes never handed to a batch."""
        return []


class TestAllPolicy(Policy):
    """Every change is tested alone, immediately on arrival."""

    __test__ = False

    def on_arrival(self, sim, change, last):
        sim.submit_batch([change.change_id])


class ConstantPolicy(Policy):
    """Group every ``n`` consecutive arrivals into one batch."""

    def __init__(self, n: int, flush_tail: bool = True):
        self.n = n
        self.flush_tail = flush_tail
        self.waiting: list[str] = []

    def on_arrival(self, sim, change, last):
        self.waiting.append(change.change_id)
        if len(self.waiting) == self.n or (last and self.flush_tail):
            batch, self.waiting = self.waiting, []
            sim.submit_batch(batch)

    def leftover(self):
        return list(self.waiting)


class BatchAllPolicy(Policy):
    """Batch every waiting change whenever no batch is in flight."""

    def __init__(self):
        self.waiting: list[str] = []
        self.in_flight = False

    def on_arrival(self, sim, change, last):
        self.waiting.append(change.change_id)

    def on_tick(self, sim):
        if not self.in_flight and self.waiting:
            batch, self.waiting = self.waiting, []
            self.in_flight = True
            sim.submit_batch(batch)

    def on_batch_done(self, sim, batch):
        self.in_flight = False

    def leftover(self):
        return list(self.waiting)


class TestCasePolicy(Policy):
    """Batch per test: an idle machine takes the oldest pending (change, test)
    pair and runs that test for every waiting change that still needs it."""

    __test__ = False

    def __init__(self):
        self.queue: deque[tuple[str, str]] = deque()
        self.pending: dict[str, dict[str, None]] = {}

    def on_arrival(self, sim, change, last):
        cid = change.change_id
        for t in change.test_ids:
            self.queue.append((cid, t))
            self.pending.setdefault(t, {})[cid] = None

    def pull(self, sim):
        while self.queue:
            cid, t = self.queue.popleft()
            bucket = self.pending.get(t)
            if bucket is None or cid not in bucket:
                continue  # absorbed by an earlier run of t
            del self.pending[t]
            (run,) = sim.open_batch(list(bucket), tests=[t])
            return run
        return None

    def leftover(self):
        return sorted({c for bucket in self.pending.values() for c in bucket})


def make_policy(config: StrategyConfig) -> Policy:
    if config.kind is StrategyKind.TEST_ALL:
        return TestAllPolicy()
    if config.kind is StrategyKind.CONSTANT:
        return ConstantPolicy(config.batch_size, config.flush_tail)
    if config.kind is StrategyKind.BATCH_ALL:
        return BatchAllPolicy()
    return TestCasePolicy()
