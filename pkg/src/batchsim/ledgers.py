"""Verdict and execution records produced by a simulation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .runs import Purpose, SimulationError, TestRunRequest
from .trace import TestOutcome


class VerdictLedger:
    """Final verdict and verdict time per (change, test)."""

    def __init__(self):
        self._entries: dict[tuple[str, str], tuple[TestOutcome, int]] = {}
        self._last: dict[str, int] = {}
        self._count: dict[str, int] = {}

    def record(self, change_id: str, test_id: str, verdict: TestOutcome, time: int) -> None:
        key = (change_id, test_id)
        if key in self._entries:
            raise SimulationError(f"double verdict for change {change_id!r} test {test_id!r}")
        self._entries[key] = (verdict, time)
        if time > self._last.get(change_id, time - 1):
            self._last[change_id] = time
        self._count[change_id] = self._count.get(change_id, 0) + 1

    def get(self, change_id: str, test_id: str):
        return self._entries.get((change_id, test_id))

    def __getitem__(self, key: tuple[str, str]) -> tuple[TestOutcome, int]:
        return self._entries[key]

    def __contains__(self, key) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[tuple[str, str]]:
        return iter(self._entries)

    def items(self):
        return self._entries.items()

    def verdict_count(self, change_id: str) -> int:
        return self._count.get(change_id, 0)

    def last_verdict_time(self, change_id: str) -> int:
        return self._last[change_id]


@dataclass(frozen=True)
class ExecutedRun:
    run: TestRunRequest
    start_time: int
    end_time: int
    machine: int
    dispatch_seq: int

    def to_dict(self) -> dict:
        r = self.run
        return {
            "run_id": r.run_id,
            "test_id": r.test_id,
            "members": list(r.members),
            "duration": r.duration,
            "outcome": r.outcome.value,
            "purpose": r.purpose.value,
            "ready_time": r.ready_time,
            "batch_id": r.batch_id,
            "start_time": self.start_time,
            "end_time": self.end_time,
            "machine": self.machine,
            "dispatch_seq": self.dispatch_seq,
        }


@dataclass
class ExecutionLedger:
    """Completed runs in dispatch order, plus batch formations."""

    runs: list[ExecutedRun] = field(default_factory=list)
    batch_events: list[tuple[int, int]] = field(default_factory=list)

    @property
    def total_machine_time(self) -> int:
        return sum(er.run.duration for er in self.runs)

    @property
    def total_runs(self) -> int:
        return len(self.runs)

    def count(self, purpose: Purpose | None = None) -> int:
        if purpose is None:
            return len(self.runs)
        return sum(1 for er in self.runs if er.run.purpose is purpose)
