"""Immutable trace data model.

All timestamps and durations are integer milliseconds; commit and end times
are relative to the trace epoch.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Optional


class TraceError(ValueError):
    """Raised for data that cannot form a valid trace."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TestOutcome(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"

    __test__ = False  # not a pytest class

    @classmethod
    def parse(cls, value: str) -> "TestOutcome":
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(f"unknown outcome {value!r}") from None

    def worst(self, other: "TestOutcome") -> "TestOutcome":
        return TestOutcome.FAIL if TestOutcome.FAIL in (self, other) else TestOutcome.PASS


@dataclass(frozen=True)
class RequestedTest:
    test_id: str
    duration: int
    outcome: TestOutcome

    __test__ = False

    def __post_init__(self):
        if self.duration < 0:
            raise TraceError(f"test {self.test_id!r}: negative duration {self.duration}")


@dataclass(frozen=True)
class ChangeSpec:
    change_id: str
    commit_time: int
    requested: tuple[RequestedTest, ...]
    actual_end_time: Optional[int] = None
    _by_test: Mapping[str, RequestedTest] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.requested:
            raise TraceError(f"change {self.change_id!r} requests no tests")
        by_test = {}
        for rt in self.requested:
            if rt.test_id in by_test:
                raise TraceError(f"change {self.change_id!r}: duplicate test {rt.test_id!r}")
            by_test[rt.test_id] = rt
        if self.actual_end_time is not None and self.actual_end_time < self.commit_time:
            raise TraceError(
                f"change {self.change_id!r}: actual end {self.actual_end_time} "
                f"before commit {self.commit_time}"
            )
        object.__setattr__(self, "_by_test", MappingProxyType(by_test))

    @property
    def test_ids(self) -> tuple[str, ...]:
        return tuple(rt.test_id for rt in self.requested)

    def requests(self, test_id: str) -> bool:
        return test_id in self._by_test

    def test(self, test_id: str) -> RequestedTest:
        return self._by_test[test_id]


@dataclass(frozen=True)
class Trace:
    """Changes sorted by ``(commit_time, change_id)``."""

    changes: tuple[ChangeSpec, ...]
    epoch: int = 0
    _index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        prev = None
        for i, ch in enumerate(self.changes):
            if ch.change_id in index:
                raise TraceError(f"duplicate change id {ch.change_id!r}")
            key = (ch.commit_time, ch.change_id)
            if prev is not None and key < prev:
                raise TraceError(f"changes not sorted at {ch.change_id!r}")
            prev = key
            index[ch.change_id] = i
        object.__setattr__(self, "_index", MappingProxyType(index))

    @classmethod
    def from_changes(cls, changes: Iterable[ChangeSpec], epoch: int = 0) -> "Trace":
        return cls(tuple(sorted(changes, key=lambda c: (c.commit_time, c.change_id))), epoch)

    def __len__(self) -> int:
        return len(self.changes)

    def __iter__(self):
        return iter(self.changes)

    def __contains__(self, change_id) -> bool:
        return change_id in self._index

    def change(self, change_id: str) -> ChangeSpec:
        try:
            return self.changes[self._index[change_id]]
        except KeyError:
            raise KeyError(f"change {change_id!r} not in trace") from None

    def position(self, change_id: str) -> int:
        return self._index[change_id]

    @property
    def total_executions(self) -> int:
        """Run count of testing every change in isolation."""
        return sum(len(c.requested) for c in self.changes)

    @property
    def total_execution_time(self) -> int:
        """Machine time of testing every change in isolation."""
        return sum(rt.duration for c in self.changes for rt in c.requested)
