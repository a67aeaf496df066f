"""Test-run requests: one test executed once for a group of changes."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .trace import TestOutcome, Trace


class SimulationError(RuntimeError):
    """A scheduling decision broke an engine invariant."""


class Purpose(str, enum.Enum):
    PRIMARY = "primary"
    CULPRIT = "culprit"


@dataclass(frozen=True)
class TestRunRequest:
    run_id: int
    test_id: str
    members: tuple[str, ...]
    duration: int
    outcome: TestOutcome
    purpose: Purpose
    ready_time: int
    batch_id: int = -1

    __test__ = False


def make_run(
    run_id: int,
    test_id: str,
    members: Sequence[str],
    trace: Trace,
    purpose: Purpose,
    ready_time: int,
    batch_id: int = -1,
) -> TestRunRequest:
    """Build a run whose duration and outcome follow from the members' history.

    Duration is the longest historical duration among the members; the run
    fails iff any member historically failed the test.
    """
    if not members:
        raise SimulationError(f"run {run_id} of {test_id!r} has no members")
    duration = 0
    outcome = TestOutcome.PASS
    for cid in members:
        ch = trace.change(cid)
        if not ch.requests(test_id):
            raise SimulationError(f"run {run_id}: change {cid!r} does not request {test_id!r}")
        if ch.commit_time > ready_time:
            raise SimulationError(
                f"run {run_id}: change {cid!r} committed at {ch.commit_time}, after ready time {ready_time}"
            )
        rt = ch.test(test_id)
        if rt.duration > duration:
            duration = rt.duration
        if rt.outcome is TestOutcome.FAIL:
            outcome = TestOutcome.FAIL
    if len(set(members)) != len(members):
        raise SimulationError(f"run {run_id}: duplicate members {list(members)}")
    return TestRunRequest(run_id, test_id, tuple(members), duration, outcome, purpose, ready_time, batch_id)


def check_run(run: TestRunRequest, trace: Trace) -> None:
    """Raise :class:`SimulationError` if ``run`` disagrees with the trace."""
    expected = make_run(run.run_id, run.test_id, run.members, trace, run.purpose, run.ready_time, run.batch_id)
    if (expected.duration, expected.outcome) != (run.duration, run.outcome):
        raise SimulationError(
            f"run {run.run_id} of {run.test_id!r}: duration/outcome {run.duration}/{run.outcome.value} "
            f"should be {expected.duration}/{expected.outcome.value}"
        )
