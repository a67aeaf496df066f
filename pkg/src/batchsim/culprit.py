"""BatchStop4 culprit finding, rerunning only the tests that failed.

A failing group of more than four changes is split into two halves (the
larger half first, arrival order kept); a failing group of two to four
changes is retested change by change. Each child reruns only the tests that
failed at its parent and that at least one of its members requested. A run
with a single member is conclusive for that member, so it never spawns
children.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

from .ledgers import VerdictLedger
from .runs import TestRunRequest
from .trace import TestOutcome, Trace

STOP_SIZE = 4


class NodeState(str, enum.Enum):
    PENDING = "pending"
    RUNNING = "running"
    RESOLVED = "resolved"


@dataclass(eq=False)
class CulpritNode:
    members: tuple[str, ...]
    # tests this node runs; for a batch root, all of the batch's tests
    failing_tests: tuple[str, ...]
    state: NodeState = NodeState.PENDING
    children: list["CulpritNode"] = field(default_factory=list)
    parent: Optional["CulpritNode"] = field(default=None, repr=False)
    outstanding: int = 0
    failed: list[str] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return len(self.members) == 1

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


def split_members(members: Sequence[str]) -> list[tuple[str, ...]]:
    """Child groups of a failing group, in arrival order."""
    k = len(members)
    if k <= 1:
        return []
    if k <= STOP_SIZE:
        return [(m,) for m in members]
    half = (k + 1) // 2
    return [tuple(members[:half]), tuple(members[half:])]


def plan_culprit(batch_members: Sequence[str], failing_tests: Sequence[str]) -> CulpritNode:
    """Full split tree below a failing batch, before any outcome is known.

    The root stands for the batch itself; every node carries the root's
    failing tests as an upper bound (the tests actually rerun shrink as
    children pass).
    """
    if not batch_members:
        raise ValueError("batch has no members")
    tests = tuple(dict.fromkeys(failing_tests))
    if not tests:
        raise ValueError("no failing tests: culprit finding not needed")

    def build(members, parent):
        node = CulpritNode(tuple(members), tests, parent=parent)
        node.children = [build(g, node) for g in split_members(members)]
        return node

    return build(tuple(batch_members), None)


def tests_for_group(group: Sequence[str], tests: Sequence[str], trace: Trace) -> tuple[str, ...]:
    return tuple(t for t in tests if any(trace.change(c).requests(t) for c in group))


def requesters(members: Sequence[str], test_id: str, trace: Trace) -> tuple[str, ...]:
    return tuple(c for c in members if trace.change(c).requests(test_id))


def expand(node: CulpritNode, trace: Trace) -> list[CulpritNode]:
    """Create the children of a resolved node whose runs failed."""
    children = []
    if node.failed:
        for group in split_members(node.members):
            tests = tests_for_group(group, node.failed, trace)
            if tests:
                children.append(CulpritNode(group, tests, parent=node))
    node.children = children
    return children


def attribute_verdicts(node: CulpritNode, run: TestRunRequest, now: int, ledger: VerdictLedger) -> None:
    """Record what a finished run of ``node`` proves.

    A passing run clears every member for that test. A failing run with one
    member convicts it. A failing run with several members defers to the
    children of ``node``.
    """
    if run.outcome is TestOutcome.PASS:
        for cid in run.members:
            ledger.record(cid, run.test_id, TestOutcome.PASS, now)
    elif len(run.members) == 1:
        ledger.record(run.members[0], run.test_id, TestOutcome.FAIL, now)
    else:
        node.failed.append(run.test_id)


@lru_cache(maxsize=None)
def culprit_run_bounds(k: int) -> tuple[int, int]:
    """Fewest and most extra runs of one failing test for a batch of ``k``.

    Assumes every member requests the test and at least one is a culprit.
    """
    if k < 1:
        raise ValueError("batch size must be >= 1")
    if k == 1:
        return (0, 0)
    if k <= STOP_SIZE:
        return (k, k)
    big, small = (k + 1) // 2, k // 2
    lo_big, hi_big = culprit_run_bounds(big)
    lo_small, hi_small = culprit_run_bounds(small)
    return (2 + min(lo_big, lo_small), 2 + hi_big + hi_small)


def count_culprit_runs(batch_members: Sequence[str], failing_tests: Sequence[str], trace: Trace) -> int:
    """Extra runs BatchStop4 needs after the batch failed ``failing_tests``.

    Untimed replay of the same rules the engine applies.
    """
    root = CulpritNode(tuple(batch_members), tuple(failing_tests))
    for t in root.failing_tests:
        members = requesters(root.members, t, trace)
        if len(members) > 1 and any(trace.change(c).test(t).outcome is TestOutcome.FAIL for c in members):
            root.failed.append(t)
    total = 0
    frontier = expand(root, trace)
    while frontier:
        nxt = []
        for node in frontier:
            for t in node.failing_tests:
                members = requesters(node.members, t, trace)
                total += 1
                fails = any(trace.change(c).test(t).outcome is TestOutcome.FAIL for c in members)
                if fails and len(members) > 1:
                    node.failed.append(t)
            nxt.extend(expand(node, trace))
        frontier = nxt
    return total
