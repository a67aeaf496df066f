"""Deterministic discrete-event simulator for batched CI testing.

Per instant the loop handles change arrivals, then run completions (verdict
attribution and culprit expansion), then lets the policy react, then hands
ready runs to idle machines. Idle machines pull from one FIFO ready queue,
lowest machine index first; a run occupies its machine for exactly its
duration. Ties inside a phase are broken by sequence number.
"""

from __future__ import annotations

import heapq
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .culprit import CulpritNode, NodeState, attribute_verdicts, expand, requesters
from .ledgers import ExecutedRun, ExecutionLedger, VerdictLedger
from .runs import Purpose, SimulationError, TestRunRequest, check_run, make_run
from .strategies import StrategyConfig, StrategyKind, form_batch, make_policy
from .trace import Trace

SCHEMA_VERSION = 1


@dataclass(eq=False)
class Batch:
    batch_id: int
    members: tuple[str, ...]
    formed_at: int
    root: CulpritNode
    outstanding: int = 0


@dataclass
class SimResult:
    trace: Trace = field(repr=False)
    strategy: StrategyConfig
    machines: int
    verdicts: VerdictLedger
    executions: ExecutionLedger
    machine_utilization: list[float]
    wall_clock_end: int
    untested: tuple[str, ...] = ()

    def feedback_times(self) -> dict[str, int]:
        """Feedback time per tested change, in trace order."""
        out = {}
        skip = set(self.untested)
        for ch in self.trace.changes:
            if ch.change_id not in skip:
                out[ch.change_id] = self.verdicts.last_verdict_time(ch.change_id) - ch.commit_time
        return out

    def to_dict(self) -> dict:
        verdicts = []
        for ch in self.trace.changes:
            for t in ch.test_ids:
                entry = self.verdicts.get(ch.change_id, t)
                if entry is not None:
                    verdicts.append([ch.change_id, t, entry[0].value, entry[1]])
        return {
            "schema_version": SCHEMA_VERSION,
            "strategy": self.strategy.label,
            "machines": self.machines,
            "wall_clock_end": self.wall_clock_end,
            "total_machine_time": self.executions.total_machine_time,
            "machine_utilization": [round(u, 9) for u in self.machine_utilization],
            "untested": list(self.untested),
            "batch_events": [list(e) for e in self.executions.batch_events],
            "runs": [er.to_dict() for er in self.executions.runs],
            "verdicts": verdicts,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


class Simulation:
    def __init__(self, trace: Trace, strategy: StrategyConfig, machines: int):
        if machines < 1:
            raise ValueError(f"machines must be >= 1, got {machines}")
        self.trace = trace
        self.strategy = strategy
        self.machines = machines
        self.policy = make_policy(strategy)
        self.now = trace.changes[0].commit_time if trace.changes else 0
        self.ready: deque[TestRunRequest] = deque()
        self.idle = list(range(machines))
        self._completions: list = []  # (end, seq, machine, run)
        self._seq = 0
        self._dispatched = 0
        self._next_run_id = 0
        self._batches: list[Batch] = []
        self._owner: dict[int, tuple[Batch, CulpritNode]] = {}
        self._busy_time = [0] * machines
        self.verdicts = VerdictLedger()
        self.executions = ExecutionLedger()

    # -- policy-facing API -------------------------------------------------

    def open_batch(self, members: Sequence[str], tests: Optional[Sequence[str]] = None) -> list[TestRunRequest]:
        """Form a batch now and return its primary runs without queueing them."""
        members = tuple(members)
        batch_id = len(self._batches)
        runs = form_batch(members, self.trace, self.now, self._next_run_id, batch_id, tests)
        self._next_run_id += len(runs)
        root = CulpritNode(members, tuple(r.test_id for r in runs), state=NodeState.RUNNING)
        batch = Batch(batch_id, members, self.now, root)
        self._batches.append(batch)
        self.executions.batch_events.append((self.now, len(members)))
        for run in runs:
            self._adopt(run, batch, root)
        return runs

    def submit_batch(self, members: Sequence[str], tests: Optional[Sequence[str]] = None) -> list[TestRunRequest]:
        runs = self.open_batch(members, tests)
        self.ready.extend(runs)
        return runs

    # -- internals ---------------------------------------------------------

    def _adopt(self, run: TestRunRequest, batch: Batch, node: CulpritNode) -> None:
        check_run(run, self.trace)
        if run.ready_time < self.now and run.purpose is Purpose.CULPRIT:
            raise SimulationError(f"culprit run {run.run_id} ready before its parent finished")
        self._owner[run.run_id] = (batch, node)
        node.outstanding += 1
        batch.outstanding += 1

    def _start(self, run: TestRunRequest) -> None:
        machine = heapq.heappop(self.idle)
        end = self.now + run.duration
        self._busy_time[machine] += run.duration
        self.executions.runs.append(ExecutedRun(run, self.now, end, machine, self._dispatched))
        self._dispatched += 1
        heapq.heappush(self._completions, (end, self._seq, machine, run))
        self._seq += 1

    def _dispatch(self) -> None:
        while self.idle:
            if self.ready:
                run = self.ready.popleft()
            else:
                run = self.policy.pull(self)
                if run is None:
                    return
            self._start(run)

    def _complete(self, machine: int, run: TestRunRequest) -> None:
        heapq.heappush(self.idle, machine)
        batch, node = self._owner.pop(run.run_id)
        attribute_verdicts(node, run, self.now, self.verdicts)
        node.outstanding -= 1
        batch.outstanding -= 1
        if node.outstanding == 0:
            node.state = NodeState.RESOLVED
            for child in expand(node, self.trace):
                child.state = NodeState.RUNNING
                for t in child.failing_tests:
                    culprit = make_run(
                        self._next_run_id,
                        t,
                        requesters(child.members, t, self.trace),
                        self.trace,
                        Purpose.CULPRIT,
                        self.now,
                        batch.batch_id,
                    )
                    self._next_run_id += 1
                    self._adopt(culprit, batch, child)
                    self.ready.append(culprit)
        if batch.outstanding == 0:
            self.policy.on_batch_done(self, batch)

    def run(self) -> SimResult:
        changes = self.trace.changes
        n = len(changes)
        ai = 0
        last_time = self.now
        while True:
            next_arrival = changes[ai].commit_time if ai < n else None
            next_done = self._completions[0][0] if self._completions else None
            if next_arrival is None and next_done is None:
                break
            if next_done is None or (next_arrival is not None and next_arrival <= next_done):
                self.now = next_arrival
            else:
                self.now = next_done
            while ai < n and changes[ai].commit_time == self.now:
                ai += 1
                self.policy.on_arrival(self, changes[ai - 1], ai == n)
            while self._completions and self._completions[0][0] == self.now:
                _, _, machine, run = heapq.heappop(self._completions)
                self._complete(machine, run)
            self.policy.on_tick(self)
            self._dispatch()
            last_time = self.now
        if self.ready:
            raise SimulationError(f"{len(self.ready)} runs left in the ready queue")
        untested = tuple(self.policy.leftover())
        return self._finish(last_time, untested)

    def _finish(self, end: int, untested: tuple[str, ...]) -> SimResult:
        wall = end  # the last processed instant; every run has completed by then
        result = SimResult(
            trace=self.trace,
            strategy=self.strategy,
            machines=self.machines,
            verdicts=self.verdicts,
            executions=self.executions,
            machine_utilization=[b / wall if wall > 0 else 0.0 for b in self._busy_time],
            wall_clock_end=wall,
            untested=untested,
        )
        check_soundness(result)
        return result


def check_soundness(result: SimResult) -> None:
    """Every tested (change, test) has exactly its historical verdict."""
    skip = set(result.untested)
    expected = 0
    for ch in result.trace.changes:
        if ch.change_id in skip:
            continue
        for rt in ch.requested:
            expected += 1
            entry = result.verdicts.get(ch.change_id, rt.test_id)
            if entry is None:
                raise SimulationError(f"no verdict for change {ch.change_id!r} test {rt.test_id!r}")
            if entry[0] is not rt.outcome:
                raise SimulationError(
                    f"change {ch.change_id!r} test {rt.test_id!r}: verdict {entry[0].value}, "
                    f"history {rt.outcome.value}"
                )
            if entry[1] > result.wall_clock_end:
                raise SimulationError("verdict after the end of the simulation")
    if expected != len(result.verdicts):
        raise SimulationError(f"{len(result.verdicts)} verdicts for {expected} requested tests")


def _simulate_testall_fast(trace: Trace, strategy: StrategyConfig, machines: int) -> SimResult:
    """TestAll through the compiled FIFO list-scheduling kernel.

    Produces the same result as the event loop: the queue order is fixed by
    arrival, so each run's start is a list-scheduling decision.
    """
    runs: list[TestRunRequest] = []
    executions = ExecutionLedger()
    for batch_id, ch in enumerate(trace.changes):
        executions.batch_events.append((ch.commit_time, 1))
        for rt in ch.requested:
            runs.append(
                TestRunRequest(len(runs), rt.test_id, (ch.change_id,), rt.duration, rt.outcome,
                               Purpose.PRIMARY, ch.commit_time, batch_id)
            )
    ready = np.fromiter((r.ready_time for r in runs), dtype=np.int64, count=len(runs))
    dur = np.fromiter((r.duration for r in runs), dtype=np.int64, count=len(runs))
    start, machine = kernels.fifo_schedule(ready, dur, machines)
    start_l = start.tolist()
    machine_l = machine.tolist()
    verdicts = VerdictLedger()
    busy = [0] * machines
    done = []
    for i, run in enumerate(runs):
        end = start_l[i] + run.duration
        busy[machine_l[i]] += run.duration
        executions.runs.append(ExecutedRun(run, start_l[i], end, machine_l[i], i))
        done.append((end, i))
    # verdicts are recorded in completion order, as the event loop does
    done.sort()
    for end, i in done:
        run = runs[i]
        verdicts.record(run.members[0], run.test_id, run.outcome, end)
    last_commit = trace.changes[-1].commit_time if trace.changes else 0
    wall = max([last_commit] + [end for end, _ in done[-1:]])
    result = SimResult(
        trace=trace,
        strategy=strategy,
        machines=machines,
        verdicts=verdicts,
        executions=executions,
        machine_utilization=[b / wall if wall > 0 else 0.0 for b in busy],
        wall_clock_end=wall,
    )
    check_soundness(result)
    return result


def simulate(trace: Trace, strategy: StrategyConfig | str, machines: int, fast: bool = True) -> SimResult:
    """Replay ``trace`` under ``strategy`` on ``machines`` identical machines.

    ``fast`` routes TestAll through the list-scheduling kernel; the result is
    identical to the event loop's.
    """
    if isinstance(strategy, str):
        strategy = StrategyConfig.parse(strategy)
    if machines < 1:
        raise ValueError(f"machines must be >= 1, got {machines}")
    if not trace.changes:
        raise ValueError("cannot simulate an empty trace")
    if fast and strategy.kind is StrategyKind.TEST_ALL:
        return _simulate_testall_fast(trace, strategy, machines)
    return Simulation(trace, strategy, machines).run()


def replay_order_check(result: SimResult) -> bool:
    """True iff primary runs were pulled in non-decreasing ready-time order."""
    primaries = [er for er in result.executions.runs if er.run.purpose is Purpose.PRIMARY]
    primaries.sort(key=lambda er: (er.start_time, er.dispatch_seq))
    last = None
    for er in primaries:
        if last is not None and er.run.ready_time < last:
            return False
        last = er.run.ready_time
    return True


def max_concurrency(result: SimResult) -> int:
    """Largest number of runs executing at one instant."""
    events = []
    for er in result.executions.runs:
        if er.end_time > er.start_time:
            events.append((er.start_time, 1))
            events.append((er.end_time, -1))
    events.sort(key=lambda e: (e[0], e[1]))
    cur = best = 0
    for _, delta in events:
        cur += delta
        best = max(best, cur)
    return best
