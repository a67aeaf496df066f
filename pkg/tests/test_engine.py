import json

import pytest

from batchsim import simulate
from batchsim.engine import Simulation, check_soundness, max_concurrency, replay_order_check
from batchsim.ledgers import ExecutedRun
from batchsim.runs import Purpose, SimulationError
from batchsim.strategies import StrategyConfig
from batchsim.trace import SyntheticConfig, TestOutcome, generate_synthetic
from conftest import make_trace, small_synthetic, unit

ALGOS = ["testall", "batch:2", "batch:4", "batchall", "testcase"]


def run_order(result):
    return [(er.run.test_id, er.run.members) for er in sorted(result.executions.runs, key=lambda e: e.dispatch_seq)]


def test_testall_one_machine(pair_trace):
    res = simulate(pair_trace, "testall", 1)
    assert res.feedback_times() == {"c1": 2, "c2": 3}
    assert run_order(res) == [("A", ("c1",)), ("B", ("c1",)), ("B", ("c2",)), ("C", ("c2",))]


def test_testall_two_machines(pair_trace):
    res = simulate(pair_trace, "testall", 2)
    assert res.feedback_times() == {"c1": 1, "c2": 1}


@pytest.mark.parametrize("algo", ALGOS)
@pytest.mark.parametrize("m", [1, 3])
def test_single_change_single_test(algo, m):
    trace = make_trace([("c1", 7, {"A": (5, TestOutcome.PASS)})])
    res = simulate(trace, algo, m)
    assert res.feedback_times() == {"c1": 5}
    assert res.executions.total_machine_time == 5


def test_full_parallelism_bound():
    durs = {"c1": {"A": 3, "B": 7}, "c2": {"C": 2, "D": 4, "E": 1}}
    trace = make_trace([(c, 0, {t: (d, TestOutcome.PASS) for t, d in ts.items()}) for c, ts in durs.items()])
    res = simulate(trace, "testall", 5)
    assert res.feedback_times() == {"c1": 7, "c2": 4}


@pytest.mark.parametrize("seed", range(25))
@pytest.mark.parametrize("m", [1, 2, 3, 7])
def test_testall_fast_path_is_byte_identical(seed, m):
    trace = small_synthetic(seed, changes=25)
    fast = simulate(trace, "testall", m, fast=True)
    slow = simulate(trace, "testall", m, fast=False)
    assert fast.to_json() == slow.to_json()


def test_testall_fast_path_with_zero_durations():
    trace = generate_synthetic(
        SyntheticConfig(change_count=60, test_pool_size=5, mean_duration=0.4, mean_interarrival=0.5, seed=2)
    )
    assert any(rt.duration == 0 for ch in trace for rt in ch.requested)
    for m in (1, 2, 4):
        assert simulate(trace, "testall", m).to_json() == simulate(trace, "testall", m, fast=False).to_json()


@pytest.mark.parametrize("seed", range(15))
@pytest.mark.parametrize("algo", ALGOS)
def test_run_invariants(seed, algo):
    trace = small_synthetic(seed, changes=20)
    m = 1 + seed % 4
    res = simulate(trace, algo, m)
    assert replay_order_check(res)
    assert max_concurrency(res) <= m
    by_machine = {}
    for er in res.executions.runs:
        assert er.start_time >= er.run.ready_time  # causality
        assert er.end_time - er.start_time == er.run.duration
        for cid in er.run.members:
            assert trace.change(cid).commit_time <= er.run.ready_time
        by_machine.setdefault(er.machine, []).append(er)
    for runs in by_machine.values():
        runs.sort(key=lambda e: (e.start_time, e.end_time))
        for a, b in zip(runs, runs[1:]):
            assert a.end_time <= b.start_time
    assert res.wall_clock_end >= max(er.end_time for er in res.executions.runs)
    assert all(0 <= u <= 1 for u in res.machine_utilization)


def test_replay_order_negative_control(five_changes):
    res = simulate(five_changes, "testall", 1)
    runs = res.executions.runs
    # swap the start times of the first and last primary runs
    a, b = runs[0], runs[-1]
    runs[0] = ExecutedRun(a.run, b.start_time, b.start_time + a.run.duration, a.machine, a.dispatch_seq)
    runs[-1] = ExecutedRun(b.run, a.start_time, a.start_time + b.run.duration, b.machine, b.dispatch_seq)
    assert not replay_order_check(res)


def test_soundness_check_catches_wrong_verdict(pair_trace):
    res = simulate(pair_trace, "testall", 1)
    res.verdicts._entries[("c1", "A")] = (TestOutcome.FAIL, 2)
    with pytest.raises(SimulationError):
        check_soundness(res)


def test_simresult_json_schema(five_changes):
    res = simulate(five_changes, "batchall", 1)
    doc = json.loads(res.to_json())
    assert doc["schema_version"] == 1
    assert doc["strategy"] == "batchall"
    assert doc["batch_events"] == [[0, 1], [3, 3], [6, 1]]
    assert len(doc["runs"]) == 9
    assert len(doc["verdicts"]) == 15
    assert {"run_id", "test_id", "members", "start_time", "end_time", "machine", "purpose"} <= set(doc["runs"][0])


def test_simulate_rejects_bad_arguments(pair_trace):
    with pytest.raises(ValueError):
        simulate(pair_trace, "testall", 0)
    with pytest.raises(ValueError):
        simulate(pair_trace, "bogus", 1)
    with pytest.raises(ValueError):
        Simulation(pair_trace, StrategyConfig.parse("batchall"), 0)


def test_culprit_runs_are_marked():
    trace = make_trace([(f"c{i}", i, unit("A", fail="A" if i == 2 else "")) for i in range(6)])
    res = simulate(trace, "batch:6", 2)
    purposes = [er.run.purpose for er in res.executions.runs]
    assert purposes[0] is Purpose.PRIMARY
    assert purposes.count(Purpose.CULPRIT) == 2 + 3  # halves of 3, then the failing half's 3 leaves
    assert res.verdicts[("c2", "A")][0] is TestOutcome.FAIL
