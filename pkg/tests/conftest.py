import pytest

from batchsim.trace import ChangeSpec, RequestedTest, SyntheticConfig, TestOutcome, Trace, generate_synthetic

P, F = TestOutcome.PASS, TestOutcome.FAIL


def make_trace(spec, actual_ends=None):
    """spec: list of (change_id, commit, {test: (duration, outcome)})."""
    changes = []
    for i, (cid, commit, tests) in enumerate(spec):
        req = tuple(RequestedTest(t, d, o) for t, (d, o) in tests.items())
        end = actual_ends[i] if actual_ends else None
        changes.append(ChangeSpec(cid, commit, req, end))
    return Trace.from_changes(changes)


def unit(tests, fail=()):
    return {t: (1, F if t in fail else P) for t in tests}


@pytest.fixture
def pair_trace():
    return make_trace([("c1", 0, unit("AB")), ("c2", 1, unit("BC"))])


@pytest.fixture
def five_changes():
    # five arrivals, one unit apart, all requesting A, B, C
    return make_trace([(f"c{i + 1}", i, unit("ABC")) for i in range(5)])


EIGHT_CHANGE_TESTS = ["ABC", "ADE", "AFB", "ACD", "AEF", "ABD", "ACE", "ADF"]


def eight_change_trace(culprits=("c6",)):
    return make_trace(
        [(f"c{i + 1}", i, unit(ts, fail="A" if f"c{i + 1}" in culprits else "")) for i, ts in enumerate(EIGHT_CHANGE_TESTS)]
    )


@pytest.fixture
def eight_changes():
    return eight_change_trace()


def small_synthetic(seed, changes=12):
    return generate_synthetic(
        SyntheticConfig(
            change_count=changes,
            test_pool_size=6,
            tests_per_change=(1, 4),
            mean_interarrival=20,
            mean_duration=30,
            failure_rate=0.15,
            seed=seed,
        )
    )
