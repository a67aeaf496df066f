"""Seeded synthetic traces for desk-scale experiments."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..kernels import fifo_schedule
from .model import ChangeSpec, RequestedTest, TestOutcome, Trace


@dataclass(frozen=True)
class SyntheticConfig:
    change_count: int = 500
    test_pool_size: int = 40
    tests_per_change: tuple[int, int] = (3, 12)
    mean_interarrival: float = 60_000.0
    mean_duration: float = 30_000.0
    failure_rate: float = 0.085
    seed: int = 0
    # machines of the imagined historical CI, used to fill actual_end_time
    history_machines: int = 8

    def __post_init__(self):
        lo, hi = self.tests_per_change
        if self.change_count < 1 or self.test_pool_size < 1:
            raise ValueError("change_count and test_pool_size must be >= 1")
        if not 1 <= lo <= hi:
            raise ValueError(f"tests_per_change must satisfy 1 <= lo <= hi, got {self.tests_per_change}")
        if not 0.0 <= self.failure_rate <= 1.0:
            raise ValueError(f"failure_rate must be in [0, 1], got {self.failure_rate}")
        if self.mean_interarrival < 0 or self.mean_duration < 0:
            raise ValueError("means must be non-negative")
        if self.history_machines < 1:
            raise ValueError("history_machines must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tests_per_change"] = list(self.tests_per_change)
        return d


def generate_synthetic(config: SyntheticConfig) -> Trace:
    """Draw a trace; a pure function of ``config``.

    Interarrival gaps and test durations are exponential with the configured
    means; each change requests a uniform random subset of the test pool whose
    size is uniform over ``tests_per_change`` (capped at the pool size), and
    every requested test fails independently with ``failure_rate``. The
    ``actual_end_time`` of each change is its completion under FIFO isolated
    testing on ``history_machines`` machines.
    """
    rng = np.random.default_rng(config.seed)
    n = config.change_count
    pool = config.test_pool_size
    width = len(str(pool - 1))
    test_names = [f"t{i:0{width}d}" for i in range(pool)]

    gaps = rng.exponential(config.mean_interarrival, size=n) if config.mean_interarrival > 0 else np.zeros(n)
    gaps[0] = 0.0
    commits = np.rint(np.cumsum(gaps)).astype(np.int64)
    lo, hi = config.tests_per_change
    lo, hi = min(lo, pool), min(hi, pool)
    counts = rng.integers(lo, hi + 1, size=n)

    changes = []
    ready, durations, owner = [], [], []
    cwidth = len(str(n - 1))
    for i in range(n):
        k = int(counts[i])
        picks = rng.choice(pool, size=k, replace=False)
        if config.mean_duration > 0:
            durs = np.rint(rng.exponential(config.mean_duration, size=k)).astype(np.int64)
        else:
            durs = np.zeros(k, dtype=np.int64)
        fails = rng.random(size=k) < config.failure_rate
        requested = tuple(
            RequestedTest(test_names[int(p)], int(d), TestOutcome.FAIL if f else TestOutcome.PASS)
            for p, d, f in zip(picks, durs, fails)
        )
        changes.append((f"c{i:0{cwidth}d}", int(commits[i]), requested))
        ready.extend([int(commits[i])] * k)
        durations.extend(int(d) for d in durs)
        owner.extend([i] * k)

    start, _ = fifo_schedule(np.asarray(ready, dtype=np.int64), np.asarray(durations, dtype=np.int64),
                             config.history_machines)
    end = np.asarray(start) + np.asarray(durations, dtype=np.int64)
    finish = np.zeros(n, dtype=np.int64)
    np.maximum.at(finish, np.asarray(owner, dtype=np.int64), end)

    return Trace.from_changes(
        ChangeSpec(cid, commit, req, int(max(finish[i], commit)))
        for i, (cid, commit, req) in enumerate(changes)
    )
