"""Pure-Python versions of the hot kernels.

Selected automatically when the compiled ``_core`` extension is unavailable,
or forced with ``BATCHSIM_PURE_PYTHON=1``. Semantics are identical to the
Cython implementation; ``tests/test_kernels.py`` checks that.
"""

from __future__ import annotations

import heapq

import numpy as np


def fifo_schedule(ready, duration, machines):
    """List-schedule runs in queue order on identical machines.

    Run ``i`` cannot start before its ready time, before run ``i - 1`` started
    (FIFO), or before some machine is free. Among the machines idle at the
    start instant, the lowest index is used. A machine that ran a zero-length
    job only becomes available again once every idle machine at that instant
    has been handed work.

    Returns ``(start, machine)`` as int64 arrays.
    """
    ready = np.asarray(ready, dtype=np.int64)
    duration = np.asarray(duration, dtype=np.int64)
    n = ready.shape[0]
    if duration.shape[0] != n:
        raise ValueError("ready and duration must have the same length")
    if machines < 1:
        raise ValueError("machines must be >= 1")
    start = np.empty(n, dtype=np.int64)
    machine = np.empty(n, dtype=np.int64)

    idle = list(range(machines))  # heap of machine indices
    busy: list[tuple[int, int]] = []  # heap of (free_at, index)
    # machines that ran a zero-length job at last_start; they rejoin the idle
    # pool in the next dispatch round, like the event loop's completions
    zero: list[int] = []
    ready_l = ready.tolist()
    dur_l = duration.tolist()
    last_start = ready_l[0] if n else 0
    for i in range(n):
        s = ready_l[i] if ready_l[i] > last_start else last_start
        if s > last_start and zero:
            for k in zero:
                heapq.heappush(idle, k)
            zero.clear()
        while busy and busy[0][0] <= s:
            heapq.heappush(idle, heapq.heappop(busy)[1])
        if not idle:
            if zero:
                for k in zero:
                    heapq.heappush(idle, k)
                zero.clear()
            else:
                s = busy[0][0]
                while busy and busy[0][0] <= s:
                    heapq.heappush(idle, heapq.heappop(busy)[1])
        k = heapq.heappop(idle)
        start[i] = s
        machine[i] = k
        if dur_l[i] == 0:
            zero.append(k)
        else:
            heapq.heappush(busy, (s + dur_l[i], k))
        last_start = s
    return start, machine


def rank_sum_counts(doubled_ranks, n1):
    """Null distribution of the doubled rank sum of ``n1`` items.

    ``doubled_ranks`` holds the pooled (mid)ranks times two, so ties stay
    integral. Entry ``s`` of the result counts the ``n1``-subsets whose doubled
    rank sum equals ``s``.
    """
    ranks = [int(r) for r in np.asarray(doubled_ranks, dtype=np.int64)]
    if n1 < 0 or n1 > len(ranks):
        raise ValueError("n1 out of range")
    total = sum(ranks)
    # table[j][s]: subsets of size j with doubled sum s
    table = [[0.0] * (total + 1) for _ in range(n1 + 1)]
    table[0][0] = 1.0
    seen = 0
    for r in ranks:
        seen += r
        for j in range(min(n1, len(ranks)), 0, -1):
            prev = table[j - 1]
            cur = table[j]
            for s in range(seen, r - 1, -1):
                c = prev[s - r]
                if c:
                    cur[s] += c
    return np.asarray(table[n1], dtype=np.float64)


def dominance_counts(x_sorted, y_sorted):
    """Count pairs with ``x > y`` and ``x < y`` over two ascending arrays."""
    xs = np.asarray(x_sorted, dtype=np.float64).tolist()
    ys = np.asarray(y_sorted, dtype=np.float64).tolist()
    ny = len(ys)
    greater = 0
    less = 0
    lo = 0  # ys[:lo] < x
    hi = 0  # ys[:hi] <= x
    for x in xs:
        while lo < ny and ys[lo] < x:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < ny and ys[hi] <= x:
            hi += 1
        greater += lo
        less += ny - hi
    return greater, less
