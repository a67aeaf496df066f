# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. See ``_fallback.py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp

from libc.stdint cimport int64_t

cnp.import_array()


cdef inline void _sift_down_pair(int64_t[:] key, int64_t[:] idx, Py_ssize_t size, Py_ssize_t pos) noexcept nogil:
    cdef Py_ssize_t child
    cdef int64_t k = key[pos]
    cdef int64_t v = idx[pos]
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and (key[child + 1] < key[child] or
                                 (key[child + 1] == key[child] and idx[child + 1] < idx[child])):
            child += 1
        if key[child] < k or (key[child] == k and idx[child] < v):
            key[pos] = key[child]
            idx[pos] = idx[child]
            pos = child
        else:
            break
    key[pos] = k
    idx[pos] = v


cdef inline void _sift_up_pair(int64_t[:] key, int64_t[:] idx, Py_ssize_t pos) noexcept nogil:
    cdef Py_ssize_t parent
    cdef int64_t k = key[pos]
    cdef int64_t v = idx[pos]
    while pos > 0:
        parent = (pos - 1) >> 1
        if k < key[parent] or (k == key[parent] and v < idx[parent]):
            key[pos] = key[parent]
            idx[pos] = idx[parent]
            pos = parent
        else:
            break
    key[pos] = k
    idx[pos] = v


cdef inline void _sift_down(int64_t[:] h, Py_ssize_t size, Py_ssize_t pos) noexcept nogil:
    cdef Py_ssize_t child
    cdef int64_t v = h[pos]
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and h[child + 1] < h[child]:
            child += 1
        if h[child] < v:
            h[pos] = h[child]
            pos = child
        else:
            break
    h[pos] = v


cdef inline void _sift_up(int64_t[:] h, Py_ssize_t pos) noexcept nogil:
    cdef Py_ssize_t parent
    cdef int64_t v = h[pos]
    while pos > 0:
        parent = (pos - 1) >> 1
        if v < h[parent]:
            h[pos] = h[parent]
            pos = parent
        else:
            break
    h[pos] = v


def fifo_schedule(ready, duration, Py_ssize_t machines):
    cdef int64_t[:] r = np.ascontiguousarray(ready, dtype=np.int64)
    cdef int64_t[:] d = np.ascontiguousarray(duration, dtype=np.int64)
    cdef Py_ssize_t n = r.shape[0]
    if d.shape[0] != n:
        raise ValueError("ready and duration must have the same length")
    if machines < 1:
        raise ValueError("machines must be >= 1")
    start_arr = np.empty(n, dtype=np.int64)
    machine_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[:] start = start_arr
    cdef int64_t[:] machine = machine_arr

    idle_arr = np.arange(machines, dtype=np.int64)
    busy_key_arr = np.empty(machines, dtype=np.int64)
    busy_idx_arr = np.empty(machines, dtype=np.int64)
    cdef int64_t[:] idle = idle_arr
    cdef int64_t[:] bkey = busy_key_arr
    cdef int64_t[:] bidx = busy_idx_arr
    cdef Py_ssize_t n_idle = machines
    cdef Py_ssize_t n_busy = 0
    zero_arr = np.empty(machines, dtype=np.int64)
    cdef int64_t[:] zero = zero_arr
    cdef Py_ssize_t n_zero = 0, z
    cdef Py_ssize_t i
    cdef int64_t s, k
    cdef int64_t last_start = r[0] if n > 0 else 0

    with nogil:
        for i in range(n):
            s = r[i] if r[i] > last_start else last_start
            if s > last_start and n_zero > 0:
                for z in range(n_zero):
                    idle[n_idle] = zero[z]
                    _sift_up(idle, n_idle)
                    n_idle += 1
                n_zero = 0
            while n_busy > 0 and bkey[0] <= s:
                idle[n_idle] = bidx[0]
                _sift_up(idle, n_idle)
                n_idle += 1
                n_busy -= 1
                bkey[0] = bkey[n_busy]
                bidx[0] = bidx[n_busy]
                _sift_down_pair(bkey, bidx, n_busy, 0)
            if n_idle == 0:
                if n_zero > 0:
                    for z in range(n_zero):
                        idle[n_idle] = zero[z]
                        _sift_up(idle, n_idle)
                        n_idle += 1
                    n_zero = 0
                else:
                    s = bkey[0]
                    while n_busy > 0 and bkey[0] <= s:
                        idle[n_idle] = bidx[0]
                        _sift_up(idle, n_idle)
                        n_idle += 1
                        n_busy -= 1
                        bkey[0] = bkey[n_busy]
                        bidx[0] = bidx[n_busy]
                        _sift_down_pair(bkey, bidx, n_busy, 0)
            k = idle[0]
            n_idle -= 1
            idle[0] = idle[n_idle]
            _sift_down(idle, n_idle, 0)
            start[i] = s
            machine[i] = k
            if d[i] == 0:
                zero[n_zero] = k
                n_zero += 1
            else:
                bkey[n_busy] = s + d[i]
                bidx[n_busy] = k
                _sift_up_pair(bkey, bidx, n_busy)
                n_busy += 1
            last_start = s
    return start_arr, machine_arr


def rank_sum_counts(doubled_ranks, Py_ssize_t n1):
    cdef int64_t[:] ranks = np.ascontiguousarray(doubled_ranks, dtype=np.int64)
    cdef Py_ssize_t n = ranks.shape[0]
    if n1 < 0 or n1 > n:
        raise ValueError("n1 out of range")
    cdef int64_t total = 0
    cdef Py_ssize_t i
    for i in range(n):
        total += ranks[i]
    table_arr = np.zeros((n1 + 1, total + 1), dtype=np.float64)
    cdef double[:, :] table = table_arr
    table[0, 0] = 1.0
    cdef int64_t seen = 0
    cdef int64_t rv, s
    cdef Py_ssize_t j
    with nogil:
        for i in range(n):
            rv = ranks[i]
            seen += rv
            j = n1 if n1 < n else n
            while j > 0:
                s = seen
                while s >= rv:
                    if table[j - 1, s - rv] != 0.0:
                        table[j, s] += table[j - 1, s - rv]
                    s -= 1
                j -= 1
    return np.array(table_arr[n1], dtype=np.float64)


def dominance_counts(x_sorted, y_sorted):
    cdef double[:] xs = np.ascontiguousarray(x_sorted, dtype=np.float64)
    cdef double[:] ys = np.ascontiguousarray(y_sorted, dtype=np.float64)
    cdef Py_ssize_t nx = xs.shape[0]
    cdef Py_ssize_t ny = ys.shape[0]
    cdef Py_ssize_t lo = 0, hi = 0, i
    cdef int64_t greater = 0, less = 0
    cdef double x
    with nogil:
        for i in range(nx):
            x = xs[i]
            while lo < ny and ys[lo] < x:
                lo += 1
            if hi < lo:
                hi = lo
            while hi < ny and ys[hi] <= x:
                hi += 1
            greater += lo
            less += ny - hi
    return int(greater), int(less)
