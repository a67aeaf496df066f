"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--size 200000] [--repeat 5] [--json]

Also times one end-to-end TestAll simulation per backend in a subprocess,
since the backend is picked at import time.
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from batchsim.kernels import _fallback

try:
    from batchsim.kernels import _core
except ImportError:
    _core = None


def kernel_cases(size, rng):
    ready = np.sort(rng.integers(0, size * 10, size=size)).astype(np.int64)
    dur = rng.integers(0, 200, size=size).astype(np.int64)
    x = np.sort(rng.normal(0, 1, size))
    y = np.sort(rng.normal(0.1, 1, size))
    ranks = np.arange(2, 2 * 40 + 1, 2, dtype=np.int64)  # 40 pooled samples, no ties
    return {
        "fifo_schedule": lambda impl: impl.fifo_schedule(ready, dur, 16),
        "rank_sum_counts(n=40)": lambda impl: impl.rank_sum_counts(ranks, 20),
        "dominance_counts": lambda impl: impl.dominance_counts(x, y),
    }


E2E = """
import time
from batchsim import simulate, kernels
from batchsim.trace import SyntheticConfig, generate_synthetic
t = generate_synthetic(SyntheticConfig(change_count=20000, seed=1))
s = time.perf_counter()
simulate(t, "testall", 16)
print(kernels.BACKEND, time.perf_counter() - s)
"""


def end_to_end():
    out = {}
    for pure in ("0", "1"):
        env = dict(os.environ, BATCHSIM_PURE_PYTHON=pure)
        res = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
        backend, secs = res.stdout.split()
        out[backend] = float(secs)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="print machine-readable results")
    ap.add_argument("--no-e2e", action="store_true", help="skip the end-to-end simulation timing")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    impls = {"python": _fallback}
    if _core is not None:
        impls["cython"] = _core
    else:
        print("compiled kernels not built; timing the fallback only", file=sys.stderr)

    results = {}
    for name, fn in kernel_cases(args.size, rng).items():
        row = {}
        for backend, impl in impls.items():
            fn(impl)  # warm up
            row[backend] = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat))
        results[name] = row
    if not args.no_e2e:
        results["simulate testall 20k changes"] = end_to_end()

    if args.json:
        print(json.dumps(results, indent=2, sort_keys=True))
        return 0
    print(f"{'case':32} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for name, row in results.items():
        py, cy = row.get("python"), row.get("cython")
        speed = f"{py / cy:8.1f}x" if py and cy else "       -"
        print(f"{name:32} {py:10.4f} {cy if cy is not None else float('nan'):10.4f} {speed}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
