"""Timing comparison between the compiled kernel and the pure-Python loop.

Runs every builtin preset on both backends, reports the best wall time of
each, the speedup, and the largest float-column difference between the two
traces.  Usage:

    python3 benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from cbfsim import BUILTIN_NAMES, builtin_config, fast_loop_available, run_scenario
from cbfsim.trace import FLAG_COLUMNS


def _best_time(cfg, backend, repeats):
    best = float("inf")
    trace = None
    for _ in range(repeats):
        start = time.perf_counter()
        trace = run_scenario(cfg, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, trace


def main():
    parser = argparse.ArgumentParser(
        description="Benchmark the compiled kernel against the pure-Python loop."
    )
    parser.add_argument(
        "--repeats", type=int, default=3, help="timed runs per backend (best kept)"
    )
    args = parser.parse_args()
    if not fast_loop_available():
        raise SystemExit("compiled kernel not available; rebuild with Cython first")

    print(f"{'scenario':<16} {'rows':>6} {'pure [ms]':>10} {'fast [ms]':>10} "
          f"{'speedup':>8} {'max diff':>10}")
    for name in BUILTIN_NAMES:
        cfg = builtin_config(name)
        pure_s, tp = _best_time(cfg, "pure", args.repeats)
        fast_s, tf = _best_time(cfg, "fast", args.repeats)
        float_idx = [i for i, c in enumerate(tp.columns) if c not in FLAG_COLUMNS]
        diff = float(np.abs(tp.data[:, float_idx] - tf.data[:, float_idx]).max())
        print(f"{name:<16} {tp.n_rows:>6} {1e3 * pure_s:>10.2f} "
              f"{1e3 * fast_s:>10.2f} {pure_s / fast_s:>7.1f}x {diff:>10.2e}")


if __name__ == "__main__":
    main()
