"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--rows 2000] [--repeat 3]

Checks that both backends agree on every output, then prints the best wall
time of each and the speed-up.
"""

import argparse
import time

import numpy as np

from mapact import _kernels
from mapact.envs import make

py = _kernels.python_backend
cy = _kernels.compiled_backend


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def stop_inputs(rows, cols, seed):
    rng = np.random.default_rng(seed)
    dm = rng.integers(0, 3, size=(rows, cols))
    nov = rng.choice([1.0, 0.5, 1 / np.sqrt(3), 0.2], size=(rows, cols))
    return dm, nov


def grid_inputs(n):
    out = []
    for seed in range(n):
        env = make("grid", seed, "maze")
        env.reset()
        lv = env.level
        cells, lens = lv.hazard_arrays()
        out.append((lv.walk, *lv.start, *lv.target, cells, lens, lv.period, 2, 64))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--cols", type=int, default=15)
    ap.add_argument("--grids", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if cy is None:
        print("compiled kernels unavailable; only the Python backend is timed")

    dm, nov = stop_inputs(args.rows, args.cols, 0)
    params = (3, 5, 0.5, 3, 15)
    grids = grid_inputs(args.grids)
    cases = [
        ("scan_stop_batch", lambda k: k.scan_stop_batch(dm, nov, *params)),
        ("plan_grid", lambda k: [k.plan_grid(*g) for g in grids]),
    ]
    print(f"{'kernel':<16} {'python (s)':>11} {'cython (s)':>11} {'speed-up':>9}")
    for name, run in cases:
        tp, outp = best_of(lambda: run(py), args.repeat)
        if cy is None:
            print(f"{name:<16} {tp:>11.4f} {'-':>11} {'-':>9}")
            continue
        tc, outc = best_of(lambda: run(cy), args.repeat)
        if name == "scan_stop_batch":
            assert np.array_equal(outp, outc), "backends disagree on stop decisions"
        else:
            assert [(c, list(d)) for c, d in outp] == [(c, list(d)) for c, d in outc], "backends disagree on plans"
        print(f"{name:<16} {tp:>11.4f} {tc:>11.4f} {tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
