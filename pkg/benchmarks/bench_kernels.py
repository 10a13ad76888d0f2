#!/usr/bin/env python3
"""Benchmark the compiled hot-path kernels against the pure-Python mirror.

Times the one-step-ahead predicted-measurement recursion and the trade
simulation loop on synthetic inputs of several sizes, checks the two
backends agree bit-for-bit, and prints a speedup table.

Usage:
    python3 benchmarks/bench_kernels.py [--sizes 1000,10000,100000]
                                        [--repeats 5] [--seed 0]
"""

import argparse
import time

import numpy as np

from lgss import _kernels
from lgss._kernels import python_backend

try:
    from lgss import _speedup as compiled_backend
except ImportError:                                    # pragma: no cover
    compiled_backend = None


def make_filter_inputs(n, seed):
    rng = np.random.default_rng(seed)
    closes = 100.0 + np.cumsum(rng.normal(0.05, 1.0, n))
    f = np.array([[0.9, 0.1], [0.0, 0.8]])
    h = np.array([1.0, 0.5])
    q = np.array([[0.04, 0.01], [0.01, 0.09]])
    x0 = np.zeros(2)
    p0 = np.eye(2) * 10.0
    c_scale = np.array([0.5, 0.2])
    c_center = np.array([0.1, 0.1])
    return closes, f, h, q, 0.25, x0, p0, c_scale, c_center


def make_trade_inputs(n, seed):
    rng = np.random.default_rng(seed)
    closes = 100.0 + np.cumsum(rng.normal(0.02, 1.0, n))
    opens = np.concatenate(([closes[0]], closes[:-1]))
    wicks = np.abs(rng.normal(0.0, 0.4, size=(n, 2)))
    highs = np.maximum(opens, closes) + wicks[:, 0]
    lows = np.minimum(opens, closes) - wicks[:, 1]
    signals = rng.choice([-1, 0, 1], size=n).astype(np.int64)
    return opens, highs, lows, closes, signals


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def equal_trees(a, b):
    if isinstance(a, (tuple, list)):
        return len(a) == len(b) and all(equal_trees(x, y)
                                        for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1000,10000,100000",
                    help="comma-separated series lengths")
    ap.add_argument("--repeats", type=int, default=5,
                    help="timing repeats (best is reported)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",") if s]

    print(f"active backend: {_kernels.BACKEND}")
    if compiled_backend is None:
        print("compiled extension unavailable; timing python mirror only")
    backends = [("python", python_backend)]
    if compiled_backend is not None:
        backends.append(("compiled", compiled_backend))

    header = f"{'kernel':<16} {'n':>8} " + "".join(
        f"{name + ' (ms)':>16}" for name, _ in backends)
    if compiled_backend is not None:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    for n in sizes:
        closes, f, h, q, r, x0, p0, cs, cc = make_filter_inputs(n, args.seed)
        times, outputs = [], []
        for _, mod in backends:
            def run(mod=mod):
                return mod.kf_pred_meas(closes, f, h, q, r, x0.copy(),
                                        p0.copy(), cs, cc, True)
            outputs.append(run())
            times.append(best_of(run, args.repeats))
        if len(outputs) == 2 and not equal_trees(outputs[0], outputs[1]):
            raise SystemExit("backend mismatch in kf_pred_meas")
        row = f"{'kf_pred_meas':<16} {n:>8} " + "".join(
            f"{t * 1e3:>16.3f}" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>9.1f}x"
        print(row)

        opens, highs, lows, closes_t, signals = make_trade_inputs(
            n, args.seed + 1)
        times, outputs = [], []
        for _, mod in backends:
            def run(mod=mod):
                return mod.simulate_trades(opens, highs, lows, closes_t,
                                           signals, 0.25, 12.5, 1.55,
                                           20.0, 10.0, True)
            outputs.append(run())
            times.append(best_of(run, args.repeats))
        if len(outputs) == 2 and not equal_trees(outputs[0], outputs[1]):
            raise SystemExit("backend mismatch in simulate_trades")
        row = f"{'simulate_trades':<16} {n:>8} " + "".join(
            f"{t * 1e3:>16.3f}" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
