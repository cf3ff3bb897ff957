#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Loads both backends directly (ignoring CBM_PURE_PYTHON) and times the three
hot-path kernels at ingest-realistic sizes.
"""

import argparse
import time

import numpy as np

from cbmengine._kernels import _pykernels

try:
    from cbmengine._kernels import _ckernels
except ImportError:
    _ckernels = None


def bench(fn, *args, repeat=20000):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=20000)
    args = parser.parse_args()

    rng = np.random.default_rng(7)
    window = rng.normal(70.0, 0.5, 32)
    xs = np.sort(rng.uniform(0, 100, 12))
    ys = 70 + 0.05 * xs + rng.normal(0, 0.2, 12)
    logt = np.log(rng.weibull(1.5, 5000) * 300.0)

    cases = [
        ("robust_score (32-window)", lambda b: b.robust_score(window, 71.0), args.repeat),
        ("window_median (32-window)", lambda b: b.window_median(window), args.repeat),
        ("linear_fit (12 points)", lambda b: b.linear_fit(xs, ys), args.repeat),
        ("weibull_sums (n=5000)", lambda b: b.weibull_sums(logt, 1.5), max(200, args.repeat // 100)),
    ]

    print(f"{'kernel':<28}{'python':>12}{'compiled':>12}{'speedup':>9}")
    print("-" * 61)
    for name, call, repeat in cases:
        t_py = bench(call, _pykernels, repeat=repeat)
        if _ckernels is None:
            print(f"{name:<28}{t_py * 1e6:>10.2f}us{'n/a':>12}{'n/a':>9}")
            continue
        t_c = bench(call, _ckernels, repeat=repeat)
        print(
            f"{name:<28}{t_py * 1e6:>10.2f}us{t_c * 1e6:>10.2f}us{t_py / t_c:>8.1f}x"
        )
    if _ckernels is None:
        print("\ncompiled backend not built; run: pip install -e . --no-build-isolation")


if __name__ == "__main__":
    main()
