#!/usr/bin/env python3
"""Throughput comparison of the numba and numpy kernel backends.

Times the counter-based uniform generator and each trial kernel on both
backends over identical workloads and prints trials/second plus the speedup.
Run from the repository root:

    python3 benchmarks/kernel_benchmark.py [--trials N] [--repeats K]
"""

import argparse
import math
import time

import numpy as np

from eprsim import kernels

PAIR_A = np.array([0.0])
PAIR_B = np.array([math.pi / 8])
CUMW = np.array([1.0])

WORKLOADS = {
    "uniforms": lambda n: kernels.uniform_block(1, 0, n, kernels.SLOT_ARM_A),
    "malus": lambda n: kernels.malus_block(1, 0, n, 0.5),
    "two-channel qm": lambda n: kernels.two_channel_block(
        1, 0, n, kernels.MODEL_QM, PAIR_A, PAIR_B, CUMW, 0
    ),
    "two-channel lhv-sign": lambda n: kernels.two_channel_block(
        1, 0, n, kernels.MODEL_LHV_SIGN, PAIR_A, PAIR_B, CUMW, 0
    ),
    "two-channel lhv-malus": lambda n: kernels.two_channel_block(
        1, 0, n, kernels.MODEL_LHV_MALUS, PAIR_A, PAIR_B, CUMW, 0
    ),
    "qwp chain qm": lambda n: kernels.qwp_block(1, 0, n, kernels.QWP_QM, 0),
    "qwp chain halves": lambda n: kernels.qwp_block(1, 0, n, kernels.QWP_INDEPENDENT_HALVES, 0),
}


def best_time(fn, n, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(n)
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=1 << 21)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = kernels.available_backends()
    if "numba" not in backends:
        print("numba not importable; benchmarking the numpy backend only")

    results: dict[str, dict[str, float]] = {}
    for backend in backends:
        kernels.set_backend(backend)
        for name, fn in WORKLOADS.items():
            fn(1024)  # warm-up (numba compilation, first-touch allocations)
            results.setdefault(name, {})[backend] = best_time(fn, args.trials, args.repeats)
    kernels.set_backend(None)

    width = max(len(name) for name in WORKLOADS)
    print(f"\n{args.trials} trials per call, best of {args.repeats}\n")
    header = f"{'kernel':<{width}}  " + "".join(f"{b + ' (Mtrials/s)':>20}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, timings in results.items():
        row = f"{name:<{width}}  "
        for backend in backends:
            row += f"{args.trials / timings[backend] / 1e6:>20.1f}"
        if len(backends) == 2:
            row += f"{timings['numpy'] / timings['numba']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
