#!/usr/bin/env python3
"""Benchmark the JIT-compiled hot kernels against their numpy twins.

Run:  python3 benchmarks/bench_kernels.py [--repeats N]

The same comparison can be forced package-wide with ISACBIP_NO_NUMBA=1.
"""

import argparse
import time

import numpy as np

from isacbip import _kernels
from isacbip.fusion import ca_process_noise, ca_transition


def _time(fn, args, repeats):
    fn(*args)  # warm up (JIT compile / cache load)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def bench_kalman(repeats):
    n = 880  # one observation window at 400 Hz
    rng = np.random.default_rng(0)
    z = rng.standard_normal((n, 4)).cumsum(axis=0)
    has = np.ones(n, dtype=bool)
    r = np.full((n, 4), 0.25)
    args = (z, has, r, ca_transition(1 / 400), ca_process_noise(1 / 400, 5.0), np.zeros(6), np.eye(6))
    t_py = _time(_kernels.kalman_core_py, args, repeats)
    rows = [("kalman_core numpy", t_py, 1.0)]
    if _kernels.NUMBA_ENABLED:
        t_nb = _time(_kernels.kalman_core, args, repeats)
        rows.append(("kalman_core numba", t_nb, t_py / t_nb))
    return rows


def bench_power(repeats):
    rng = np.random.default_rng(1)
    z = rng.standard_normal((8, 1024, 48)) + 1j * rng.standard_normal((8, 1024, 48))
    t_py = _time(_kernels.noncoherent_power_py, (z,), repeats)
    rows = [("noncoherent_power numpy", t_py, 1.0)]
    if _kernels.NUMBA_ENABLED:
        t_nb = _time(_kernels.noncoherent_power, (z,), repeats)
        rows.append(("noncoherent_power numba", t_nb, t_py / t_nb))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=30)
    args = ap.parse_args()
    print(f"numba enabled: {_kernels.NUMBA_ENABLED}")
    rows = bench_kalman(args.repeats) + bench_power(args.repeats)
    width = max(len(r[0]) for r in rows)
    for name, dt, speedup in rows:
        print(f"{name.ljust(width)}  {dt * 1e3:8.3f} ms/call  {speedup:5.2f}x")


if __name__ == "__main__":
    main()
