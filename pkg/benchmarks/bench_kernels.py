"""
Timing of the compiled and pure-numpy Monte-Carlo kernels.

Usage: python benchmarks/bench_kernels.py [--trials N] [--points M] [--repeat R]
"""
import argparse
import time

import numpy as np

from compbf import _kernels


def make_batch(trials, points, seed=0):
    rng = np.random.default_rng(seed)
    counts = rng.poisson(points, trials)
    offsets = np.zeros(trials + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    n = int(offsets[-1])
    r2 = points / np.pi * rng.random(n)
    gains = rng.standard_exponential(n)
    h1 = rng.standard_gamma(2.0, trials)
    return r2, gains, offsets, h1


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--points", type=int, default=3000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--K", type=int, default=2)
    args = ap.parse_args()

    r2, gains, offsets, h1 = make_batch(args.trials, args.points)
    if _kernels.cluster_sir_jit is None:
        print("numba unavailable; only the numpy path can run")
        return
    # first call compiles (or loads the on-disk cache)
    _kernels.cluster_sir(r2[:10], gains[:10], np.array([0, 10]), h1[:1], 1, 4.0, use_numba=True)

    print(f"{args.trials} trials x ~{args.points} points, K={args.K}, beta=4")
    for name, fn in (("cluster_sir", _kernels.cluster_sir),):
        t_jit, (s_jit, _) = best_of(lambda: fn(r2, gains, offsets, h1, args.K, 4.0, use_numba=True), args.repeat)
        t_np, (s_np, _) = best_of(lambda: fn(r2, gains, offsets, h1, args.K, 4.0, use_numba=False), args.repeat)
        dev = np.max(np.abs(s_jit / s_np - 1))
        print(f"{name:>18}: numba {t_jit:.4f}s  numpy {t_np:.4f}s  speedup {t_np / t_jit:5.1f}x  max rel dev {dev:.1e}")

    t_jit, a = best_of(lambda: _kernels.segment_power_sum(r2, gains, offsets, 4.0, use_numba=True), args.repeat)
    t_np, b = best_of(lambda: _kernels.segment_power_sum(r2, gains, offsets, 4.0, use_numba=False), args.repeat)
    print(f"{'segment_power_sum':>18}: numba {t_jit:.4f}s  numpy {t_np:.4f}s  speedup {t_np / t_jit:5.1f}x  "
          f"max rel dev {np.max(np.abs(a / b - 1)):.1e}")


if __name__ == "__main__":
    main()
