"""Time the symbolic order kernels: numba loops vs the vectorised numpy path.

    python benchmarks/bench_kernels.py [--n 100000] [--repeat 3]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from fibolab import _kernels
from fibolab.kneading import fib_cut_times, fibonacci_kneading_array
from fibolab.postcritical import partition_labels


def _best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _level_arrays(m: int):
    # orient endpoints symbolically; no orbit cache needed
    s = fib_cut_times(m + 4)
    e = fibonacci_kneading_array(1 << 14)
    lows, highs = [], []
    for _, (a, b) in partition_labels(s, m):
        c = _kernels.compare_pairs(e, [a], [b])[0]
        lo, hi = (a, b) if c < 0 else (b, a)
        lows.append(lo)
        highs.append(hi)
    return np.array(lows), np.array(highs)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    e = fibonacci_kneading_array(4 * args.n + 4096)
    rng = np.random.default_rng(0)
    ii = rng.integers(1, args.n, size=args.n)
    jj = rng.integers(1, args.n, size=args.n)
    idx = np.arange(1, args.n + 1)

    print(f"numba available: {_kernels.HAS_NUMBA}")
    if _kernels.HAS_NUMBA:
        # compile outside the timed region
        _kernels.compare_pairs(e, ii[:10], jj[:10], use_numba=True)
    print(f"{'kernel':28s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s}")

    rows = [("compare_pairs (random)", lambda nb: _kernels.compare_pairs(e, ii, jj, use_numba=nb))]
    for m in (3, 6):
        lows, highs = _level_arrays(m)
        if _kernels.HAS_NUMBA:
            _kernels.locate_indices(e, idx[:10], lows, highs, use_numba=True)
        rows.append(
            (f"locate_indices (M_{m}, {len(lows)} iv)", lambda nb, lo=lows, hi=highs: _kernels.locate_indices(e, idx, lo, hi, use_numba=nb))
        )

    for name, fn in rows:
        t_np = _best(lambda: fn(False), args.repeat)
        if _kernels.HAS_NUMBA:
            t_nb = _best(lambda: fn(True), args.repeat)
            assert np.array_equal(fn(False), fn(True)), f"{name}: backends disagree"
            print(f"{name:28s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:7.1f}x")
        else:
            print(f"{name:28s} {t_np:10.4f} {'-':>10s} {'-':>8s}")


if __name__ == "__main__":
    main()
