"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 48] [--reps 20000]
"""
import argparse
import timeit

import numpy as np

from tuningbands import _pykernels

try:
    from tuningbands import _kernels
except ImportError:
    _kernels = None


def cases(n, reps):
    rng = np.random.default_rng(0)
    u = np.sort(rng.random((reps, n)), axis=1)
    i = np.arange(1, n + 1, dtype=np.float64)
    a, b = np.tile(i, 50), np.tile(n + 1.0 - i, 50)
    x = rng.random(a.size)
    return {
        "betainc_array": lambda k: k.betainc_array(a, b, x),
        "ppf_array": lambda k: k.ppf_array(a, b, x),
        "coverage_array (hd)": lambda k: k.coverage_array(a, b, x, k.HD),
        "interval_array (hd)": lambda k: k.interval_array(i, n + 1.0 - i, 0.95, k.HD),
        "ln_statistics (et)": lambda k: k.ln_statistics(u, k.ET),
        "ln_statistics (hd)": lambda k: k.ln_statistics(u, k.HD),
        "ks_statistics": lambda k: k.ks_statistics(u),
    }


def best_of(fn, repeat=3):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=48)
    parser.add_argument("--reps", type=int, default=20_000)
    args = parser.parse_args()
    if _kernels is None:
        print("compiled extension not built; only the fallback is timed")
    print(f"n={args.n}, null replicates={args.reps}")
    print(f"{'kernel':<22}{'python s':>12}{'compiled s':>12}{'speedup':>10}")
    for name, fn in cases(args.n, args.reps).items():
        py = best_of(lambda: fn(_pykernels))
        if _kernels is None:
            print(f"{name:<22}{py:>12.4f}{'-':>12}{'-':>10}")
            continue
        c = best_of(lambda: fn(_kernels))
        print(f"{name:<22}{py:>12.4f}{c:>12.4f}{py / c:>9.1f}x")


if __name__ == "__main__":
    main()
