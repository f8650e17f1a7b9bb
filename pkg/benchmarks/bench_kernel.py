"""Compare the compiled and numpy pair-sum kernels.

Usage::

    python benchmarks/bench_kernel.py [--sizes 1024 4096 16384] [--dim 3] [--repeat 3]

Prints one line per (size, backend) with the best wall time, the cost per
pair and the relative difference of the two results.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dslt_lab import _kernels_py
from dslt_lab.fbm import FbmConfig, sample_path

try:
    from dslt_lab import _kernels
except ImportError:  # extension not built
    _kernels = None


def best_time(fn, repeat):
    best, value = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        value = fn()
        best = min(best, time.perf_counter() - t0)
    return best, value


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1024, 4096, 16384])
    ap.add_argument("--dim", type=int, default=3)
    ap.add_argument("--hurst", type=float, default=0.45)
    ap.add_argument("--eps", type=float, default=0.025)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--numpy-max", type=int, default=8192, help="skip the numpy kernel above this size")
    args = ap.parse_args(argv)

    backends = [("numpy", _kernels_py)]
    if _kernels is not None:
        backends.insert(0, ("cython", _kernels))
    else:
        print("compiled kernel not available; timing numpy only")

    print(f"{'n':>7} {'backend':>8} {'seconds':>10} {'ns/pair':>9} {'rel.diff':>10}")
    for n in args.sizes:
        path = sample_path(FbmConfig(args.hurst, args.dim, 1.0, n, 0))
        xt = np.ascontiguousarray(path.values.T)
        pairs = n * (n + 1) / 2
        ref = None
        for name, mod in backends:
            if name == "numpy" and n > args.numpy_max:
                continue
            sec, val = best_time(lambda: mod.pair_sum(xt, args.eps), args.repeat)
            ref = val if ref is None else ref
            diff = abs(val - ref) / abs(ref) if ref else 0.0
            print(f"{n:>7} {name:>8} {sec:>10.4f} {1e9 * sec / pairs:>9.2f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
