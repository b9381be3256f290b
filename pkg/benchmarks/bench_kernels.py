"""Compare the compiled and numpy kernel backends.

Run ``python benchmarks/bench_kernels.py [--sizes 6 8 10] [--repeat 3]``.
For each kernel and grid size it prints the best wall time per backend,
the speed-up and the largest relative difference between the two results.
"""
import argparse
import time

import numpy as np

from landaulab import _pykernels

try:
    from landaulab import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(N, rng):
    K = rng.standard_normal((2 * N,) * 3)
    g = rng.standard_normal((N,) * 3)
    yield "direct_convolve", (np.ascontiguousarray(K), g)
    n = min(N**3, 600)
    pts = rng.standard_normal((n, 3))
    F = rng.uniform(0.1, 1.0, n)
    gl = rng.standard_normal((n, 3))
    yield "dissipation_sum", (pts, F, gl, -1.0)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[6, 8, 10])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    if _ckernels is None:
        print("compiled backend not built; timing the numpy backend only")
    print(f"{'kernel':<16} {'N':>3} {'python [s]':>11} {'cython [s]':>11} {'speed-up':>9} {'rel diff':>10}")
    for N in args.sizes:
        for name, a in cases(N, rng):
            tp, rp = best_of(lambda: getattr(_pykernels, name)(*a), args.repeat)
            if _ckernels is None:
                print(f"{name:<16} {N:>3} {tp:>11.4f} {'-':>11} {'-':>9} {'-':>10}")
                continue
            tc, rc = best_of(lambda: getattr(_ckernels, name)(*a), args.repeat)
            rp, rc = np.asarray(rp), np.asarray(rc)
            diff = float(np.max(np.abs(rp - rc)) / max(np.max(np.abs(rp)), 1e-300))
            print(f"{name:<16} {N:>3} {tp:>11.4f} {tc:>11.4f} {tp / tc:>9.1f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
