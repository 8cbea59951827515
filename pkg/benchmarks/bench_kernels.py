"""Time the compiled stencil kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--n 64 128] [--repeat 200]

Prints one line per (kernel, grid size) with the per-call time of each
backend and the speedup. Exits non-zero if the compiled backend is missing.
"""

import argparse
import sys
import timeit

import numpy as np

from hyperns import _kernels_py as py

try:
    from hyperns import _kernels as cy
except ImportError:
    cy = None


def cases(n, rng):
    h = 1.0 / n
    u1 = rng.standard_normal((n + 1, n))
    u2 = rng.standard_normal((n, n + 1))
    p = rng.standard_normal((n, n))
    s12 = rng.standard_normal((n + 1, n + 1))
    line = rng.standard_normal(n * n)
    return {
        "divergence": (u1, u2, h),
        "gradient": (p, h),
        "laplacian": (u1, u2, h),
        "advection": (u1, u2, h),
        "strain_rate": (u1, u2, h),
        "stress_divergence": (p, p.copy(), s12, h),
        "burgers_flux": (line, h),
        "second_difference": (line, h),
        "toeplitz_tridiag_solve": (3.0, -1.0, line),
    }


def bench(fn, args, repeat):
    fn(*args)
    return min(timeit.repeat(lambda: fn(*args), number=repeat, repeat=3)) / repeat


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled backend not built; run `pip install -e .` first", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}{'n':>6}{'python [us]':>14}{'cython [us]':>14}{'speedup':>10}")
    for n in args.n:
        for name, a in cases(n, rng).items():
            tp = bench(getattr(py, name), a, args.repeat)
            tc = bench(getattr(cy, name), a, args.repeat)
            print(f"{name:<24}{n:>6}{tp * 1e6:>14.2f}{tc * 1e6:>14.2f}{tp / tc:>10.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
