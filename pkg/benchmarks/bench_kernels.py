"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--seed 0]
"""
import argparse
import timeit

import numpy as np

from cuetrack import _ext


def bench(fn, args, repeat, number):
    return min(timeit.repeat(lambda: fn(*args), repeat=repeat, number=number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _ext.compiled_kernels is None:
        print("compiled kernels not built; only the fallback is available")
        return 1
    rng = np.random.default_rng(args.seed)
    kernels = {"cython": _ext.compiled_kernels, "python": _ext.python_kernels}

    print(f"{'kernel':<12} {'size':>6} {'cython ms':>10} {'python ms':>10} {'speedup':>8}")
    for n in (8, 32, 128, 256):
        cost = rng.uniform(0, 1, (n, n))
        ref = kernels["python"].solve_square(cost)
        assert np.array_equal(kernels["cython"].solve_square(cost), ref)
        number = max(1, 2000 // (n * n // 8 + 1))
        t = {k: bench(m.solve_square, (cost,), args.repeat, number) for k, m in kernels.items()}
        print(f"{'hungarian':<12} {n:>6} {t['cython'] * 1e3:>10.3f} {t['python'] * 1e3:>10.3f} "
              f"{t['python'] / t['cython']:>7.1f}x")
    for n in (8, 32, 128, 512):
        a = np.column_stack([rng.uniform(0, 1000, (n, 2)), rng.uniform(10, 100, (n, 2))])
        b = a + rng.normal(0, 5, a.shape)
        b[:, 2:] = np.abs(b[:, 2:])
        np.testing.assert_allclose(kernels["cython"].iou_matrix(a, b), kernels["python"].iou_matrix(a, b), atol=1e-12)
        number = max(1, 20000 // (n * n // 8 + 1))
        t = {k: bench(m.iou_matrix, (a, b), args.repeat, number) for k, m in kernels.items()}
        print(f"{'iou_matrix':<12} {n:>6} {t['cython'] * 1e3:>10.3f} {t['python'] * 1e3:>10.3f} "
              f"{t['python'] / t['cython']:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
