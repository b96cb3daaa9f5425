"""Time the hot kernels on both backends.

    python benchmarks/bench_kernels.py [--repeat 5]

The first numba call includes JIT compilation (or a cache load), so it is
reported separately and excluded from the timed runs.  Both backends must
agree to 1e-10 on every input or the script exits non-zero.
"""
import argparse
import sys
import time

import numpy as np

from stabletransfer import kernels, sl2
from stabletransfer._accel import HAVE_NUMBA


def cases(rng):
    P, K = 2000, 801
    im = rng.normal(size=(P, 1))
    x = np.linspace(-4, 4, K)[:, None]
    c = np.exp(-x[:, 0] ** 2).astype(np.complex128)
    yield "exp_sum 2000x801", lambda b: kernels.exp_sum(im, x, c, -1.0, backend=b)

    nodes, w = sl2.gauss_legendre_circle(4096)
    vals = np.array([sl2.normalized_character(lab, nodes) for lab in sl2.stable_labels(40)])
    yield "hermitian_gram 40x4096", lambda b: kernels.hermitian_gram(vals, w, backend=b)

    n = 121
    g = np.linspace(-3, 3, n)
    X, Y = np.meshgrid(g, g, indexing="ij")
    samples = np.exp(-X ** 2 - Y ** 2).astype(np.complex128)
    pts = rng.uniform(-3, 3, (200_000, 2))
    yield "multilinear_interp 121^2 @ 2e5", lambda b: kernels.multilinear_interp(samples, -3.0, 0.05, pts, backend=b)


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba unavailable (or STK_NUMBA=0): timing numpy only")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<34}{'numpy s':>10}{'numba s':>10}{'jit s':>9}{'speedup':>9}")
    bad = 0
    for name, fn in cases(rng):
        t_np = best_of(lambda: fn("numpy"), args.repeat)
        if HAVE_NUMBA:
            t0 = time.perf_counter()
            ref = fn("numba")
            t_jit = time.perf_counter() - t0
            t_nb = best_of(lambda: fn("numba"), args.repeat)
            diff = float(np.abs(ref - fn("numpy")).max())
            bad += diff > 1e-10
            print(f"{name:<34}{t_np:>10.4f}{t_nb:>10.4f}{t_jit:>9.2f}{t_np / t_nb:>8.1f}x"
                  + ("" if diff <= 1e-10 else f"  MISMATCH {diff:.2e}"))
        else:
            print(f"{name:<34}{t_np:>10.4f}{'-':>10}{'-':>9}{'-':>9}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
