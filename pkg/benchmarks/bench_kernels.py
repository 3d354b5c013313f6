"""Timing comparison of the two kernel flavors (numba loops vs numpy).

Runs every hot kernel on shapes the training pipeline actually hits,
checks both flavors agree numerically, and prints median wall times.

    python benchmarks/bench_kernels.py --repeats 7
"""

import argparse
import time

import numpy as np

from gpdesign import backend
from gpdesign import kernels


def _time(fn, repeats):
    fn()  # warmup; first numba call pays the compile
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def _cases(rng):
    # conv shapes mirror the geometry autoencoder at desk resolution
    x = rng.standard_normal((20, 8, 32, 32))
    w = rng.standard_normal((16, 8, 4, 4))
    b = rng.standard_normal(16)
    gy = rng.standard_normal((20, 16, 16, 16))
    mask = (rng.random((148, 148)) < 0.12).astype(np.float64)
    sym = rng.standard_normal((300, 300))
    sym = sym @ sym.T

    def conv_all():
        y = kernels.conv_fwd(x, w, b, 2, 1)
        kernels.conv_dx(y, w, 2, 1, 32, 32)
        kernels.conv_dw(x, y, 2, 1, 4, 4)
        return y

    def edt():
        return kernels.edt_sq(mask)

    def jacobi():
        v = np.eye(300)
        return kernels.jacobi_sweeps(sym.copy(), v, 30, 1e-12)[0]

    return [("conv fwd+dx+dw 20x8x32x32", conv_all),
            ("edt_sq 148x148", edt),
            ("jacobi_sweeps 300x300", jacobi)]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if not backend.HAS_NUMBA:
        print("numba not importable; nothing to compare")
        return

    rng = np.random.default_rng(args.seed)
    rows = []
    for label, fn in _cases(rng):
        results = {}
        for flavor in ("numpy", "numba"):
            backend.set_backend(flavor)
            results[flavor] = (_time(fn, args.repeats), fn())
        backend.set_backend(None)
        t_np, out_np = results["numpy"]
        t_nb, out_nb = results["numba"]
        agree = np.allclose(np.asarray(out_np), np.asarray(out_nb), rtol=1e-9, atol=1e-9)
        rows.append((label, t_np, t_nb, t_np / t_nb, agree))

    print(f"{'kernel':34s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}  match")
    for label, t_np, t_nb, speedup, agree in rows:
        print(f"{label:34s} {t_np * 1e3:9.2f}ms {t_nb * 1e3:9.2f}ms {speedup:7.2f}x  {agree}")


if __name__ == "__main__":
    main()
