"""Benchmark the compiled Jacobi kernel against its pure-Python twin.

Both kernels implement the same cyclic sweep in the same order, so their
outputs agree to rounding; this script measures how much the compiled
extension buys at the matrix sizes the covariance paths actually use.

Run:  python benchmarks/bench_eigen.py [--sizes 50,100,200,400] [--repeats 3]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from factorlab import _jacobi, _jacobi_py
from factorlab.linalg import JACOBI_MAX_SWEEPS, JACOBI_TOL


def random_symmetric(n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((n, n))
    return (a + a.T) / 2.0


def time_kernel(kernel, a: np.ndarray, repeats: int) -> tuple[float, np.ndarray]:
    best = np.inf
    diag = None
    for _ in range(repeats):
        work = np.array(a, dtype=np.float64, order="C")
        start = time.perf_counter()
        diag, _, sweeps, converged = kernel.jacobi_cyclic(
            work, JACOBI_TOL, JACOBI_MAX_SWEEPS, True
        )
        best = min(best, time.perf_counter() - start)
        if not converged:
            raise RuntimeError(f"kernel failed to converge in {sweeps} sweeps")
    return best, np.sort(np.asarray(diag))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--sizes", default="50,100,200,400",
        help="comma-separated matrix sizes",
    )
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(args.seed)

    if not _jacobi.IS_COMPILED:
        print("warning: factorlab._jacobi is not the compiled extension")
    print(f"{'n':>6} {'compiled (s)':>14} {'pure python (s)':>16} {'speedup':>9}")
    for n in sizes:
        a = random_symmetric(n, rng)
        t_c, d_c = time_kernel(_jacobi, a, args.repeats)
        t_p, d_p = time_kernel(_jacobi_py, a, args.repeats)
        gap = float(np.max(np.abs(d_c - d_p)))
        scale = float(np.max(np.abs(d_c))) or 1.0
        agree = "ok" if gap <= 1e-10 * scale else f"DISAGREE ({gap:.2e})"
        print(f"{n:>6} {t_c:>14.4f} {t_p:>16.4f} {t_p / t_c:>8.1f}x  {agree}")


if __name__ == "__main__":
    main()
