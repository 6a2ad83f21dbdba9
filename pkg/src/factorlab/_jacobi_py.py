"""Pure-python cyclic Jacobi eigensolver (numpy-vectorized fallback).

Mirrors the compiled kernel in ``_jacobi.pyx``: identical sweep order
(row-major over pairs p < q), identical rotation formulas, identical
convergence rule, so the two implementations agree to rounding error and
each is bit-for-bit deterministic on its own.
"""
from __future__ import annotations

import math

import numpy as np

IS_COMPILED = False


def _off_sq(arr: np.ndarray) -> float:
    """Sum of squares of the off-diagonal entries (numpy summation order)."""
    # Summed directly rather than as frobenius**2 - diag**2, which cancels
    # catastrophically once the off-diagonal mass is near roundoff.
    off = arr.copy()
    np.fill_diagonal(off, 0.0)
    return float((off * off).sum())


def jacobi_cyclic(
    a: np.ndarray, tol: float, max_sweeps: int, want_vectors: bool
) -> tuple[np.ndarray, np.ndarray | None, int, bool]:
    """Diagonalize symmetric ``a`` in place by cyclic Jacobi rotations.

    Parameters
    ----------
    a : (n, n) float64, C-contiguous
        Symmetric matrix; overwritten with the (nearly) diagonal form.
    tol : float
        Convergence when the off-diagonal Frobenius norm falls to
        ``tol`` times the Frobenius norm of the input.
    max_sweeps : int
        Hard cap on full cyclic sweeps.
    want_vectors : bool
        Accumulate the rotation product (eigenvectors in columns).

    Returns
    -------
    (diag, vectors, sweeps, converged)
    """
    n = a.shape[0]
    v = np.eye(n) if want_vectors else None
    thresh_sq = tol * tol * float((a * a).sum())
    sweeps = 0
    converged = _off_sq(a) <= thresh_sq
    # the huge-theta branch may overflow transiently (handled; C kernel is silent)
    with np.errstate(over="ignore"):
        return _sweep_loop(a, v, thresh_sq, max_sweeps, want_vectors, sweeps, converged)


def _sweep_loop(a, v, thresh_sq, max_sweeps, want_vectors, sweeps, converged):
    n = a.shape[0]
    while not converged and sweeps < max_sweeps:
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = 0.5 * (aqq - app) / apq
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (
                        abs(theta) + math.sqrt(1.0 + theta * theta)
                    )
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                colp = a[:, p].copy()
                colq = a[:, q].copy()
                newp = c * colp - s * colq
                newq = s * colp + c * colq
                a[:, p] = newp
                a[p, :] = newp
                a[:, q] = newq
                a[q, :] = newq
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                if want_vectors:
                    vp = v[:, p].copy()
                    vq = v[:, q].copy()
                    v[:, p] = c * vp - s * vq
                    v[:, q] = s * vp + c * vq
        sweeps += 1
        converged = _off_sq(a) <= thresh_sq
    return np.diagonal(a).copy(), v, sweeps, converged
