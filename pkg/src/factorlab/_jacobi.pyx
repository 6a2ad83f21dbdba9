# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled cyclic Jacobi eigensolver kernel.

Row-major cyclic sweeps over pairs (p, q), p < q; rotations chosen to zero
a[p, q] exactly; convergence when the off-diagonal Frobenius norm falls to
``tol`` times the Frobenius norm of the input.  The fallback in
``_jacobi_py`` applies the same rotations in the same order and evaluates
the convergence test with the same numpy expression, so the two
implementations take identical sweep counts on identical intermediate
matrices.
"""
from libc.math cimport sqrt, fabs, copysign

import numpy as np

IS_COMPILED = True


def _off_sq(arr) -> float:
    """Sum of squares of the off-diagonal entries (numpy summation order)."""
    # Summed directly rather than as frobenius**2 - diag**2, which cancels
    # catastrophically once the off-diagonal mass is near roundoff.
    off = arr.copy()
    np.fill_diagonal(off, 0.0)
    return float((off * off).sum())


def jacobi_cyclic(double[:, ::1] a, double tol, int max_sweeps, bint want_vectors):
    """Diagonalize symmetric ``a`` in place; see ``_jacobi_py.jacobi_cyclic``."""
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, p, q
    cdef double thresh_sq
    cdef double apq, app, aqq, theta, t, c, s, aip, aiq, vp, vq
    cdef int sweeps = 0
    cdef bint converged

    vt_arr = np.eye(n) if want_vectors else np.zeros((1, 1))
    cdef double[:, ::1] vt = vt_arr  # rows of vt are eigenvector candidates

    arr = np.asarray(a)
    thresh_sq = tol * tol * float((arr * arr).sum())
    converged = _off_sq(arr) <= thresh_sq

    while (not converged) and sweeps < max_sweeps:
        with nogil:
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    app = a[p, p]
                    aqq = a[q, q]
                    theta = 0.5 * (aqq - app) / apq
                    if fabs(theta) > 1e150:
                        t = 0.5 / theta
                    else:
                        t = copysign(1.0, theta) / (
                            fabs(theta) + sqrt(1.0 + theta * theta)
                        )
                    c = 1.0 / sqrt(1.0 + t * t)
                    s = t * c
                    # rotate rows p and q (contiguous), then mirror into columns
                    for i in range(n):
                        aip = a[p, i]
                        aiq = a[q, i]
                        a[p, i] = c * aip - s * aiq
                        a[q, i] = s * aip + c * aiq
                    for i in range(n):
                        a[i, p] = a[p, i]
                        a[i, q] = a[q, i]
                    a[p, p] = app - t * apq
                    a[q, q] = aqq + t * apq
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    if want_vectors:
                        for i in range(n):
                            vp = vt[p, i]
                            vq = vt[q, i]
                            vt[p, i] = c * vp - s * vq
                            vt[q, i] = s * vp + c * vq
        sweeps += 1
        converged = _off_sq(arr) <= thresh_sq

    d = np.asarray(a).diagonal().copy()
    v = vt_arr.T.copy() if want_vectors else None
    return d, v, sweeps, converged
