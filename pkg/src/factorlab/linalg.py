"""Symmetric linear algebra on a deterministic cyclic Jacobi kernel.

The compiled kernel (``factorlab._jacobi``, Cython) is preferred; a
numpy-vectorized fallback with the same sweep order is selected at import
time when the extension is unavailable.  All operations are pure functions
of their inputs and bit-for-bit deterministic per implementation.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import PanelData, as_panel_array
from .errors import InvalidInput, NumericalFailure, SingularMatrix

try:
    from . import _jacobi as _kernel
except ImportError:  # extension not built; use the pure-python twin
    from . import _jacobi_py as _kernel

HAVE_COMPILED_KERNEL = bool(getattr(_kernel, "IS_COMPILED", False))

#: Convergence: off-diagonal Frobenius norm <= JACOBI_TOL * ||A||_F.
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
#: Covariance eigenvalues below RANK_TOL * (largest) are reported as exact zeros.
RANK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """An n x n symmetric matrix (symmetrized and frozen at construction)."""

    values: np.ndarray

    @classmethod
    def from_array(cls, a) -> "SymMatrix":
        arr = np.asarray(a, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InvalidInput("expected a square 2-D array")
        if arr.shape[0] < 1:
            raise InvalidInput("matrix must have dimension >= 1")
        sym = (arr + arr.T) / 2.0
        sym.setflags(write=False)
        return cls(sym)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenvalues (non-increasing) paired with orthonormal eigenvector columns."""

    eigenvalues: np.ndarray  # (k,)
    eigenvectors: np.ndarray  # (n, k); column j pairs with eigenvalues[j]

    @property
    def n(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def k(self) -> int:
        return self.eigenvalues.shape[0]


def _square_values(a) -> np.ndarray:
    if isinstance(a, SymMatrix):
        return a.values
    return SymMatrix.from_array(a).values


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry is non-negative.

    Ties go to the smallest row index (argmax's convention).  In-place.
    """
    if vecs.size == 0:
        return vecs
    lead = np.argmax(np.abs(vecs), axis=0)
    flip = vecs[lead, np.arange(vecs.shape[1])] < 0.0
    vecs[:, flip] *= -1.0
    return vecs


def _run_kernel(values: np.ndarray, want_vectors: bool):
    work = np.array(values, dtype=np.float64, order="C")
    if not np.all(np.isfinite(work)):
        raise InvalidInput("matrix has non-finite entries")
    d, v, _sweeps, converged = _kernel.jacobi_cyclic(
        work, JACOBI_TOL, JACOBI_MAX_SWEEPS, want_vectors
    )
    if not converged:
        raise NumericalFailure(
            f"Jacobi failed to converge within {JACOBI_MAX_SWEEPS} sweeps"
        )
    return d, v


def sym_eigen(a) -> EigenSystem:
    """Full eigendecomposition of a symmetric matrix.

    Deterministic: cyclic Jacobi with fixed sweep order; eigenvalues sorted
    non-increasing (stable sort); each eigenvector's largest-magnitude entry
    is made non-negative.
    """
    values = _square_values(a)
    d, v, = _run_kernel(values, want_vectors=True)
    order = np.argsort(-d, kind="stable")
    vals = d[order]
    vecs = _fix_signs(np.ascontiguousarray(v[:, order]))
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return EigenSystem(vals, vecs)


def sym_eigvals(a) -> np.ndarray:
    """Eigenvalues only (non-increasing), skipping eigenvector accumulation."""
    values = _square_values(a)
    d, _ = _run_kernel(values, want_vectors=False)
    return np.sort(d, kind="stable")[::-1].copy()


def top_k_eigen(a, k: int) -> EigenSystem:
    """Leading ``k`` eigenpairs; identical to the full decomposition truncated."""
    values = _square_values(a)
    n = values.shape[0]
    if not 1 <= int(k) <= n:
        raise InvalidInput(f"k={k} out of range [1, {n}]")
    full = sym_eigen(values)
    vals = full.eigenvalues[: int(k)].copy()
    vecs = full.eigenvectors[:, : int(k)].copy()
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return EigenSystem(vals, vecs)


def sample_covariance(panel, indices=None, center: bool = False) -> SymMatrix:
    """Second-moment matrix ``|S|^-1 sum_{t in S} x_t x_t'`` of the selected rows.

    No mean-centering by default (zero-mean model); ``center=True`` subtracts
    the per-series mean over the selected rows first (used on real data).
    """
    rows = _select_rows(panel, indices)
    m = rows.shape[0]
    if center:
        rows = rows - rows.mean(axis=0)
    return SymMatrix.from_array(rows.T @ rows / m)


def _select_rows(panel, indices) -> np.ndarray:
    arr = as_panel_array(panel)
    if indices is not None:
        idx = np.asarray(indices, dtype=int)
        if idx.size == 0:
            raise InvalidInput("empty index set")
        arr = arr[idx]
    if arr.shape[0] == 0:
        raise InvalidInput("no rows selected")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("panel has non-finite entries")
    return arr


def invert_spd(a) -> SymMatrix:
    """Inverse of a symmetric positive definite matrix via Cholesky.

    Raises SingularMatrix when the factorization fails or the product
    check ``||A A^-1 - I||_max <= 1e-8`` does not hold (matrix too
    ill-conditioned to invert reliably).
    """
    values = _square_values(a)
    if not np.all(np.isfinite(values)):
        raise InvalidInput("matrix has non-finite entries")
    n = values.shape[0]
    try:
        chol = np.linalg.cholesky(values)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix("matrix is not positive definite") from exc
    chol_inv = np.linalg.solve(chol, np.eye(n))
    inv = chol_inv.T @ chol_inv
    residual = np.abs(values @ inv - np.eye(n)).max()
    if residual > 1e-8:
        raise SingularMatrix(
            f"matrix numerically singular (inverse residual {residual:.3e})"
        )
    return SymMatrix.from_array(inv)


@dataclass(frozen=True, eq=False)
class CovSpectrum:
    """Spectrum (and leading eigenvectors) of a sample covariance matrix.

    ``eigenvalues`` holds all min(n, m) computable eigenvalues in
    non-increasing order with entries below ``RANK_TOL`` times the largest
    clamped to exact zero; the remaining ``n - min(n, m)`` eigenvalues of
    the covariance are implicitly zero.  ``trace`` is the trace of the full
    n x n covariance, so tail sums can be formed without the implicit zeros.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray | None  # (n, k)
    n: int
    n_obs: int
    trace: float


def cov_eigen(panel, indices=None, k: int = 0, center: bool = False) -> CovSpectrum:
    """Spectrum and leading-k eigenvectors of the rows' sample covariance.

    Routes through the n x n covariance when n <= m and through the m x m
    Gram matrix ``X X'/m`` otherwise (identical nonzero spectrum; eigenvector
    j of the covariance recovered as ``X' v_j / sqrt(m mu_j)``).
    """
    rows = _select_rows(panel, indices)
    m, n = rows.shape
    if center:
        rows = rows - rows.mean(axis=0)
    k = int(k)
    if k < 0 or k > n:
        raise InvalidInput(f"k={k} out of range [0, {n}]")
    if n <= m:
        cov = SymMatrix.from_array(rows.T @ rows / m)
        trace = float(np.trace(cov.values))
        if k > 0:
            es = sym_eigen(cov)
            vals = es.eigenvalues.copy()
            vecs = es.eigenvectors[:, :k].copy()
        else:
            vals = sym_eigvals(cov)
            vecs = None
        _clamp_rank(vals)
        if vecs is not None and vals[: k].min(initial=np.inf) == 0.0:
            warnings.warn(
                "requested eigenvectors beyond the numerical rank; "
                "zero-eigenvalue directions contribute zero terms"
            )
    else:
        gram = SymMatrix.from_array(rows @ rows.T / m)
        trace = float(np.trace(gram.values))
        if k > 0:
            es = sym_eigen(gram)
            vals = es.eigenvalues.copy()
        else:
            vals = sym_eigvals(gram)
            es = None
        _clamp_rank(vals)
        vecs = None
        if k > 0:
            vecs = np.zeros((n, k))
            kept = 0
            for j in range(k):
                if vals[j] <= 0.0:
                    break
                w = rows.T @ es.eigenvectors[:, j]
                w /= np.sqrt(m * vals[j])
                norm = np.sqrt(w @ w)
                if norm > 0:
                    w /= norm
                vecs[:, j] = w
                kept = j + 1
            if kept < k:
                warnings.warn(
                    "requested eigenvectors beyond the numerical rank; "
                    "zero-eigenvalue directions contribute zero terms"
                )
            _fix_signs(vecs)
    vals.setflags(write=False)
    if vecs is not None:
        vecs.setflags(write=False)
    return CovSpectrum(vals, vecs, n=n, n_obs=m, trace=trace)


def _clamp_rank(vals: np.ndarray) -> None:
    """Clamp eigenvalues below RANK_TOL * largest (incl. round-off negatives) to 0."""
    if vals.size == 0:
        return
    top = vals[0]
    if top > 0.0:
        vals[vals < RANK_TOL * top] = 0.0
    else:
        # a PSD matrix whose largest eigenvalue is <= 0 is numerically zero
        vals[:] = 0.0


__all__ = [
    "SymMatrix",
    "EigenSystem",
    "CovSpectrum",
    "HAVE_COMPILED_KERNEL",
    "JACOBI_TOL",
    "JACOBI_MAX_SWEEPS",
    "RANK_TOL",
    "sym_eigen",
    "sym_eigvals",
    "top_k_eigen",
    "sample_covariance",
    "cov_eigen",
    "invert_spd",
    "PanelData",
]
