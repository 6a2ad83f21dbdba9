"""Principal-component estimators of the common component of a panel.

Given a ``(T, n)`` panel ``x`` whose sample covariance has leading
eigenvectors ``w_1, ..., w_k`` and eigenvalues ``mu_1 >= mu_2 >= ...``,
the basic estimator projects each observation onto the leading
eigenvectors::

    chi_hat[t] = sum_j w_j (w_j' x[t])        # method "pc"

Over-estimating the number of factors lets spurious eigenvectors --
typically localized on a few series -- inject noise into ``chi_hat``.
Three modifications bound that damage, all controlled by a coordinate
bound ``c / sqrt(n)`` on eigenvector entries:

* ``"scaled"``  -- divide eigenvector ``j`` by
  ``nu_j = max(1, sqrt(n) * max_i |w_ij| / c)``; both the loading and the
  projection direction shrink, so term ``j`` carries ``nu_j**-2``;
* ``"capped"``  -- clip each entry to ``[-c/sqrt(n), c/sqrt(n)]``; capped
  columns are deliberately not renormalized or re-orthogonalized;
* ``"shrunk"``  -- weight term ``j`` by ``sqrt(mu_j / mu_1)``.

Every estimator also comes in a blockwise form: the time axis is split
into blocks, the covariance for block ``l`` is computed from the sample
*excluding* the block and its neighbors, and rows in the block are fitted
with that block's eigenvectors.

All eigenvector indices in diagnostics are 0-based.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .blocking import BlockPartition, default_block_size, make_partition
from .data import as_panel_array
from .errors import DegenerateSpectrum, InvalidInput
from .linalg import CovSpectrum, cov_eigen

__all__ = [
    "METHODS",
    "EstimatorSpec",
    "FactorFit",
    "default_coord_bound",
    "scale_eigenvectors",
    "cap_eigenvectors",
    "pc_estimate",
    "scaled_pc_estimate",
    "capped_pc_estimate",
    "shrunk_pc_estimate",
    "blockwise_estimate",
    "cross_validate_coord_bound",
    "estimate",
    "multi_estimate",
    "fit_to_json",
]

METHOD_PC = "pc"
METHOD_SCALED = "scaled"
METHOD_CAPPED = "capped"
METHOD_SHRUNK = "shrunk"
METHODS = (METHOD_PC, METHOD_SCALED, METHOD_CAPPED, METHOD_SHRUNK)

#: Default multiplier of the data-driven coordinate bound.
DEFAULT_BOUND_MULTIPLIER = 1.1

#: Default cross-validation grid of multipliers on sqrt(n) * max|w_1|.
CV_MULTIPLIERS = (0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5)


@dataclass(frozen=True)
class EstimatorSpec:
    """Declarative description of one estimator run.

    Attributes
    ----------
    method : str
        One of ``"pc"``, ``"scaled"``, ``"capped"``, ``"shrunk"``.
    r_hat : int
        Number of eigenvector terms to use, at least 1.
    blockwise : bool
        Fit each time block with eigenvectors from the rest of the sample.
    coord_bound : float, optional
        Explicit coordinate bound ``c``; when omitted the data-driven rule
        ``1.1 * sqrt(n) * max_i |w_i1|`` is applied (the maximum over
        blocks in the blockwise case).
    block : BlockPartition, optional
        Partition for blockwise fits; defaults to blocks of
        ``floor(log(T)**2)`` observations.
    center : bool
        Subtract per-series means before the covariance (real data).
    nu_exponent : int
        Power of ``1/nu_j`` applied to each scaled term.  The canonical
        estimator uses 2 (both loading and direction are scaled); 1
        reproduces the single-factor variant.
    """

    method: str
    r_hat: int
    blockwise: bool = False
    coord_bound: float | None = None
    block: BlockPartition | None = None
    center: bool = False
    nu_exponent: int = 2


@dataclass(frozen=True)
class FactorFit:
    """Result of a common-component fit.

    Attributes
    ----------
    chi_hat : (T, n) ndarray
        Estimated common component.
    eps_hat : (T, n) ndarray
        Residuals ``x - chi_hat``.
    spec : EstimatorSpec
        The estimator that produced the fit, with ``coord_bound`` resolved
        to the value actually used.
    diagnostics : tuple of dict
        One record per eigenvector term (per block when blockwise):
        ``{"j", "max_coordinate", "norm_after", ...}`` plus
        ``"scale_factor"`` / ``"cap_count"`` / ``"shrink_weight"``
        depending on the method, and ``"block"`` for blockwise fits.
    spectrum : CovSpectrum, optional
        Full-sample covariance spectrum (full-sample fits only).
    block_spectra : tuple of CovSpectrum, optional
        Per-block covariance spectra (blockwise fits only).
    """

    chi_hat: np.ndarray
    eps_hat: np.ndarray
    spec: EstimatorSpec
    diagnostics: tuple[dict, ...] = ()
    spectrum: CovSpectrum | None = None
    block_spectra: tuple[CovSpectrum, ...] | None = None


def _validate_spec(spec: EstimatorSpec) -> None:
    if spec.method not in METHODS:
        raise InvalidInput(f"unknown method {spec.method!r}; expected {METHODS}")
    if spec.r_hat < 1:
        raise InvalidInput(f"r_hat must be at least 1, got {spec.r_hat}")
    if spec.coord_bound is not None and not (
        spec.coord_bound > 0 and math.isfinite(spec.coord_bound)
    ):
        raise InvalidInput(
            f"coord_bound must be positive, got {spec.coord_bound}"
        )
    if spec.nu_exponent not in (1, 2):
        raise InvalidInput(
            f"nu_exponent must be 1 or 2, got {spec.nu_exponent}"
        )


def default_coord_bound(
    leading_eigenvector: np.ndarray,
    multiplier: float = DEFAULT_BOUND_MULTIPLIER,
) -> float:
    """Data-driven coordinate bound ``multiplier * sqrt(n) * max_i |w_i|``.

    Parameters
    ----------
    leading_eigenvector : (n,) ndarray
        Unit-norm leading eigenvector of the sample covariance.
    multiplier : float
        Safety factor above the largest rescaled coordinate.
    """
    w = np.asarray(leading_eigenvector, dtype=np.float64).ravel()
    peak = float(np.max(np.abs(w))) if w.size else 0.0
    if peak <= 0.0:
        raise InvalidInput("leading eigenvector must be nonzero")
    return multiplier * math.sqrt(w.size) * peak


def scale_eigenvectors(
    eigenvectors: np.ndarray, coord_bound: float
) -> tuple[np.ndarray, np.ndarray]:
    """Divide each column by ``nu_j = max(1, sqrt(n) max_i |w_ij| / c)``.

    Returns the scaled matrix and the vector of scale factors ``nu``.
    After scaling no coordinate exceeds ``coord_bound / sqrt(n)`` and
    column ``j`` has norm ``1 / nu_j``.
    """
    w = np.asarray(eigenvectors, dtype=np.float64)
    if w.ndim != 2:
        raise InvalidInput("eigenvectors must be an (n, k) matrix")
    if not (coord_bound > 0 and math.isfinite(coord_bound)):
        raise InvalidInput(f"coord_bound must be positive, got {coord_bound}")
    peaks = np.max(np.abs(w), axis=0)
    nu = np.maximum(1.0, math.sqrt(w.shape[0]) * peaks / coord_bound)
    return w / nu, nu


def cap_eigenvectors(
    eigenvectors: np.ndarray, coord_bound: float
) -> tuple[np.ndarray, np.ndarray]:
    """Clip every entry to ``[-c/sqrt(n), c/sqrt(n)]``.

    Returns the capped matrix and the per-column count of clipped entries.
    Capped columns are not renormalized: restoring their length would
    re-inflate exactly the spurious mass the cap removed.
    """
    w = np.asarray(eigenvectors, dtype=np.float64)
    if w.ndim != 2:
        raise InvalidInput("eigenvectors must be an (n, k) matrix")
    if not (coord_bound > 0 and math.isfinite(coord_bound)):
        raise InvalidInput(f"coord_bound must be positive, got {coord_bound}")
    bound = coord_bound / math.sqrt(w.shape[0])
    counts = np.count_nonzero(np.abs(w) > bound, axis=0)
    return np.clip(w, -bound, bound), counts


def _shrink_weights(eigenvalues: np.ndarray, r_hat: int) -> np.ndarray:
    mu = np.maximum(np.asarray(eigenvalues[:r_hat], dtype=np.float64), 0.0)
    if mu.size == 0 or mu[0] <= 0.0:
        raise DegenerateSpectrum(
            "leading eigenvalue is not positive; shrink weights undefined"
        )
    return np.sqrt(mu / mu[0])


def _modify(
    method: str,
    vectors: np.ndarray,
    eigenvalues: np.ndarray,
    coord_bound: float | None,
    nu_exponent: int,
    block: int | None,
) -> tuple[np.ndarray, np.ndarray | None, list[dict]]:
    """Apply the method's eigenvector modification.

    Returns ``(vectors_used, term_weights, diagnostics)`` where
    ``term_weights`` multiplies the projections ``x @ vectors`` (None means
    all ones along the capped path, which replaces the vectors instead).
    """
    k = vectors.shape[1]
    peaks = np.max(np.abs(vectors), axis=0)
    records: list[dict] = []

    def record(j: int, **extra) -> None:
        rec = {"j": j, "max_coordinate": float(peaks[j]), **extra}
        if block is not None:
            rec["block"] = block
        records.append(rec)

    if method == METHOD_PC:
        for j in range(k):
            record(j, norm_after=1.0)
        return vectors, np.ones(k), records
    if method == METHOD_SCALED:
        _, nu = scale_eigenvectors(vectors, coord_bound)
        weights = nu ** (-float(nu_exponent))
        for j in range(k):
            record(j, scale_factor=float(nu[j]), norm_after=float(1.0 / nu[j]))
        return vectors, weights, records
    if method == METHOD_CAPPED:
        capped, counts = cap_eigenvectors(vectors, coord_bound)
        norms = np.sqrt(np.sum(capped * capped, axis=0))
        for j in range(k):
            record(j, cap_count=int(counts[j]), norm_after=float(norms[j]))
        return capped, None, records
    # shrunk
    weights = _shrink_weights(eigenvalues, k)
    for j in range(k):
        record(j, shrink_weight=float(weights[j]), norm_after=1.0)
    return vectors, weights, records


def _project(
    rows: np.ndarray,
    vectors: np.ndarray,
    weights: np.ndarray | None,
    mean: np.ndarray | None,
) -> np.ndarray:
    """Assemble ``chi_hat`` rows from (possibly weighted) projections."""
    shifted = rows if mean is None else rows - mean
    proj = shifted @ vectors
    if weights is not None:
        proj = proj * weights
    chi = proj @ vectors.T
    if mean is not None:
        chi += mean
    return chi


def _resolve_bound(
    method: str, spec_bound: float | None, leading: np.ndarray
) -> float | None:
    if method not in (METHOD_SCALED, METHOD_CAPPED):
        return spec_bound
    if spec_bound is not None:
        return spec_bound
    return default_coord_bound(leading)


def _trim_spectrum(spectrum: CovSpectrum, k: int) -> CovSpectrum:
    """Restrict a precomputed spectrum to its leading ``k`` eigenpairs.

    Bit-identical to requesting ``k`` columns from :func:`cov_eigen`
    directly, since the decomposition never depends on ``k``.
    """
    if spectrum.eigenvalues.size == k:
        return spectrum
    return CovSpectrum(
        eigenvalues=spectrum.eigenvalues[:k],
        vectors=spectrum.vectors[:, :k],
        n=spectrum.n,
        n_obs=spectrum.n_obs,
        trace=spectrum.trace,
    )


def _full_sample_fit(
    x: np.ndarray, spec: EstimatorSpec, spectrum: CovSpectrum | None = None
) -> FactorFit:
    t, n = x.shape
    if spec.r_hat > min(n, t):
        raise InvalidInput(
            f"r_hat={spec.r_hat} exceeds min(n, T)={min(n, t)}"
        )
    if spectrum is None:
        spectrum = cov_eigen(x, k=spec.r_hat, center=spec.center)
    else:
        if spectrum.n != n or spectrum.n_obs != t:
            raise InvalidInput(
                "precomputed spectrum does not match the panel shape"
            )
        if spectrum.eigenvalues.size < spec.r_hat:
            raise InvalidInput(
                f"precomputed spectrum has {spectrum.eigenvalues.size} "
                f"eigenpairs, need {spec.r_hat}"
            )
        spectrum = _trim_spectrum(spectrum, spec.r_hat)
    mean = x.mean(axis=0) if spec.center else None
    bound = _resolve_bound(
        spec.method, spec.coord_bound, spectrum.vectors[:, 0]
    )
    vectors, weights, records = _modify(
        spec.method,
        spectrum.vectors,
        spectrum.eigenvalues,
        bound,
        spec.nu_exponent,
        block=None,
    )
    chi = _project(x, vectors, weights, mean)
    resolved = replace(spec, coord_bound=bound)
    return FactorFit(
        chi_hat=chi,
        eps_hat=x - chi,
        spec=resolved,
        diagnostics=tuple(records),
        spectrum=spectrum,
    )


def pc_estimate(panel, r_hat: int, center: bool = False) -> FactorFit:
    """Project each observation onto the leading ``r_hat`` eigenvectors."""
    spec = EstimatorSpec(method=METHOD_PC, r_hat=r_hat, center=center)
    _validate_spec(spec)
    return _full_sample_fit(as_panel_array(panel), spec)


def scaled_pc_estimate(
    panel,
    r_hat: int,
    coord_bound: float | None = None,
    center: bool = False,
    nu_exponent: int = 2,
) -> FactorFit:
    """Fit with eigenvectors scaled down wherever a coordinate is large."""
    spec = EstimatorSpec(
        method=METHOD_SCALED,
        r_hat=r_hat,
        coord_bound=coord_bound,
        center=center,
        nu_exponent=nu_exponent,
    )
    _validate_spec(spec)
    return _full_sample_fit(as_panel_array(panel), spec)


def capped_pc_estimate(
    panel,
    r_hat: int,
    coord_bound: float | None = None,
    center: bool = False,
) -> FactorFit:
    """Fit with eigenvector entries clipped at the coordinate bound."""
    spec = EstimatorSpec(
        method=METHOD_CAPPED, r_hat=r_hat, coord_bound=coord_bound, center=center
    )
    _validate_spec(spec)
    return _full_sample_fit(as_panel_array(panel), spec)


def shrunk_pc_estimate(panel, r_hat: int, center: bool = False) -> FactorFit:
    """Fit with each term damped by ``sqrt(mu_j / mu_1)``."""
    spec = EstimatorSpec(method=METHOD_SHRUNK, r_hat=r_hat, center=center)
    _validate_spec(spec)
    return _full_sample_fit(as_panel_array(panel), spec)


def _block_systems(
    x: np.ndarray, part: BlockPartition, r_hat: int, center: bool
) -> tuple[list[CovSpectrum], list[np.ndarray | None]]:
    spectra: list[CovSpectrum] = []
    means: list[np.ndarray | None] = []
    for kept in part.leave_out:
        spectra.append(cov_eigen(x, indices=kept, k=r_hat, center=center))
        means.append(x[kept].mean(axis=0) if center else None)
    return spectra, means


def _assemble_blockwise(
    x: np.ndarray,
    part: BlockPartition,
    spectra: list[CovSpectrum],
    means: list[np.ndarray | None],
    spec: EstimatorSpec,
    bound: float | None,
) -> tuple[np.ndarray, list[dict]]:
    chi = np.empty_like(x)
    records: list[dict] = []
    for ell, rows in enumerate(part.blocks):
        vectors, weights, recs = _modify(
            spec.method,
            spectra[ell].vectors,
            spectra[ell].eigenvalues,
            bound,
            spec.nu_exponent,
            block=ell,
        )
        chi[rows] = _project(x[rows], vectors, weights, means[ell])
        records.extend(recs)
    return chi, records


def blockwise_estimate(panel, spec: EstimatorSpec) -> FactorFit:
    """Fit each time block with eigenvectors estimated off-block.

    For every block the covariance is computed from the sample minus the
    block and its neighbors, its leading ``r_hat`` eigenpairs are modified
    per ``spec.method``, and the block's rows are projected with them.
    The data-driven coordinate bound is the maximum of the per-block
    values, so one common bound applies everywhere.
    """
    _validate_spec(spec)
    x = as_panel_array(panel)
    t, n = x.shape
    if spec.r_hat > min(n, t):
        raise InvalidInput(
            f"r_hat={spec.r_hat} exceeds min(n, T)={min(n, t)}"
        )
    part = spec.block
    if part is None:
        part = make_partition(t, block_size=default_block_size(t))
    elif part.n_obs != t:
        raise InvalidInput(
            f"partition covers {part.n_obs} observations but the panel has {t}"
        )
    spectra, means = _block_systems(x, part, spec.r_hat, spec.center)
    bound = spec.coord_bound
    if bound is None and spec.method in (METHOD_SCALED, METHOD_CAPPED):
        bound = max(
            default_coord_bound(s.vectors[:, 0]) for s in spectra
        )
    chi, records = _assemble_blockwise(x, part, spectra, means, spec, bound)
    resolved = replace(spec, blockwise=True, coord_bound=bound, block=part)
    return FactorFit(
        chi_hat=chi,
        eps_hat=x - chi,
        spec=resolved,
        diagnostics=tuple(records),
        block_spectra=tuple(spectra),
    )


def cross_validate_coord_bound(
    panel,
    r_hat: int,
    grid: np.ndarray | None = None,
    partition: BlockPartition | None = None,
    center: bool = False,
    nu_exponent: int = 2,
) -> tuple[float, np.ndarray]:
    """Pick the coordinate bound minimising the blockwise residual to ``x``.

    For each candidate ``c`` the blockwise scaled fit is computed (block
    eigensystems are reused across candidates) and scored by
    ``max_i T**-1 sum_t (chi_hat[t, i] - x[t, i])**2``; the smallest
    candidate attaining the minimum wins.

    Parameters
    ----------
    panel : PanelData or (T, n) array
    r_hat : int
    grid : array-like, optional
        Candidate bounds.  Defaults to multipliers ``0.8..1.5`` (step 0.1)
        on ``sqrt(n) * max_i |w_i1|`` from the full-sample spectrum.
    partition : BlockPartition, optional
    center : bool
    nu_exponent : int

    Returns
    -------
    (float, ndarray)
        The selected bound and the ``(len(grid), 2)`` curve of
        ``[bound, score]`` rows.
    """
    x = as_panel_array(panel)
    t, n = x.shape
    spec = EstimatorSpec(
        method=METHOD_SCALED,
        r_hat=r_hat,
        blockwise=True,
        center=center,
        nu_exponent=nu_exponent,
    )
    _validate_spec(spec)
    if spec.r_hat > min(n, t):
        raise InvalidInput(f"r_hat={r_hat} exceeds min(n, T)={min(n, t)}")
    part = partition
    if part is None:
        part = make_partition(t, block_size=default_block_size(t))
    if grid is None:
        base_spectrum = cov_eigen(x, k=1, center=center)
        base = default_coord_bound(
            base_spectrum.vectors[:, 0], multiplier=1.0
        )
        grid = np.array(CV_MULTIPLIERS) * base
    grid = np.sort(np.asarray(grid, dtype=np.float64).ravel())
    if grid.size == 0:
        raise InvalidInput("cross-validation grid must be non-empty")
    if np.any(grid <= 0.0):
        raise InvalidInput("cross-validation grid must be positive")

    spectra, means = _block_systems(x, part, r_hat, center)
    curve = np.empty((grid.size, 2))
    for idx, bound in enumerate(grid):
        chi, _ = _assemble_blockwise(
            x, part, spectra, means, spec, float(bound)
        )
        score = float(np.max(np.mean((chi - x) ** 2, axis=0)))
        curve[idx] = (bound, score)
    best = int(np.argmin(curve[:, 1]))  # ties: smallest bound (grid sorted)
    return float(curve[best, 0]), curve


def estimate(panel, spec: EstimatorSpec, spectrum: CovSpectrum | None = None) -> FactorFit:
    """Run the estimator described by ``spec`` on ``panel``.

    ``spectrum`` optionally supplies a precomputed covariance spectrum
    with at least ``spec.r_hat`` eigenpairs (and matching ``center``
    convention); full-sample fits then reuse it instead of decomposing
    again.  Blockwise fits always compute their own per-block systems.
    """
    _validate_spec(spec)
    if spec.blockwise:
        if spectrum is not None:
            raise InvalidInput(
                "a precomputed spectrum applies to full-sample fits only"
            )
        return blockwise_estimate(panel, spec)
    return _full_sample_fit(as_panel_array(panel), spec, spectrum=spectrum)


def multi_estimate(
    panel,
    methods: tuple[str, ...],
    r_hat: int,
    coord_bound: float | None = None,
    center: bool = False,
    nu_exponent: int = 2,
) -> dict[str, FactorFit]:
    """Fit several methods from one shared covariance eigendecomposition.

    Equivalent to calling the individual estimators but pays for the
    spectrum only once; used by Monte Carlo drivers.
    """
    x = as_panel_array(panel)
    t, n = x.shape
    if not methods:
        raise InvalidInput("methods must be non-empty")
    if r_hat < 1 or r_hat > min(n, t):
        raise InvalidInput(f"r_hat={r_hat} out of range [1, {min(n, t)}]")
    spectrum = cov_eigen(x, k=r_hat, center=center)
    mean = x.mean(axis=0) if center else None
    fits: dict[str, FactorFit] = {}
    for method in methods:
        spec = EstimatorSpec(
            method=method,
            r_hat=r_hat,
            coord_bound=coord_bound,
            center=center,
            nu_exponent=nu_exponent,
        )
        _validate_spec(spec)
        bound = _resolve_bound(
            method, coord_bound, spectrum.vectors[:, 0]
        )
        vectors, weights, records = _modify(
            method,
            spectrum.vectors,
            spectrum.eigenvalues,
            bound,
            nu_exponent,
            block=None,
        )
        chi = _project(x, vectors, weights, mean)
        fits[method] = FactorFit(
            chi_hat=chi,
            eps_hat=x - chi,
            spec=replace(spec, coord_bound=bound),
            diagnostics=tuple(records),
            spectrum=spectrum,
        )
    return fits


def fit_to_json(fit: FactorFit) -> dict:
    """JSON-ready diagnostics payload for a fit."""
    return {
        "schema_version": 1,
        "method": fit.spec.method,
        "r_hat": fit.spec.r_hat,
        "blockwise": fit.spec.blockwise,
        "coord_bound": fit.spec.coord_bound,
        "center": fit.spec.center,
        "nu_exponent": fit.spec.nu_exponent,
        "records": list(fit.diagnostics),
    }
