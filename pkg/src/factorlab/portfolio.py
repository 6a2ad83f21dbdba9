"""Factor-based covariance estimation and minimum-variance backtesting.

Two covariance estimators share the common-component fits from
:mod:`factorlab.estimators`:

* ``efm_covariance`` -- covariance of the fitted common component plus a
  *diagonal* idiosyncratic part;
* ``poet_covariance`` -- same common part (plain projection), with the
  idiosyncratic covariance kept dense but hard-thresholded entrywise.

``rolling_backtest`` walks a returns panel with a rolling estimation
window, holds the minimum-variance portfolio over each out-of-sample
month, and reports per-window and pooled performance.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from csv import writer as csv_writer
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import as_panel_array
from .errors import (
    FactorLabError,
    InvalidInput,
    PoetInfeasible,
    SingularMatrix,
)
from .estimators import METHOD_PC, EstimatorSpec, estimate
from .evaluation import BaiNgIC
from .linalg import CovSpectrum, cov_eigen, invert_spd, sym_eigvals

__all__ = [
    "CovarianceEstimate",
    "EfmMethod",
    "PoetMethod",
    "WindowResult",
    "BacktestReport",
    "DEFAULT_WINDOW",
    "DEFAULT_STEP",
    "POET_GRID",
    "POET_PD_TOL",
    "efm_covariance",
    "poet_covariance",
    "min_variance_weights",
    "rolling_backtest",
    "backtest_to_json",
    "weights_to_csv",
]

DEFAULT_WINDOW = 253
DEFAULT_STEP = 21
POET_GRID = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
POET_PD_TOL = 1e-8
_RIDGE_SCALE = 1e-8


# ---------------------------------------------------------------------------
# covariance estimators


@dataclass(frozen=True)
class CovarianceEstimate:
    """A symmetric covariance matrix plus how it was built."""

    sigma: np.ndarray
    method: str
    detail: dict = field(default_factory=dict)
    window: int | None = None


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2.0


def _window_array(window) -> np.ndarray:
    x = as_panel_array(window)
    if x.shape[0] < 2:
        raise InvalidInput(
            f"covariance window needs at least 2 observations, got {x.shape[0]}"
        )
    return x


def _centered_components(
    fit_chi: np.ndarray, fit_eps: np.ndarray, center: bool
) -> tuple[np.ndarray, np.ndarray]:
    if not center:
        return fit_chi, fit_eps
    return (
        fit_chi - fit_chi.mean(axis=0),
        fit_eps - fit_eps.mean(axis=0),
    )


def efm_covariance(
    window,
    spec: EstimatorSpec,
    spectrum: CovSpectrum | None = None,
) -> CovarianceEstimate:
    """Common-component covariance plus a diagonal idiosyncratic part.

    ``sigma = cov(chi_hat) + diag(mean_t eps_hat**2)`` with ``chi_hat``
    fitted by ``spec``.  With ``spec.center`` both components are centered
    by their own window means; otherwise raw second moments are used.
    ``spec.r_hat == 0`` short-circuits to a purely diagonal matrix of
    sample variances (no common part).
    """
    x = _window_array(window)
    t, n = x.shape
    if spec.r_hat == 0:
        eps = x - x.mean(axis=0) if spec.center else x
        sigma = np.diag((eps * eps).mean(axis=0))
        return CovarianceEstimate(sigma, "efm", {"estimator": spec.method, "r_hat": 0})
    fit = estimate(x, spec, spectrum=spectrum)
    chi, eps = _centered_components(fit.chi_hat, fit.eps_hat, spec.center)
    sigma = _symmetrize(chi.T @ chi / t) + np.diag((eps * eps).mean(axis=0))
    label = spec.method + ("-block" if spec.blockwise else "")
    return CovarianceEstimate(
        sigma, "efm", {"estimator": label, "r_hat": spec.r_hat}
    )


def _residual_second_moments(eps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t = eps.shape[0]
    s_eps = _symmetrize(eps.T @ eps / t)
    prods = eps[:, :, None] * eps[:, None, :]
    theta = np.mean(np.square(prods - s_eps), axis=0)
    return s_eps, _symmetrize(theta)


def _threshold_residuals(
    s_eps: np.ndarray, theta: np.ndarray, constant: float, omega: float
) -> np.ndarray:
    cutoff = constant * omega * np.sqrt(theta)
    kept = np.where(np.abs(s_eps) >= cutoff, s_eps, 0.0)
    np.fill_diagonal(kept, np.diag(s_eps))
    return kept


def poet_covariance(
    window,
    r_hat: int,
    constant: float | None = None,
    center: bool = False,
    grid: tuple[float, ...] = POET_GRID,
    spectrum: CovSpectrum | None = None,
) -> CovarianceEstimate:
    """Projection-based covariance with hard-thresholded residuals.

    The off-diagonal residual entry ``s_ij`` survives iff
    ``|s_ij| >= constant * omega * sqrt(theta_ij)`` where ``theta_ij`` is
    the sample variance of ``eps_i eps_j`` and
    ``omega = 1/sqrt(n) + sqrt(log(n)/T)``; the diagonal is untouched.
    With ``constant=None`` the smallest grid value whose thresholded
    residual matrix is positive definite (min eigenvalue > 1e-8) is used;
    :class:`PoetInfeasible` is raised when none qualifies.
    """
    x = _window_array(window)
    t, n = x.shape
    spec = EstimatorSpec(method=METHOD_PC, r_hat=r_hat, center=center)
    fit = estimate(x, spec, spectrum=spectrum)
    chi, eps = _centered_components(fit.chi_hat, fit.eps_hat, center)
    common = _symmetrize(chi.T @ chi / t)
    s_eps, theta = _residual_second_moments(eps)
    omega = 1.0 / math.sqrt(n) + math.sqrt(math.log(n) / t)

    if constant is not None:
        residual = _threshold_residuals(s_eps, theta, constant, omega)
        chosen = float(constant)
    else:
        if not grid:
            raise InvalidInput("cross-validation grid must be non-empty")
        for c in sorted(grid):
            residual = _threshold_residuals(s_eps, theta, c, omega)
            if sym_eigvals(residual).min() > POET_PD_TOL:
                chosen = float(c)
                break
        else:
            raise PoetInfeasible(
                "no grid constant makes the thresholded residual matrix "
                f"positive definite (grid {tuple(sorted(grid))})"
            )
    sigma = common + residual
    return CovarianceEstimate(
        sigma,
        "poet",
        {"constant": chosen, "omega": omega, "r_hat": r_hat},
    )


# ---------------------------------------------------------------------------
# minimum-variance weights


def _coerce_sigma(sigma) -> np.ndarray:
    if isinstance(sigma, CovarianceEstimate):
        sigma = sigma.sigma
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise InvalidInput(f"covariance must be square, got shape {sigma.shape}")
    if not np.isfinite(sigma).all():
        raise InvalidInput("covariance contains non-finite entries")
    if np.abs(sigma - sigma.T).max(initial=0.0) > 1e-8:
        raise InvalidInput("covariance matrix is not symmetric")
    return _symmetrize(sigma)


def min_variance_weights(sigma, literal_display: bool = False) -> np.ndarray:
    """Unit-sum weights minimizing the portfolio variance ``w' sigma w``.

    Solves ``sigma w ~ 1`` and normalizes to sum 1.  A singular matrix
    gets one ridge retry (``+ 1e-8 * trace/n * I``) with a warning; an
    exactly zero matrix makes every unit-sum vector optimal and equal
    weights are returned, also with a warning.  ``literal_display``
    switches to the inverse-free variant ``sigma @ 1 / sum(sigma @ 1)``
    kept for comparison only.
    """
    sigma = _coerce_sigma(sigma)
    n = sigma.shape[0]
    ones = np.ones(n)
    if literal_display:
        raw = sigma @ ones
        total = raw.sum()
        if total == 0.0:
            raise SingularMatrix("row sums of the covariance add to zero")
        return raw / total
    if not sigma.any():
        warnings.warn(
            "zero covariance matrix: every unit-sum portfolio is optimal, "
            "returning equal weights",
            stacklevel=2,
        )
        return ones / n
    try:
        inverse = invert_spd(sigma).values
    except SingularMatrix:
        warnings.warn(
            "covariance not invertible, retrying with a ridge of "
            f"{_RIDGE_SCALE:g} * trace/n",
            stacklevel=2,
        )
        ridge = _RIDGE_SCALE * np.trace(sigma) / n
        inverse = invert_spd(sigma + ridge * np.eye(n)).values
    raw = inverse @ ones
    total = raw.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise SingularMatrix(
            f"1' sigma^-1 1 = {total}; weights undefined"
        )
    return raw / total


# ---------------------------------------------------------------------------
# backtest method descriptors


@dataclass(frozen=True)
class EfmMethod:
    """Backtest entry: diagonal-idiosyncratic covariance from one estimator."""

    spec: EstimatorSpec
    label: str | None = None

    @property
    def name(self) -> str:
        if self.label is not None:
            return self.label
        return self.spec.method + ("-block" if self.spec.blockwise else "")

    def covariance(
        self, window, r_hat, center, spectrum
    ) -> CovarianceEstimate:
        run_spec = replace(self.spec, r_hat=r_hat, center=center)
        return efm_covariance(
            window,
            run_spec,
            spectrum=None if run_spec.blockwise else spectrum,
        )


@dataclass(frozen=True)
class PoetMethod:
    """Backtest entry: thresholded-residual covariance."""

    constant: float | None = None
    label: str = "poet"

    @property
    def name(self) -> str:
        return self.label

    def covariance(
        self, window, r_hat, center, spectrum
    ) -> CovarianceEstimate:
        return poet_covariance(
            window,
            r_hat,
            constant=self.constant,
            center=center,
            spectrum=spectrum,
        )


# ---------------------------------------------------------------------------
# rolling backtest


@dataclass(frozen=True)
class WindowResult:
    """Weights and realized performance of one backtest window."""

    k: int
    fit_start: int
    fit_stop: int
    eval_start: int
    eval_stop: int
    weights: np.ndarray
    returns: np.ndarray
    tau: float
    mu: float
    sigma2: float
    degenerate: bool


@dataclass(frozen=True)
class BacktestReport:
    """Per-window and pooled performance of one method."""

    method: str
    t_window: int
    step: int
    m: int
    windows: tuple[WindowResult, ...]
    tau: float
    sigma2: float
    sr: float
    sr_windows_used: int
    warnings: tuple[str, ...]


def _window_bounds(t: int, t_window: int, step: int, k: int) -> tuple[int, int, int, int]:
    fit_start = step * (k - 1)
    fit_stop = fit_start + t_window
    eval_start = fit_stop
    eval_stop = min(eval_start + step, t)
    return fit_start, fit_stop, eval_start, eval_stop


def _evaluate_window(returns: np.ndarray) -> tuple[float, float, float]:
    tau = float(returns.sum())
    mu = float(returns.mean())
    sigma2 = float(np.mean(np.square(returns - mu)))
    return tau, mu, sigma2


def rolling_backtest(
    panel,
    methods: tuple[EfmMethod | PoetMethod, ...],
    t_window: int = DEFAULT_WINDOW,
    step: int = DEFAULT_STEP,
    r_selector=None,
    center: bool = True,
    threads: int = 1,
) -> dict[str, BacktestReport]:
    """Rolling-window minimum-variance backtest for several methods.

    Window ``k`` (1-based, ``k = 1..M`` with ``M = ceil((T - T_window)/step)``)
    fits covariances on rows ``[step*(k-1), step*(k-1) + T_window)`` and
    holds the weights over the following ``step`` rows (the final window
    may be shorter).  The factor count is re-selected per window by
    ``r_selector`` (default information criterion).  Pooled metrics: total
    return ``tau``, variance around per-window means, and the mean
    per-window return/volatility ratio (degenerate zero-volatility windows
    are skipped and flagged; if all are degenerate ``sr`` is ``inf``).

    Returns a dict keyed by method name.  A method failing on any window
    is dropped from the dict with a warning; an infeasible thresholded
    covariance falls back to the diagonal-idiosyncratic one for that
    window and is noted in the report.
    """
    x = as_panel_array(panel)
    t, n = x.shape
    if t_window < 2:
        raise InvalidInput(f"t_window must be at least 2, got {t_window}")
    if step < 1:
        raise InvalidInput(f"step must be at least 1, got {step}")
    if t <= t_window + step:
        raise InvalidInput(
            f"panel has T={t} rows; need more than t_window + step = "
            f"{t_window + step}"
        )
    if threads < 1:
        raise InvalidInput(f"threads must be at least 1, got {threads}")
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise InvalidInput(f"duplicate method names: {names}")
    selector = r_selector if r_selector is not None else BaiNgIC()
    m_windows = math.ceil((t - t_window) / step)

    def run_window(k: int):
        fit_start, fit_stop, eval_start, eval_stop = _window_bounds(
            t, t_window, step, k
        )
        window = x[fit_start:fit_stop]
        k_cols = min(selector.columns_needed(n, t_window, 1), min(n, t_window))
        spectrum = cov_eigen(window, k=k_cols, center=center)
        r_hat = int(selector.select(spectrum, 1))
        out: dict[str, tuple[WindowResult | None, list[str], str | None]] = {}
        for method in methods:
            notes: list[str] = []
            try:
                try:
                    sigma = method.covariance(window, r_hat, center, spectrum)
                except PoetInfeasible as exc:
                    fallback = EstimatorSpec(
                        method=METHOD_PC, r_hat=r_hat, center=center
                    )
                    sigma = efm_covariance(window, fallback, spectrum=spectrum)
                    notes.append(
                        f"window {k}: {exc}; used diagonal-residual covariance"
                    )
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always")
                    weights = min_variance_weights(sigma)
                notes.extend(f"window {k}: {w.message}" for w in caught)
                returns = x[eval_start:eval_stop] @ weights
                tau, mu, sigma2 = _evaluate_window(returns)
                result = WindowResult(
                    k=k,
                    fit_start=fit_start,
                    fit_stop=fit_stop,
                    eval_start=eval_start,
                    eval_stop=eval_stop,
                    weights=weights,
                    returns=returns,
                    tau=tau,
                    mu=mu,
                    sigma2=sigma2,
                    degenerate=sigma2 == 0.0,
                )
                out[method.name] = (result, notes, None)
            except FactorLabError as exc:
                out[method.name] = (None, notes, f"window {k}: {exc}")
        return out

    if threads == 1:
        per_window = [run_window(k) for k in range(1, m_windows + 1)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_window = list(pool.map(run_window, range(1, m_windows + 1)))

    reports: dict[str, BacktestReport] = {}
    for method in methods:
        name = method.name
        failures = [res[name][2] for res in per_window if res[name][2]]
        if failures:
            warnings.warn(
                f"method {name!r} excluded from the backtest: {failures[0]}",
                stacklevel=2,
            )
            continue
        results = [res[name][0] for res in per_window]
        notes = tuple(
            msg for res in per_window for msg in res[name][1]
        )
        tau = float(sum(w.tau for w in results))
        pooled = sum(
            float(np.square(w.returns - w.mu).sum()) for w in results
        )
        sigma2 = pooled / (t - t_window)
        usable = [w for w in results if not w.degenerate]
        if usable:
            sr = float(
                np.mean([w.tau / math.sqrt(w.sigma2) for w in usable])
            )
        else:
            sr = math.inf
        reports[name] = BacktestReport(
            method=name,
            t_window=t_window,
            step=step,
            m=m_windows,
            windows=tuple(results),
            tau=tau,
            sigma2=sigma2,
            sr=sr,
            sr_windows_used=len(usable),
            warnings=notes,
        )
    return reports


# ---------------------------------------------------------------------------
# serialization


def backtest_to_json(reports: dict[str, BacktestReport]) -> dict:
    """JSON-ready dictionary; an infinite ratio serializes as null."""
    methods = {}
    for name, report in reports.items():
        methods[name] = {
            "tau": report.tau,
            "sigma2": report.sigma2,
            "sr": None if math.isinf(report.sr) else report.sr,
            "sr_windows_used": report.sr_windows_used,
            "m": report.m,
            "warnings": list(report.warnings),
            "per_window": [
                {
                    "k": w.k,
                    "tau": w.tau,
                    "mu": w.mu,
                    "sigma2": w.sigma2,
                    "degenerate": w.degenerate,
                }
                for w in report.windows
            ],
        }
    any_report = next(iter(reports.values()), None)
    return {
        "schema_version": 1,
        "t_window": any_report.t_window if any_report else None,
        "step": any_report.step if any_report else None,
        "methods": methods,
    }


def weights_to_csv(
    reports: dict[str, BacktestReport],
    path: str | Path,
    asset_names: tuple[str, ...] | None = None,
) -> None:
    """Long-format weight table: one row per (method, window, asset)."""
    with open(path, "w", newline="") as handle:
        out = csv_writer(handle)
        out.writerow(["method", "window", "asset", "weight"])
        for name, report in reports.items():
            for w in report.windows:
                for i, weight in enumerate(w.weights):
                    asset = asset_names[i] if asset_names else str(i)
                    out.writerow([name, w.k, asset, "%.17g" % weight])
