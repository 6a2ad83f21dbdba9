"""Estimators for the number of factors from a sample covariance spectrum.

Two criteria are provided, both scanning candidate counts ``q = 1..r_max``
over the descending eigenvalues of the sample covariance:

* an information criterion that penalises the log of the average residual
  eigenvalue mass (``ic_bai_ng``), minimised over ``q``;
* a growth-ratio criterion built from ratios of successive rescaled
  eigenvalues (``gr_ahn_horenstein``), maximised over ``q``.

Tail sums are formed as ``trace - leading partial sum`` so callers holding
only the leading eigenpairs can still evaluate the criteria; round-off
negatives are clamped at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateSpectrum, InvalidInput

__all__ = [
    "FactorNumberResult",
    "default_r_max",
    "ic_bai_ng",
    "gr_ahn_horenstein",
]


@dataclass(frozen=True)
class FactorNumberResult:
    """Outcome of a factor-number scan.

    Attributes
    ----------
    r_hat : int
        Selected number of factors, in ``[1, r_max]``.
    criterion_values : ndarray
        Criterion evaluated at ``q = 1..r_max`` (index 0 is ``q = 1``).
    r_max : int
        Upper bound of the scan.
    method : str
        ``"BaiNgIC"`` or ``"AhnHorensteinGR"``.
    """

    r_hat: int
    criterion_values: np.ndarray
    r_max: int
    method: str


def default_r_max(n_series: int, n_obs: int) -> int:
    """Default scan bound ``floor(sqrt(min(n, T)))``, at least 1.

    Parameters
    ----------
    n_series, n_obs : int
        Panel dimensions; both must be at least 2.
    """
    n_series, n_obs = int(n_series), int(n_obs)
    if n_series < 2 or n_obs < 2:
        raise InvalidInput(
            f"panel dimensions must be at least 2, got ({n_series}, {n_obs})"
        )
    return max(1, math.floor(math.sqrt(min(n_series, n_obs))))


def _prepare(
    eigenvalues: np.ndarray,
    n_series: int,
    n_obs: int,
    r_max: int | None,
    trace: float | None,
    n_lead: int,
) -> tuple[np.ndarray, int, float]:
    """Validate inputs and return (clamped eigenvalues, r_max, trace)."""
    ev = np.asarray(eigenvalues, dtype=np.float64).ravel()
    if ev.size == 0 or not np.all(np.isfinite(ev)):
        raise InvalidInput("eigenvalues must be a non-empty finite vector")
    if np.any(np.diff(ev) > 0):
        raise InvalidInput("eigenvalues must be sorted in descending order")
    n_series, n_obs = int(n_series), int(n_obs)
    if n_series < 2 or n_obs < 2:
        raise InvalidInput(
            f"panel dimensions must be at least 2, got ({n_series}, {n_obs})"
        )
    if r_max is None:
        r_max = default_r_max(n_series, n_obs)
    r_max = int(r_max)
    if r_max < 1:
        raise InvalidInput(f"r_max must be at least 1, got {r_max}")
    need = r_max + n_lead
    if ev.size < need:
        raise InvalidInput(
            f"need at least {need} leading eigenvalues for r_max={r_max}, "
            f"got {ev.size}"
        )
    ev = np.maximum(ev, 0.0)
    if trace is None:
        total = float(ev.sum())
    else:
        total = float(trace)
        head = float(ev[:need].sum())
        if total < head * (1.0 - 1e-10) - 1e-300:
            raise InvalidInput(
                "trace is smaller than the partial sum of the leading "
                "eigenvalues"
            )
    return ev, r_max, total


def _tail_sums(ev: np.ndarray, total: float, count: int) -> np.ndarray:
    """Residual spectrum mass after each of the first ``count`` eigenvalues."""
    tails = total - np.cumsum(ev[:count])
    return np.maximum(tails, 0.0)


def ic_bai_ng(
    eigenvalues: np.ndarray,
    n_series: int,
    n_obs: int,
    r_max: int | None = None,
    penalty: float | Callable[[int, int], float] | None = None,
    trace: float | None = None,
) -> FactorNumberResult:
    """Information-criterion estimate of the number of factors.

    Minimises ``IC(q) = log(n^-1 * sum_{j>q} mu_j) + q * g(n, T)`` over
    ``q = 1..r_max`` with penalty ``g(n, T) = (n + T) log(min(n, T)) / (nT)``
    by default.

    Parameters
    ----------
    eigenvalues : ndarray
        Descending spectrum of the sample covariance.  Pass the full
        spectrum, or the leading ``r_max + 1`` values together with
        ``trace``.
    n_series, n_obs : int
        Panel dimensions ``n`` and ``T``.
    r_max : int, optional
        Scan bound; defaults to ``default_r_max(n_series, n_obs)``.
    penalty : float or callable, optional
        Override for the penalty ``g``: either a positive constant or a
        function of ``(n_series, n_obs)``.
    trace : float, optional
        Total spectrum mass; defaults to ``eigenvalues.sum()``.

    Returns
    -------
    FactorNumberResult

    Raises
    ------
    DegenerateSpectrum
        If the residual mass after some ``q <= r_max`` is zero, which makes
        the criterion undefined (rank-deficient covariance).
    """
    ev, r_max, total = _prepare(eigenvalues, n_series, n_obs, r_max, trace, 1)
    if penalty is None:
        g = (n_series + n_obs) * math.log(min(n_series, n_obs)) / (
            n_series * n_obs
        )
    elif callable(penalty):
        g = float(penalty(n_series, n_obs))
    else:
        g = float(penalty)
    if not (g > 0 and math.isfinite(g)):
        raise InvalidInput(f"penalty must be a positive number, got {g}")

    tails = _tail_sums(ev, total, r_max)
    if np.any(tails <= 0.0):
        raise DegenerateSpectrum(
            "residual eigenvalue mass vanishes inside the scan range; "
            "the covariance is rank deficient below r_max"
        )
    q_grid = np.arange(1, r_max + 1)
    values = np.log(tails / n_series) + g * q_grid
    values.setflags(write=False)
    r_hat = int(np.argmin(values)) + 1  # first minimum => smallest q
    return FactorNumberResult(
        r_hat=r_hat, criterion_values=values, r_max=r_max, method="BaiNgIC"
    )


def gr_ahn_horenstein(
    eigenvalues: np.ndarray,
    n_series: int,
    n_obs: int,
    r_max: int | None = None,
    trace: float | None = None,
) -> FactorNumberResult:
    """Growth-ratio estimate of the number of factors.

    With rescaled eigenvalues ``mu*_q = mu_q / sum_{j>q} mu_j``, maximises
    ``GR(q) = log(1 + mu*_q) / log(1 + mu*_{q+1})`` over ``q = 1..r_max``.
    A zero eigenvalue at position ``q + 1`` makes ``GR(q) = +inf``, so the
    first such ``q`` wins unless an earlier infinity exists.

    Parameters
    ----------
    eigenvalues : ndarray
        Descending spectrum of the sample covariance.  Pass the full
        spectrum, or the leading ``r_max + 1`` values together with
        ``trace``.
    n_series, n_obs : int
        Panel dimensions ``n`` and ``T``.
    r_max : int, optional
        Scan bound; defaults to ``default_r_max(n_series, n_obs)``.
    trace : float, optional
        Total spectrum mass; defaults to ``eigenvalues.sum()``.

    Returns
    -------
    FactorNumberResult

    Raises
    ------
    DegenerateSpectrum
        If the spectrum has no mass beyond the first eigenvalue, which
        leaves every ratio undefined.
    """
    ev, r_max, total = _prepare(eigenvalues, n_series, n_obs, r_max, trace, 1)
    # rescaled eigenvalues for q = 1..r_max+1
    count = r_max + 1
    tails = _tail_sums(ev, total, count)
    if tails[0] <= 0.0:
        raise DegenerateSpectrum(
            "spectrum has no mass beyond the leading eigenvalue; "
            "growth ratios are undefined"
        )
    lead = ev[:count]
    mu_star = np.empty(count)
    positive = tails > 0.0
    np.divide(lead, tails, out=mu_star, where=positive)
    mu_star[~positive] = np.where(lead[~positive] > 0.0, np.inf, 0.0)

    log_terms = np.log1p(mu_star)
    num, den = log_terms[:-1], log_terms[1:]
    values = np.empty(r_max)
    with np.errstate(divide="ignore", invalid="ignore"):
        np.divide(num, den, out=values, where=den > 0.0)
    # a vanishing denominator means the next eigenvalue is zero: the gap is
    # maximal there, so the ratio is +inf (or neutral if already past rank)
    zero_den = den <= 0.0
    values[zero_den] = np.where(num[zero_den] > 0.0, np.inf, 1.0)
    values.setflags(write=False)
    r_hat = int(np.argmax(values)) + 1  # first maximum => smallest q
    return FactorNumberResult(
        r_hat=r_hat,
        criterion_values=values,
        r_max=r_max,
        method="AhnHorensteinGR",
    )
