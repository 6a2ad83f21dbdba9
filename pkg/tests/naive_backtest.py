"""Brute-force rolling minimum-variance backtest, written from scratch.

Used as an independent oracle for the package's ``rolling_backtest``:
explicit loops everywhere, ``numpy.linalg.eigh``/``solve`` for the dense
linear algebra, and no imports from the package under test.
"""
from __future__ import annotations

import math

import numpy as np

GRID = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)


def _column_means(rows: np.ndarray) -> np.ndarray:
    t, n = rows.shape
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for s in range(t):
            acc += rows[s, i]
        out[i] = acc / t
    return out


def _second_moment(rows: np.ndarray) -> np.ndarray:
    t, n = rows.shape
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for s in range(t):
                acc += rows[s, i] * rows[s, j]
            out[i, j] = acc / t
    return out


def _eigh_descending(sym: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(sym)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def _select_r(values: np.ndarray, trace: float, n: int, t: int) -> int:
    """Information-criterion count: argmin of log(tail/n) + q * penalty."""
    r_max = max(1, math.floor(math.sqrt(min(n, t))))
    penalty = (n + t) * math.log(min(n, t)) / (n * t)
    best_q, best_val = 1, math.inf
    partial = 0.0
    for q in range(1, r_max + 1):
        partial += values[q - 1]
        tail = max(trace - partial, 0.0)
        val = math.log(tail / n) + q * penalty
        if val < best_val:
            best_q, best_val = q, val
    return best_q


def _common_part(
    centered: np.ndarray,
    vecs: np.ndarray,
    vals: np.ndarray,
    r_hat: int,
    method: str,
) -> np.ndarray:
    """Fitted common component of the centered window, by explicit sums."""
    t, n = centered.shape
    w = vecs[:, :r_hat]
    peaks = [max(abs(w[i, j]) for i in range(n)) for j in range(r_hat)]
    bound = 1.1 * math.sqrt(n) * peaks[0]

    if method == "capped":
        limit = bound / math.sqrt(n)
        w = np.clip(w, -limit, limit)
        term = [1.0] * r_hat
    elif method == "scaled":
        term = [
            1.0 / max(1.0, math.sqrt(n) * peaks[j] / bound) ** 2
            for j in range(r_hat)
        ]
    elif method == "shrunk":
        term = [math.sqrt(max(vals[j], 0.0) / vals[0]) for j in range(r_hat)]
    elif method == "pc":
        term = [1.0] * r_hat
    else:
        raise ValueError(method)

    chi = np.zeros((t, n))
    for s in range(t):
        for j in range(r_hat):
            proj = 0.0
            for i in range(n):
                proj += w[i, j] * centered[s, i]
            proj *= term[j]
            for i in range(n):
                chi[s, i] += proj * w[i, j]
    return chi


def _efm_sigma(window: np.ndarray, r_hat: int, method: str) -> np.ndarray:
    mean = _column_means(window)
    centered = window - mean
    vals, vecs = _eigh_descending(_second_moment(centered))
    chi = _common_part(centered, vecs, vals, r_hat, method)
    eps = centered - chi
    chi_c = chi - _column_means(chi)
    eps_c = eps - _column_means(eps)
    raw = _second_moment(chi_c)
    sigma = (raw + raw.T) / 2.0
    for i in range(window.shape[1]):
        acc = 0.0
        for s in range(window.shape[0]):
            acc += eps_c[s, i] ** 2
        sigma[i, i] += acc / window.shape[0]
    return sigma


def _poet_sigma(window: np.ndarray, r_hat: int, constant: float | None) -> np.ndarray:
    t, n = window.shape
    mean = _column_means(window)
    centered = window - mean
    vals, vecs = _eigh_descending(_second_moment(centered))
    chi = _common_part(centered, vecs, vals, r_hat, "pc")
    eps = centered - chi
    chi_c = chi - _column_means(chi)
    eps_c = eps - _column_means(eps)
    raw = _second_moment(chi_c)
    common = (raw + raw.T) / 2.0

    s_raw = _second_moment(eps_c)
    s_eps = (s_raw + s_raw.T) / 2.0
    theta = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for s in range(t):
                acc += (eps_c[s, i] * eps_c[s, j] - s_eps[i, j]) ** 2
            theta[i, j] = acc / t
    theta = (theta + theta.T) / 2.0
    omega = 1.0 / math.sqrt(n) + math.sqrt(math.log(n) / t)

    def truncate(c: float) -> np.ndarray:
        kept = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if i == j or abs(s_eps[i, j]) >= c * omega * math.sqrt(theta[i, j]):
                    kept[i, j] = s_eps[i, j]
        return kept

    if constant is not None:
        return common + truncate(constant)
    for c in sorted(GRID):
        residual = truncate(c)
        if np.linalg.eigvalsh(residual).min() > 1e-8:
            return common + residual
    raise ValueError("no grid constant yields a positive definite residual")


def _weights(sigma: np.ndarray) -> np.ndarray:
    ones = np.ones(sigma.shape[0])
    raw = np.linalg.solve(sigma, ones)
    return raw / raw.sum()


def naive_backtest(
    panel: np.ndarray,
    methods: tuple[str, ...],
    t_window: int = 253,
    step: int = 21,
    poet_constant: float | None = None,
) -> dict[str, dict]:
    """Full rolling backtest with per-window factor-count re-selection.

    ``methods`` may contain ``pc``/``scaled``/``capped``/``shrunk`` (factor
    covariance with diagonal residuals) and ``poet`` (dense thresholded
    residuals).  Returns per-method pooled statistics and per-window rows.
    """
    x = np.asarray(panel, dtype=float)
    t, n = x.shape
    m = math.ceil((t - t_window) / step)
    out: dict[str, dict] = {
        name: {"per_window": [], "tau": 0.0} for name in methods
    }
    pooled_ss = {name: 0.0 for name in methods}

    for k in range(1, m + 1):
        fit_start = step * (k - 1)
        fit_stop = fit_start + t_window
        eval_stop = min(fit_stop + step, t)
        window = x[fit_start:fit_stop]
        centered = window - _column_means(window)
        second = _second_moment(centered)
        vals, _ = _eigh_descending(second)
        trace = sum(second[i, i] for i in range(n))
        r_hat = _select_r(vals, trace, n, t_window)

        for name in methods:
            if name == "poet":
                sigma = _poet_sigma(window, r_hat, poet_constant)
            else:
                sigma = _efm_sigma(window, r_hat, name)
            weights = _weights(sigma)
            rets = []
            for s in range(fit_stop, eval_stop):
                acc = 0.0
                for i in range(n):
                    acc += x[s, i] * weights[i]
                rets.append(acc)
            tau = sum(rets)
            mu = tau / len(rets)
            ss = sum((ret - mu) ** 2 for ret in rets)
            sigma2 = ss / len(rets)
            out[name]["per_window"].append(
                {"k": k, "r_hat": r_hat, "tau": tau, "sigma2": sigma2,
                 "weights": weights}
            )
            out[name]["tau"] += tau
            pooled_ss[name] += ss

    for name in methods:
        rows = out[name]["per_window"]
        out[name]["m"] = m
        out[name]["sigma2"] = pooled_ss[name] / (t - t_window)
        usable = [row for row in rows if row["sigma2"] > 0.0]
        if usable:
            out[name]["sr"] = sum(
                row["tau"] / math.sqrt(row["sigma2"]) for row in usable
            ) / len(usable)
        else:
            out[name]["sr"] = math.inf
        out[name]["sr_windows_used"] = len(usable)
    return out
