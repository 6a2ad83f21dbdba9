"""Monte Carlo experiment runner for the panel estimators.

A study runs ``replications`` independent panels for each simulation
setting, selects the number of factors per replication, fits every
requested estimator plus the oracle (plain projection with the true
``r``), and reports estimation errors *relative to the oracle*:

* ``err_avg`` -- average squared error ``n**-1 sum_it (chi_hat - chi)**2``
  divided by the Monte Carlo mean of the oracle's same quantity;
* ``err_max`` -- worst-series squared error ``max_i sum_t (...)**2``
  divided by the oracle's Monte Carlo mean.

Both denominators are computed per setting after all replications
(two-pass), so a single-replication study self-normalizes to 1.

Replications may run on several worker threads; every replication owns a
seed derived from ``(base_seed, setting index, replication index)`` and
results are aggregated in replication order, so reports are identical
for any thread count.
"""

from __future__ import annotations

import csv
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateOracle,
    FactorLabError,
    InvalidInput,
    StudyFailed,
)
from .estimators import METHOD_PC, METHOD_SCALED, EstimatorSpec, FactorFit, estimate
from .factor_number import default_r_max, gr_ahn_horenstein, ic_bai_ng
from .linalg import CovSpectrum, cov_eigen
from .simulation import Model2, SimConfig, generate, replication_seed

__all__ = [
    "BaiNgIC",
    "AhnHorensteinGR",
    "Fixed",
    "TruePlus",
    "McStudyConfig",
    "MethodResult",
    "SettingResult",
    "McReport",
    "ORACLE_LABEL",
    "relative_errors",
    "localisation_diagnostic",
    "run_study",
    "report_to_json",
    "report_to_csv",
]

ORACLE_LABEL = "oracle"


# ---------------------------------------------------------------------------
# factor-number selectors


@dataclass(frozen=True)
class BaiNgIC:
    """Select ``r_hat`` by the information criterion."""

    r_max: int | None = None

    name = "bn"

    def columns_needed(self, n: int, t: int, true_r: int) -> int:
        r_max = self.r_max if self.r_max is not None else default_r_max(n, t)
        return max(r_max + 1, true_r)

    def select(self, spectrum: CovSpectrum, true_r: int) -> int:
        return ic_bai_ng(
            spectrum.eigenvalues,
            spectrum.n,
            spectrum.n_obs,
            r_max=self.r_max,
            trace=spectrum.trace,
        ).r_hat


@dataclass(frozen=True)
class AhnHorensteinGR:
    """Select ``r_hat`` by the eigenvalue growth-ratio criterion."""

    r_max: int | None = None

    name = "ah"

    def columns_needed(self, n: int, t: int, true_r: int) -> int:
        r_max = self.r_max if self.r_max is not None else default_r_max(n, t)
        return max(r_max + 1, true_r)

    def select(self, spectrum: CovSpectrum, true_r: int) -> int:
        return gr_ahn_horenstein(
            spectrum.eigenvalues,
            spectrum.n,
            spectrum.n_obs,
            r_max=self.r_max,
            trace=spectrum.trace,
        ).r_hat


@dataclass(frozen=True)
class Fixed:
    """Always use ``k`` factors."""

    k: int

    @property
    def name(self) -> str:
        return f"fixed-{self.k}"

    def columns_needed(self, n: int, t: int, true_r: int) -> int:
        return max(self.k, true_r)

    def select(self, spectrum: CovSpectrum, true_r: int) -> int:
        return self.k


@dataclass(frozen=True)
class TruePlus:
    """Use the simulation truth plus ``m`` extra factors."""

    m: int

    @property
    def name(self) -> str:
        return f"true+{self.m}"

    def columns_needed(self, n: int, t: int, true_r: int) -> int:
        return true_r + self.m

    def select(self, spectrum: CovSpectrum, true_r: int) -> int:
        return true_r + self.m


# ---------------------------------------------------------------------------
# study configuration and report types


@dataclass(frozen=True)
class McStudyConfig:
    """Declarative description of a Monte Carlo study.

    Attributes
    ----------
    settings : tuple of SimConfig
        Simulation settings (the ``seed`` field of each is ignored;
        per-replication seeds derive from ``base_seed``).
    methods : tuple of EstimatorSpec
        Estimators to evaluate.  Their ``r_hat`` fields are ignored: the
        study substitutes the selector's choice per replication.
    r_selector : BaiNgIC | AhnHorensteinGR | Fixed | TruePlus
    replications : int
    base_seed : int
    threads : int
    """

    settings: tuple[SimConfig, ...]
    methods: tuple[EstimatorSpec, ...]
    r_selector: object
    replications: int
    base_seed: int = 0
    threads: int = 1


@dataclass(frozen=True)
class MethodResult:
    """Aggregated errors of one estimator in one setting."""

    method: str
    blockwise: bool
    err_avg: np.ndarray
    err_max: np.ndarray
    mean_avg: float
    sd_avg: float
    mean_max: float
    sd_max: float
    loc_le_r: float | None = None
    loc_gt_r: float | None = None


@dataclass(frozen=True)
class SettingResult:
    """Everything measured for one simulation setting."""

    sim: SimConfig
    replications_done: int
    failures: int
    failure_messages: tuple[str, ...]
    d_avg: float
    d_max: float
    r_hat_counts: dict[int, int]
    methods: tuple[MethodResult, ...]


@dataclass(frozen=True)
class McReport:
    """Full output of :func:`run_study`."""

    base_seed: int
    replications: int
    selector: str
    threads: int
    settings: tuple[SettingResult, ...]


# ---------------------------------------------------------------------------
# error metrics


def _raw_errors(chi_hat: np.ndarray, chi_true: np.ndarray) -> tuple[float, float]:
    sq = np.square(chi_hat - chi_true)
    per_series = sq.sum(axis=0)
    return float(per_series.sum() / chi_hat.shape[1]), float(per_series.max())


def relative_errors(
    chi_hat: np.ndarray,
    chi_true: np.ndarray,
    oracle_denominators: dict[str, float],
) -> tuple[float, float]:
    """Errors of a fit relative to the oracle's Monte Carlo means.

    Parameters
    ----------
    chi_hat, chi_true : (T, n) ndarray
    oracle_denominators : dict
        ``{"avg": D_avg, "max": D_max}`` -- Monte Carlo means of the
        oracle fit's raw average/worst-series squared errors.

    Returns
    -------
    (err_avg, err_max)
    """
    chi_hat = np.asarray(chi_hat, dtype=np.float64)
    chi_true = np.asarray(chi_true, dtype=np.float64)
    if chi_hat.shape != chi_true.shape or chi_hat.ndim != 2:
        raise InvalidInput(
            f"shape mismatch: {chi_hat.shape} vs {chi_true.shape}"
        )
    d_avg = float(oracle_denominators["avg"])
    d_max = float(oracle_denominators["max"])
    if not (d_avg > 0.0 and d_max > 0.0):
        raise DegenerateOracle(
            f"oracle denominators must be positive, got avg={d_avg}, max={d_max}"
        )
    raw_avg, raw_max = _raw_errors(chi_hat, chi_true)
    return raw_avg / d_avg, raw_max / d_max


def localisation_diagnostic(fit: FactorFit, true_r: int) -> dict[str, float]:
    """Mean scaled-eigenvector norms, split at the true factor count.

    Returns a dict with key ``"le_r"`` (mean of ``1/nu_j`` over terms
    ``2 <= j <= true_r``) and/or ``"gt_r"`` (over ``true_r < j <= r_hat``);
    a key is absent when its group is empty.  Blockwise fits pool the
    per-block records.  The leading term is excluded: the bound is
    calibrated on it, so its norm is 1 by construction.
    """
    if fit.spec.method != METHOD_SCALED:
        raise InvalidInput(
            f"localisation diagnostic requires a scaled fit, got {fit.spec.method!r}"
        )
    if true_r < 1:
        raise InvalidInput(f"true_r must be at least 1, got {true_r}")
    le_group: list[float] = []
    gt_group: list[float] = []
    for rec in fit.diagnostics:
        j = rec["j"]  # 0-based
        if 1 <= j <= true_r - 1:
            le_group.append(1.0 / rec["scale_factor"])
        elif j >= true_r:
            gt_group.append(1.0 / rec["scale_factor"])
    out: dict[str, float] = {}
    if le_group:
        out["le_r"] = float(np.mean(le_group))
    if gt_group:
        out["gt_r"] = float(np.mean(gt_group))
    return out


# ---------------------------------------------------------------------------
# study runner


def _validate_study(config: McStudyConfig) -> None:
    if not config.settings:
        raise InvalidInput("study needs at least one simulation setting")
    if config.replications < 1:
        raise InvalidInput(
            f"replications must be at least 1, got {config.replications}"
        )
    if config.threads < 1:
        raise InvalidInput(f"threads must be at least 1, got {config.threads}")
    if not hasattr(config.r_selector, "select"):
        raise InvalidInput(
            f"r_selector {config.r_selector!r} lacks a select() method"
        )
    labels = [_label(spec) for spec in config.methods]
    if len(set(labels)) != len(labels):
        raise InvalidInput(f"duplicate method labels: {labels}")
    if ORACLE_LABEL in labels:
        raise InvalidInput(f"{ORACLE_LABEL!r} is reserved for the oracle fit")


def _label(spec: EstimatorSpec) -> str:
    return spec.method + ("-block" if spec.blockwise else "")


@dataclass
class _RepOutcome:
    r_hat: int = 0
    oracle_raw: tuple[float, float] = (0.0, 0.0)
    method_raw: list[tuple[float, float]] = None
    method_loc: list[dict[str, float] | None] = None
    error: str | None = None


def _run_replication(
    config: McStudyConfig, setting_index: int, rep: int
) -> _RepOutcome:
    sim = config.settings[setting_index]
    seed = replication_seed(config.base_seed, setting_index, rep)
    try:
        panel = generate(replace(sim, seed=seed))
        n, t, true_r = sim.n_series, sim.n_obs, sim.r
        k = config.r_selector.columns_needed(n, t, true_r)
        if k > min(n, t):
            raise InvalidInput(
                f"selector needs {k} eigenpairs but min(n, T) = {min(n, t)}"
            )
        spectrum = cov_eigen(panel.x, k=k)
        r_hat = int(config.r_selector.select(spectrum, true_r))
        if not 1 <= r_hat <= min(n, t):
            raise InvalidInput(f"selected r_hat={r_hat} out of range")
        oracle = estimate(
            panel.x,
            EstimatorSpec(method=METHOD_PC, r_hat=true_r),
            spectrum=spectrum,
        )
        outcome = _RepOutcome(
            r_hat=r_hat,
            oracle_raw=_raw_errors(oracle.chi_hat, panel.chi),
            method_raw=[],
            method_loc=[],
        )
        for spec in config.methods:
            run_spec = replace(spec, r_hat=r_hat)
            fit = estimate(
                panel.x,
                run_spec,
                spectrum=None if run_spec.blockwise else spectrum,
            )
            outcome.method_raw.append(_raw_errors(fit.chi_hat, panel.chi))
            if run_spec.method == METHOD_SCALED:
                outcome.method_loc.append(localisation_diagnostic(fit, true_r))
            else:
                outcome.method_loc.append(None)
        return outcome
    except FactorLabError as exc:
        return _RepOutcome(error=f"rep {rep}: {exc}")


def _aggregate_setting(
    config: McStudyConfig, sim: SimConfig, outcomes: list[_RepOutcome]
) -> SettingResult:
    reps = config.replications
    good = [o for o in outcomes if o.error is None]
    failures = reps - len(good)
    messages = tuple(o.error for o in outcomes if o.error is not None)
    if failures > 0.1 * reps:
        raise StudyFailed(
            f"{failures}/{reps} replications failed for n={sim.n_series}, "
            f"T={sim.n_obs}: {messages[:3]}"
        )
    d_avg = float(np.mean([o.oracle_raw[0] for o in good]))
    d_max = float(np.mean([o.oracle_raw[1] for o in good]))
    if not (d_avg > 0.0 and d_max > 0.0):
        raise DegenerateOracle(
            f"oracle errors vanish for n={sim.n_series}, T={sim.n_obs}"
        )
    r_hat_counts = dict(sorted(Counter(o.r_hat for o in good).items()))

    def result(method: str, blockwise: bool, raws, locs) -> MethodResult:
        err_avg = np.array([a / d_avg for a, _ in raws])
        err_max = np.array([m / d_max for _, m in raws])
        err_avg.setflags(write=False)
        err_max.setflags(write=False)
        loc_le = [d["le_r"] for d in locs if d is not None and "le_r" in d]
        loc_gt = [d["gt_r"] for d in locs if d is not None and "gt_r" in d]
        ddof = 1 if err_avg.size > 1 else 0
        return MethodResult(
            method=method,
            blockwise=blockwise,
            err_avg=err_avg,
            err_max=err_max,
            mean_avg=float(err_avg.mean()),
            sd_avg=float(err_avg.std(ddof=ddof)),
            mean_max=float(err_max.mean()),
            sd_max=float(err_max.std(ddof=ddof)),
            loc_le_r=float(np.mean(loc_le)) if loc_le else None,
            loc_gt_r=float(np.mean(loc_gt)) if loc_gt else None,
        )

    methods = [
        result(
            ORACLE_LABEL,
            False,
            [o.oracle_raw for o in good],
            [None] * len(good),
        )
    ]
    for idx, spec in enumerate(config.methods):
        methods.append(
            result(
                _label(spec),
                spec.blockwise,
                [o.method_raw[idx] for o in good],
                [o.method_loc[idx] for o in good],
            )
        )
    return SettingResult(
        sim=sim,
        replications_done=len(good),
        failures=failures,
        failure_messages=messages,
        d_avg=d_avg,
        d_max=d_max,
        r_hat_counts=r_hat_counts,
        methods=tuple(methods),
    )


def run_study(config: McStudyConfig) -> McReport:
    """Execute the full Monte Carlo protocol described by ``config``.

    Deterministic given ``base_seed`` regardless of ``threads``.  A
    setting with more than 10% failed replications raises
    :class:`StudyFailed`.
    """
    _validate_study(config)
    jobs = [
        (si, rep)
        for si in range(len(config.settings))
        for rep in range(config.replications)
    ]
    outcomes: dict[tuple[int, int], _RepOutcome] = {}
    if config.threads == 1:
        for si, rep in jobs:
            outcomes[(si, rep)] = _run_replication(config, si, rep)
    else:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = pool.map(
                lambda job: _run_replication(config, *job), jobs
            )
            for job, outcome in zip(jobs, results):
                outcomes[job] = outcome
    settings = []
    for si, sim in enumerate(config.settings):
        ordered = [outcomes[(si, rep)] for rep in range(config.replications)]
        settings.append(_aggregate_setting(config, sim, ordered))
    return McReport(
        base_seed=config.base_seed,
        replications=config.replications,
        selector=config.r_selector.name,
        threads=config.threads,
        settings=tuple(settings),
    )


# ---------------------------------------------------------------------------
# serialization


def _setting_identity(sim: SimConfig) -> dict:
    varrho = sim.model.varrho if isinstance(sim.model, Model2) else None
    return {
        "model": sim.model.kind,
        "n": sim.n_series,
        "T": sim.n_obs,
        "phi": sim.phi,
        "varrho": varrho,
    }


def report_to_json(report: McReport) -> dict:
    """JSON-ready dictionary with the full report."""
    return {
        "schema_version": 1,
        "base_seed": report.base_seed,
        "replications": report.replications,
        "selector": report.selector,
        "threads": report.threads,
        "settings": [
            {
                **_setting_identity(s.sim),
                "replications_done": s.replications_done,
                "failures": s.failures,
                "failure_messages": list(s.failure_messages),
                "denominators": {"avg": s.d_avg, "max": s.d_max},
                "r_hat_counts": {str(k): v for k, v in s.r_hat_counts.items()},
                "methods": [
                    {
                        "method": m.method,
                        "blockwise": m.blockwise,
                        "err_avg": m.err_avg.tolist(),
                        "err_max": m.err_max.tolist(),
                        "mean_avg": m.mean_avg,
                        "sd_avg": m.sd_avg,
                        "mean_max": m.mean_max,
                        "sd_max": m.sd_max,
                        "loc_le_r": m.loc_le_r,
                        "loc_gt_r": m.loc_gt_r,
                    }
                    for m in s.methods
                ],
            }
            for s in report.settings
        ],
    }


CSV_COLUMNS = (
    "model", "n", "T", "phi", "varrho",
    "method", "blockwise", "metric", "mean", "sd", "replications",
)


def report_to_csv(report: McReport, path: str | Path) -> None:
    """Write the long-format summary table (one row per method metric)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for s in report.settings:
            ident = _setting_identity(s.sim)
            for m in s.methods:
                if m.method == ORACLE_LABEL:
                    continue  # always exactly 1 by construction; kept in JSON
                for metric, mean, sd in (
                    ("err_avg", m.mean_avg, m.sd_avg),
                    ("err_max", m.mean_max, m.sd_max),
                ):
                    writer.writerow([
                        ident["model"],
                        ident["n"],
                        ident["T"],
                        "%.17g" % ident["phi"],
                        "" if ident["varrho"] is None else "%.17g" % ident["varrho"],
                        m.method,
                        int(m.blockwise),
                        metric,
                        "%.17g" % mean,
                        "%.17g" % sd,
                        m.err_avg.size,
                    ])
