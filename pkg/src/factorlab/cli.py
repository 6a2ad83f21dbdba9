"""Command-line interface: simulate, factor-number, estimate, mc-study, backtest.

Configuration precedence per option: command-line flag, then config-file
key (``--config file.json``), then built-in default.  The resolved
configuration is echoed under ``"config"`` in every JSON output.  Exit
codes: 0 success, 1 configuration/validation error, 2 I/O error, 3 failed
Monte Carlo study.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .errors import (
    DataFormatError,
    FactorLabError,
    InvalidInput,
    StudyFailed,
)
from .estimators import METHODS, EstimatorSpec, estimate, fit_to_json, multi_estimate
from .evaluation import (
    AhnHorensteinGR,
    BaiNgIC,
    Fixed,
    McStudyConfig,
    TruePlus,
    report_to_csv,
    report_to_json,
    run_study,
)
from .factor_number import default_r_max, gr_ahn_horenstein, ic_bai_ng
from .io import read_matrix_csv, read_returns_csv, write_matrix_csv
from .linalg import cov_eigen
from .portfolio import (
    EfmMethod,
    PoetMethod,
    backtest_to_json,
    rolling_backtest,
    weights_to_csv,
)
from .simulation import Model1, Model2, SimConfig, generate

__all__ = ["main", "entry", "EXIT_OK", "EXIT_CONFIG", "EXIT_IO", "EXIT_STUDY"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_STUDY = 3

SEED_ENV_VAR = "FACTORLAB_SEED"

_EFM_ALIASES = {
    "efm-pc": ("pc", False),
    "efm-sc": ("scaled", False),
    "efm-scaled": ("scaled", False),
    "efm-cp": ("capped", False),
    "efm-capped": ("capped", False),
    "efm-sh": ("shrunk", False),
    "efm-shrunk": ("shrunk", False),
    "efm-bpc": ("pc", True),
    "efm-bsc": ("scaled", True),
    "efm-bcp": ("capped", True),
    "efm-bsh": ("shrunk", True),
}

_PRESETS = {
    "table-c1-cell": {
        "model": "model1",
        "n": "200",
        "T": "500",
        "phi": "1",
        "methods": "pc,scaled,capped,shrunk",
        "selector": "bn",
        "reps": 200,
    },
}

_DEFAULTS: dict[str, dict] = {
    "simulate": {
        "model": "model1",
        "n": 100,
        "T": 200,
        "r": 5,
        "phi": 1.0,
        "varrho": 0.2,
        "seed": None,
        "header": False,
        "panel_out": "panel.csv",
        "truth_out": "truth.json",
    },
    "factor-number": {
        "input": None,
        "header": False,
        "r_max": None,
        "criterion": "both",
        "out": "factor-number.json",
    },
    "estimate": {
        "input": None,
        "header": False,
        "method": "all",
        "r": "auto-bn",
        "coord_bound": None,
        "center": False,
        "blockwise": False,
        "out_prefix": "estimate",
    },
    "mc-study": {
        "preset": None,
        "model": "model1",
        "n": "100",
        "T": "200",
        "phi": "1",
        "varrho": "0.2",
        "methods": "pc,scaled,capped,shrunk",
        "selector": "bn",
        "reps": 5,
        "base_seed": None,
        "threads": 1,
        "out_prefix": "mc-study",
    },
    "backtest": {
        "input": None,
        "prices": False,
        "drop_incomplete_series": False,
        "methods": "efm-pc",
        "r": "auto-bn",
        "window": 253,
        "step": 21,
        "poet_constant": None,
        "threads": 1,
        "out_prefix": "backtest",
    },
}


class _Parser(argparse.ArgumentParser):
    """Argument parser that raises instead of calling ``sys.exit``."""

    def error(self, message):
        raise InvalidInput(message)


def _flag(sub, *names, **kwargs):
    kwargs.setdefault("default", None)
    sub.add_argument(*names, **kwargs)


def _bool_flag(sub, *names):
    sub.add_argument(*names, action="store_const", const=True, default=None)


def _build_parser() -> _Parser:
    parser = _Parser(prog="factorlab", description=__doc__)
    subs = parser.add_subparsers(
        dest="command", required=True, parser_class=_Parser
    )

    sim = subs.add_parser("simulate", description="Generate a synthetic panel.")
    _flag(sim, "--config")
    _flag(sim, "--model", choices=("model1", "model2"))
    _flag(sim, "--n", type=int)
    _flag(sim, "--T", dest="T", type=int)
    _flag(sim, "--r", type=int)
    _flag(sim, "--phi", type=float)
    _flag(sim, "--varrho", type=float)
    _flag(sim, "--seed", type=int)
    _bool_flag(sim, "--header")
    _flag(sim, "--panel-out")
    _flag(sim, "--truth-out")

    fn = subs.add_parser("factor-number", description="Select the factor count.")
    _flag(fn, "--config")
    _flag(fn, "--input")
    _bool_flag(fn, "--header")
    _flag(fn, "--r-max", type=int)
    _flag(fn, "--criterion", choices=("bn", "ah", "both"))
    _flag(fn, "--out")

    est = subs.add_parser("estimate", description="Fit common components.")
    _flag(est, "--config")
    _flag(est, "--input")
    _bool_flag(est, "--header")
    _flag(est, "--method")
    _flag(est, "--r")
    _flag(est, "--coord-bound", type=float)
    _bool_flag(est, "--center")
    _bool_flag(est, "--blockwise")
    _flag(est, "--out-prefix")

    mc = subs.add_parser("mc-study", description="Run a Monte Carlo study.")
    _flag(mc, "--config")
    _flag(mc, "--preset", choices=tuple(_PRESETS))
    _flag(mc, "--model", choices=("model1", "model2"))
    _flag(mc, "--n")
    _flag(mc, "--T", dest="T")
    _flag(mc, "--phi")
    _flag(mc, "--varrho")
    _flag(mc, "--methods")
    _flag(mc, "--selector")
    _flag(mc, "--reps", type=int)
    _flag(mc, "--base-seed", type=int)
    _flag(mc, "--threads", type=int)
    _flag(mc, "--out-prefix")

    bt = subs.add_parser("backtest", description="Rolling minimum-variance backtest.")
    _flag(bt, "--config")
    _flag(bt, "--input")
    _bool_flag(bt, "--prices")
    _bool_flag(bt, "--drop-incomplete-series")
    _flag(bt, "--methods")
    _flag(bt, "--r")
    _flag(bt, "--window", type=int)
    _flag(bt, "--step", type=int)
    _flag(bt, "--poet-constant", type=float)
    _flag(bt, "--threads", type=int)
    _flag(bt, "--out-prefix")

    return parser


def _resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, preset, config file, and explicit flags."""
    effective = dict(_DEFAULTS[command])
    cli = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "config") and value is not None
    }
    file_cfg: dict = {}
    if args.config is not None:
        with open(args.config) as handle:
            try:
                file_cfg = json.load(handle)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{args.config}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise InvalidInput(f"{args.config}: config must be a JSON object")
    unknown = set(file_cfg) - set(effective)
    if unknown:
        raise InvalidInput(
            f"unknown config keys: {', '.join(sorted(unknown))}"
        )
    preset_name = cli.get("preset") or file_cfg.get("preset")
    if preset_name is not None:
        if preset_name not in _PRESETS:
            raise InvalidInput(f"unknown preset {preset_name!r}")
        effective.update(_PRESETS[preset_name])
        effective["preset"] = preset_name
    effective.update(file_cfg)
    effective.update(cli)
    return effective


def _resolve_seed(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise InvalidInput(
                f"{SEED_ENV_VAR}={env!r} is not an integer"
            ) from None
    return 0


def _require_input(cfg: dict) -> str:
    if not cfg.get("input"):
        raise InvalidInput("an input CSV is required (--input)")
    return cfg["input"]


def _parse_list(text, convert, what: str) -> list:
    try:
        return [convert(tok.strip()) for tok in str(text).split(",") if tok.strip()]
    except ValueError:
        raise InvalidInput(f"cannot parse {what} list from {text!r}") from None


def _parse_selector(token: str):
    if token == "bn":
        return BaiNgIC()
    if token == "ah":
        return AhnHorensteinGR()
    if token.startswith("fixed-"):
        return Fixed(int(token.split("-", 1)[1]))
    if token.startswith("true+"):
        return TruePlus(int(token.split("+", 1)[1]))
    raise InvalidInput(
        f"unknown selector {token!r} (use bn, ah, fixed-K, or true+M)"
    )


def _echo(cfg: dict) -> dict:
    return {key: cfg[key] for key in sorted(cfg)}


def _write_json(path: str | Path, payload: dict) -> None:
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def _series_names(n: int) -> tuple[str, ...]:
    return tuple(f"series_{i}" for i in range(n))


# ---------------------------------------------------------------------------
# subcommand handlers


def _make_model(cfg: dict):
    if cfg["model"] == "model2":
        return Model2(varrho=float(cfg["varrho"]))
    return Model1()


def cmd_simulate(cfg: dict) -> None:
    cfg["seed"] = _resolve_seed(cfg.get("seed"))
    sim = SimConfig(
        n_series=int(cfg["n"]),
        n_obs=int(cfg["T"]),
        r=int(cfg["r"]),
        phi=float(cfg["phi"]),
        model=_make_model(cfg),
        seed=cfg["seed"],
    )
    panel = generate(sim)
    header = _series_names(sim.n_series) if cfg["header"] else None
    write_matrix_csv(cfg["panel_out"], panel.x, header=header)
    payload = {
        "schema_version": 1,
        "config": _echo(cfg),
        "model": sim.model.kind,
        "truth": {
            key: np.asarray(value).tolist() for key, value in panel.truth.items()
        },
        "loadings": panel.loadings.tolist(),
        "factors": panel.factors.tolist(),
        "chi": panel.chi.tolist(),
    }
    _write_json(cfg["truth_out"], payload)
    print(
        f"simulate: model={sim.model.kind} n={sim.n_series} T={sim.n_obs} "
        f"seed={sim.seed} -> {cfg['panel_out']}, {cfg['truth_out']}"
    )


def cmd_factor_number(cfg: dict) -> None:
    x, _ = read_matrix_csv(_require_input(cfg), header=bool(cfg["header"]))
    t, n = x.shape
    r_max = cfg["r_max"] if cfg["r_max"] is not None else default_r_max(n, t)
    k = min(int(r_max) + 1, min(n, t))
    spectrum = cov_eigen(x, k=k)
    runners = {"bn": ic_bai_ng, "ah": gr_ahn_horenstein}
    wanted = ("bn", "ah") if cfg["criterion"] == "both" else (cfg["criterion"],)
    results = {}
    for name in wanted:
        res = runners[name](
            spectrum.eigenvalues, n, t, r_max=int(r_max), trace=spectrum.trace
        )
        results[name] = {
            "r_hat": res.r_hat,
            "r_max": res.r_max,
            "criterion_values": res.criterion_values.tolist(),
        }
    payload = {
        "schema_version": 1,
        "config": _echo(cfg),
        "n": n,
        "T": t,
        "results": results,
    }
    _write_json(cfg["out"], payload)
    summary = " ".join(f"{name}:r_hat={res['r_hat']}" for name, res in results.items())
    print(f"factor-number: n={n} T={t} {summary} -> {cfg['out']}")


def _select_r(cfg: dict, x: np.ndarray) -> tuple[int, dict | None]:
    token = str(cfg["r"])
    t, n = x.shape
    if token in ("auto-bn", "auto-ah"):
        r_max = default_r_max(n, t)
        spectrum = cov_eigen(x, k=min(r_max + 1, min(n, t)))
        runner = ic_bai_ng if token == "auto-bn" else gr_ahn_horenstein
        res = runner(spectrum.eigenvalues, n, t, trace=spectrum.trace)
        selection = {
            "criterion": token.split("-", 1)[1],
            "r_max": res.r_max,
            "criterion_values": res.criterion_values.tolist(),
        }
        return res.r_hat, selection
    try:
        return int(token), None
    except ValueError:
        raise InvalidInput(
            f"--r must be an integer, auto-bn, or auto-ah, got {token!r}"
        ) from None


def cmd_estimate(cfg: dict) -> None:
    x, _ = read_matrix_csv(_require_input(cfg), header=bool(cfg["header"]))
    r_hat, selection = _select_r(cfg, x)
    methods = METHODS if cfg["method"] == "all" else tuple(
        _parse_list(cfg["method"], str, "method")
    )
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise InvalidInput(f"unknown methods: {', '.join(bad)}")
    bound = cfg["coord_bound"]
    center = bool(cfg["center"])
    if cfg["blockwise"]:
        fits = {
            m: estimate(
                x,
                EstimatorSpec(
                    method=m,
                    r_hat=r_hat,
                    blockwise=True,
                    coord_bound=bound,
                    center=center,
                ),
            )
            for m in methods
        }
    else:
        fits = multi_estimate(x, methods, r_hat, coord_bound=bound, center=center)
    prefix = cfg["out_prefix"]
    for m, fit in fits.items():
        write_matrix_csv(f"{prefix}-chi-{m}.csv", fit.chi_hat)
        write_matrix_csv(f"{prefix}-eps-{m}.csv", fit.eps_hat)
    scaled_fit = fits.get("scaled") or fits.get("capped")
    nu = None
    if "scaled" in fits:
        nu = [rec["scale_factor"] for rec in fits["scaled"].diagnostics]
    payload = {
        "schema_version": 1,
        "config": _echo(cfg),
        "r_hat": r_hat,
        "selection": selection,
        "c_w": scaled_fit.spec.coord_bound if scaled_fit is not None else None,
        "nu": nu,
        "methods": {m: fit_to_json(fit) for m, fit in fits.items()},
    }
    _write_json(f"{prefix}-diagnostics.json", payload)
    print(
        f"estimate: r_hat={r_hat} methods={','.join(fits)} -> "
        f"{prefix}-chi-*.csv, {prefix}-diagnostics.json"
    )


def _study_settings(cfg: dict) -> tuple[SimConfig, ...]:
    ns = _parse_list(cfg["n"], int, "n")
    ts = _parse_list(cfg["T"], int, "T")
    phis = _parse_list(cfg["phi"], float, "phi")
    if cfg["model"] == "model2":
        varrhos = _parse_list(cfg["varrho"], float, "varrho")
        models = [Model2(varrho=v) for v in varrhos]
    else:
        models = [Model1()]
    settings = [
        SimConfig(n_series=n, n_obs=t, phi=phi, model=model, seed=0)
        for model in models
        for n in ns
        for t in ts
        for phi in phis
    ]
    if not settings:
        raise InvalidInput("the study grid is empty")
    return tuple(settings)


def _study_methods(cfg: dict) -> tuple[EstimatorSpec, ...]:
    specs = []
    for token in _parse_list(cfg["methods"], str, "methods"):
        blockwise = token.endswith("-block")
        name = token[: -len("-block")] if blockwise else token
        if name not in METHODS:
            raise InvalidInput(f"unknown study method {token!r}")
        specs.append(EstimatorSpec(method=name, r_hat=1, blockwise=blockwise))
    return tuple(specs)


def cmd_mc_study(cfg: dict) -> None:
    cfg["base_seed"] = _resolve_seed(cfg.get("base_seed"))
    study = McStudyConfig(
        settings=_study_settings(cfg),
        methods=_study_methods(cfg),
        r_selector=_parse_selector(cfg["selector"]),
        replications=int(cfg["reps"]),
        base_seed=cfg["base_seed"],
        threads=int(cfg["threads"]),
    )
    print(
        f"mc-study: {len(study.settings)} settings x {len(study.methods)} methods "
        f"x {study.replications} replications",
        file=sys.stderr,
    )
    report = run_study(study)
    prefix = cfg["out_prefix"]
    report_to_csv(report, f"{prefix}.csv")
    payload = {"config": _echo(cfg), **report_to_json(report)}
    _write_json(f"{prefix}.json", payload)
    print("mc-study: done", file=sys.stderr)
    print(f"mc-study: wrote {prefix}.csv and {prefix}.json")


def _backtest_methods(cfg: dict) -> tuple:
    methods = []
    for token in _parse_list(cfg["methods"], str, "methods"):
        if token == "poet":
            methods.append(PoetMethod(constant=cfg["poet_constant"]))
        elif token in _EFM_ALIASES:
            name, blockwise = _EFM_ALIASES[token]
            spec = EstimatorSpec(method=name, r_hat=1, blockwise=blockwise)
            methods.append(EfmMethod(spec, label=token))
        else:
            raise InvalidInput(
                f"unknown backtest method {token!r} "
                f"(use poet or one of {', '.join(sorted(_EFM_ALIASES))})"
            )
    return tuple(methods)


def _backtest_selector(cfg: dict):
    token = str(cfg["r"])
    if token == "auto-bn":
        return BaiNgIC()
    if token == "auto-ah":
        return AhnHorensteinGR()
    try:
        return Fixed(int(token))
    except ValueError:
        raise InvalidInput(
            f"--r must be an integer, auto-bn, or auto-ah, got {token!r}"
        ) from None


def cmd_backtest(cfg: dict) -> None:
    x, tickers, _ = read_returns_csv(
        _require_input(cfg),
        prices=bool(cfg["prices"]),
        drop_incomplete_series=bool(cfg["drop_incomplete_series"]),
    )
    reports = rolling_backtest(
        x,
        _backtest_methods(cfg),
        t_window=int(cfg["window"]),
        step=int(cfg["step"]),
        r_selector=_backtest_selector(cfg),
        center=True,
        threads=int(cfg["threads"]),
    )
    prefix = cfg["out_prefix"]
    payload = {"config": _echo(cfg), **backtest_to_json(reports)}
    _write_json(f"{prefix}-report.json", payload)
    weights_to_csv(reports, f"{prefix}-weights.csv", asset_names=tickers)
    print(
        f"backtest: {x.shape[1]} assets, T={x.shape[0]}, "
        f"methods={','.join(reports)} -> {prefix}-report.json, "
        f"{prefix}-weights.csv"
    )


_HANDLERS = {
    "simulate": cmd_simulate,
    "factor-number": cmd_factor_number,
    "estimate": cmd_estimate,
    "mc-study": cmd_mc_study,
    "backtest": cmd_backtest,
}


def main(argv=None) -> int:
    """Entry point; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _resolve_config(args.command, args)
        _HANDLERS[args.command](cfg)
        return EXIT_OK
    except StudyFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STUDY
    except (DataFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FactorLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry() -> None:
    """Console-script entry point."""
    sys.exit(main())


if __name__ == "__main__":
    entry()
