"""Command-line interface.

Five subcommands: ``simulate``, ``estimate``, ``tune``, ``mc``,
``empirical``.  Results go to stdout as JSON (and to files under
``--out``); all logging goes to stderr.  Exit codes: 0 success, 2
configuration or usage problem, 3 unreadable or unusable input data,
4 degenerate result (for example a vol-of-vol estimate of zero where a
ratio needs it).

Commands that take a JSON config accept ``--config file.json`` plus any
number of ``--set dotted.key=value`` overrides; unknown keys are
rejected rather than silently ignored.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys

import numpy as np
import pandas as pd

from . import harness, market_data, tuning
from .errors import (
    ConfigError,
    DataError,
    DegenerateValueError,
    FourierLevError,
    InvalidInputError,
)
from .estimators import (
    CutFrequencies,
    fel_corrected,
    fel_spectral,
    fev,
    fevv,
    rt_estimate,
    upsilon,
)
from .sde import (
    GenHestonParams,
    HestonParams,
    NoiseConfig,
    SimGrid,
)
from .spectral import TickSeries

log = logging.getLogger("fourierlev.cli")

_EXIT_OK = 0
_EXIT_CONFIG = 2
_EXIT_DATA = 3
_EXIT_DEGENERATE = 4


class _Open(dict):
    """Config subtree whose keys are validated downstream, not here."""


def _merge(defaults: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in override.items():
        where = f"{path}{key}"
        if isinstance(out, _Open):
            out[key] = copy.deepcopy(value)
            continue
        if key not in out:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _merge(out[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _apply_set(config: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set needs key=value, got {assignment!r}")
    dotted, raw = assignment.split("=", 1)
    keys = dotted.strip().split(".")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = config
    for key in keys[:-1]:
        if isinstance(node, _Open) and key not in node:
            node[key] = _Open()
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"unknown config key {dotted!r}")
        node = node[key]
        if not isinstance(node, dict):
            raise ConfigError(f"{dotted!r} does not address a config table")
    last = keys[-1]
    if not isinstance(node, _Open) and last not in node:
        raise ConfigError(f"unknown config key {dotted!r}")
    node[last] = value


def _load_config(args, defaults: dict) -> dict:
    config = copy.deepcopy(defaults)
    if args.config:
        try:
            with open(args.config) as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}")
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        config = _merge(config, user)
    for assignment in args.set or []:
        _apply_set(config, assignment)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.threads is not None:
        config["threads"] = args.threads
    if args.out is not None:
        config["out_dir"] = args.out
    return config


def _echo_config(config: dict, out_dir: str | None) -> None:
    if not out_dir:
        return
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "resolved_config.json")
    with open(path, "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _build_noise(d: dict) -> NoiseConfig:
    try:
        return NoiseConfig(**d)
    except TypeError as exc:
        raise ConfigError(f"bad noise config: {exc}")


def _build_scenario(d: dict) -> harness.SimScenario:
    model = d.get("model", "heston")
    cls = {"heston": HestonParams, "gen_heston": GenHestonParams}.get(model)
    if cls is None:
        raise ConfigError(f"unknown model {model!r}")
    try:
        params = cls(**d.get("params", {}))
    except TypeError as exc:
        raise ConfigError(f"bad params for model {model!r}: {exc}")
    return harness.SimScenario(
        model=model,
        params=params,
        n_steps=int(d["n_steps"]),
        horizon=float(d["horizon"]),
        noise=_build_noise(d.get("noise", {})),
    )


def _build_gridspec(d: dict, n_steps: int) -> tuning.GridSpec:
    m_values = d.get("m_values", "auto")
    if m_values == "auto":
        m_values = tuning.default_m_grid(n_steps)
    n_values = d.get("n_values", [1, 2, 3, 4, 5, 6])
    return tuning.GridSpec(tuple(int(m) for m in m_values),
                           tuple(int(n) for n in n_values),
                           d.get("objective", "mse"))


_SCENARIO_DEFAULTS = {
    "model": "heston",
    "params": _Open(),
    "n_steps": 5400,
    "horizon": 0.05,
    "noise": {"kind": "none", "ratio": 0.0, "skew_sign": 1},
}

_SIMULATE_DEFAULTS = {
    "scenario": copy.deepcopy(_SCENARIO_DEFAULTS),
    "days": 1,
    "seed": 0,
    "out_dir": None,
    "threads": 1,
}

_TUNE_DEFAULTS = {
    "scenario": copy.deepcopy(_SCENARIO_DEFAULTS),
    "days": 50,
    "seed": 0,
    "grid": {"m_values": "auto", "n_values": [1, 2, 3, 4, 5, 6],
             "objective": "mse"},
    "procedure": "grid",
    "min_replications": 10,
    "out_dir": None,
    "threads": 1,
}

_MC_DEFAULTS = {
    "scenario": copy.deepcopy(_SCENARIO_DEFAULTS),
    "days": 50,
    "seed": 0,
    "grid": {"m_values": "auto", "n_values": [1, 2, 3, 4, 5, 6],
             "objective": "mse"},
    "estimators": list(harness.ESTIMATOR_NAMES),
    "fev_m_values": "auto",
    "fevv_n_values": [2, 3, 4, 5, 6],
    "min_replications": 10,
    "mode": "table",
    "sweep": {"parameter": None, "values": []},
    "out_dir": None,
    "threads": 1,
}

_EMPIRICAL_DEFAULTS = {
    "ticks": None,
    "timestamp_column": "timestamp",
    "price_column": "price",
    "session": None,
    "grid": {"m_values": "auto", "n_values": [1, 2, 3, 4, 5, 6]},
    "fev_m_values": "auto",
    "fevv_n_values": [2, 3, 4, 5, 6],
    "rv_interval": 300.0,
    "acf_max_lag": 50,
    "min_replications": 10,
    "out_dir": None,
    "threads": 1,
    "seed": 0,
}


def cmd_simulate(args) -> int:
    config = _load_config(args, _SIMULATE_DEFAULTS)
    scenario = _build_scenario(config["scenario"])
    days = int(config["days"])
    seed = int(config["seed"])
    out_dir = config.get("out_dir")
    if not out_dir:
        raise ConfigError("simulate needs an output directory (--out)")
    os.makedirs(out_dir, exist_ok=True)
    _echo_config(config, out_dir)
    written: list[str] = []
    try:
        outs = scenario.simulate(seed, range(days))
        for k, out in enumerate(outs):
            paths = out.write(out_dir, stem=f"sim_day{k:03d}")
            written.extend(paths)
    except Exception:
        # Half a dataset is worse than none: clear what this run created.
        for path in written:
            try:
                os.unlink(path)
            except OSError:  # pragma: no cover - best effort
                pass
        raise
    _emit({
        "command": "simulate",
        "out_dir": out_dir,
        "days": days,
        "seed": seed,
        "files": written,
        "truth_means": {
            "eta_bar": float(np.mean([o.true_eta for o in outs])),
            "iv_bar": float(np.mean([o.true_iv for o in outs])),
            "ivv_bar": float(np.mean([o.true_ivv for o in outs])),
        },
    })
    return _EXIT_OK


def _series_from_csv(path: str, column: str, time_column: str,
                     horizon: float | None) -> TickSeries:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    for col in (time_column, column):
        if col not in frame.columns:
            raise DataError(
                f"{path} has no column {col!r}; found {list(frame.columns)}"
            )
    t = frame[time_column].to_numpy(dtype=float)
    x = frame[column].to_numpy(dtype=float)
    t = t - t[0]
    if horizon is None:
        horizon = float(t[-1])
    return TickSeries(t, x, horizon)


def cmd_estimate(args) -> int:
    series = _series_from_csv(args.input, args.column, args.time_column,
                              args.horizon)
    name = args.estimator
    payload: dict = {"command": "estimate", "estimator": name,
                     "input": args.input, "n_increments": series.n,
                     "horizon": series.horizon}
    if name in ("fel", "fel-corrected", "rt"):
        if args.m is None or args.n is None:
            raise ConfigError(f"{name} needs --m and --n")
        cut = CutFrequencies(args.m, args.n)
    if name == "fel":
        est = fel_spectral(series, cut)
        payload.update(value=est.value, m=cut.m, n=cut.n,
                       imag_residual=est.imag_residual)
    elif name == "fel-corrected":
        if args.b is None or args.control_m is None or args.control_n is None:
            raise ConfigError(
                "fel-corrected needs --b, --control-m, --control-n"
            )
        est = fel_spectral(series, cut)
        control_cut = CutFrequencies(args.control_m, args.control_n)
        ups = upsilon(series, control_cut)
        value = float(fel_corrected(est.value, ups, args.b))
        payload.update(value=value, raw_value=est.value, upsilon=ups,
                       b=args.b, m=cut.m, n=cut.n,
                       control_m=control_cut.m, control_n=control_cut.n)
    elif name == "fev":
        if args.m is None:
            raise ConfigError("fev needs --m")
        payload.update(value=fev(series, args.m), m=args.m)
    elif name == "fevv":
        if args.m is None or args.n is None:
            raise ConfigError("fevv needs --m and --n")
        cut = CutFrequencies(args.m, args.n)
        payload.update(value=fevv(series, cut), m=cut.m, n=cut.n)
    elif name == "rt":
        if args.fev_m is None or args.fevv_m is None or args.fevv_n is None:
            raise ConfigError("rt needs --fev-m, --fevv-m, --fevv-n")
        b = args.b
        ups_star = None
        if b is not None:
            if args.control_m is None or args.control_n is None:
                raise ConfigError(
                    "corrected rt needs --control-m and --control-n"
                )
            ups_star = upsilon(series,
                               CutFrequencies(args.control_m, args.control_n))
        est = rt_estimate(series, cut, args.fev_m,
                          CutFrequencies(args.fevv_m, args.fevv_n),
                          b=b, upsilon_star=ups_star)
        payload.update(value=est.value, numerator=est.numerator, iv=est.iv,
                       ivv=est.ivv, corrected=est.corrected,
                       m=cut.m, n=cut.n, fev_m=est.m_iv,
                       fevv_m=est.cut_ivv.m, fevv_n=est.cut_ivv.n)
    _emit(payload)
    return _EXIT_OK


def _simulate_matrices(scenario, days: int, seed: int, spec: tuning.GridSpec):
    """Per-day estimate/control matrices plus truths, batched."""
    from .estimators import leverage_grid

    D = int(days)
    eta = np.empty((D, *spec.shape))
    ups = np.empty_like(eta)
    truths = np.empty(D)
    for batch in harness._batch_indices(D, scenario.n_steps):
        outs = scenario.simulate(seed, batch)
        for day, out in zip(batch, outs):
            eta[day], ups[day] = leverage_grid(out.series_noisy,
                                               spec.m_values, spec.n_values)
            truths[day] = out.true_eta
    return eta, ups, truths


def cmd_tune(args) -> int:
    config = _load_config(args, _TUNE_DEFAULTS)
    scenario = _build_scenario(config["scenario"])
    spec = _build_gridspec(config["grid"], scenario.n_steps)
    procedure = config["procedure"]
    if procedure not in ("grid", "corrected"):
        raise ConfigError(f"procedure must be grid or corrected, "
                          f"got {procedure!r}")
    out_dir = config.get("out_dir")
    _echo_config(config, out_dir)
    eta, ups, truths = _simulate_matrices(scenario, config["days"],
                                          int(config["seed"]), spec)
    t = truths if spec.objective == "mse" else None
    floor = int(config["min_replications"])
    if procedure == "grid":
        result = tuning.grid_search(eta, t, spec, min_replications=floor)
    else:
        result = tuning.corrected_from_matrices(eta, ups, spec, t,
                                                min_replications=floor)
    payload = {"command": "tune", "procedure": procedure,
               "days": int(config["days"]), "seed": int(config["seed"])}
    payload.update(result.to_dict())
    if out_dir:
        with open(os.path.join(out_dir, "tuning.json"), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        frame = harness._surface_frame(result)
        frame.to_csv(os.path.join(out_dir, "surface.csv"), index=False,
                     float_format="%.17g")
    _emit(payload)
    return _EXIT_OK


def cmd_mc(args) -> int:
    config = _load_config(args, _MC_DEFAULTS)
    scenario = _build_scenario(config["scenario"])
    spec = _build_gridspec(config["grid"], scenario.n_steps)
    fev_ms = config["fev_m_values"]
    cfg = harness.ExperimentConfig(
        scenario=scenario,
        days=int(config["days"]),
        seed=int(config["seed"]),
        grid=spec,
        estimators=tuple(config["estimators"]),
        fev_m_values=None if fev_ms == "auto"
        else tuple(int(m) for m in fev_ms),
        fevv_n_values=tuple(int(v) for v in config["fevv_n_values"]),
        min_replications=int(config["min_replications"]),
        out_dir=config.get("out_dir"),
        threads=int(config.get("threads") or 1),
    )
    _echo_config(config, cfg.out_dir)
    mode = config["mode"]
    if mode == "table":
        report = harness.run_table_experiment(cfg)
        payload = {"command": "mc", "mode": mode}
        payload.update(report.to_dict())
    elif mode == "sensitivity":
        sweep = config["sweep"]
        if not sweep.get("parameter"):
            raise ConfigError("sensitivity mode needs sweep.parameter")
        frame = harness.run_sensitivity(cfg, sweep["parameter"],
                                        sweep.get("values", []))
        payload = {"command": "mc", "mode": mode,
                   "rows": json.loads(frame.to_json(orient="records"))}
    elif mode == "rt":
        frame = harness.run_rt_tracking(cfg)
        payload = {"command": "mc", "mode": mode,
                   "days": int(len(frame)),
                   "rt_mean": float(np.nanmean(frame["rt"].to_numpy())),
                   "true_rt_mean": float(np.nanmean(
                       frame["true_rt"].to_numpy()))}
        if cfg.out_dir:
            frame.to_csv(os.path.join(cfg.out_dir, "rt_series.csv"),
                         index=False, float_format="%.17g")
    else:
        raise ConfigError(f"unknown mc mode {mode!r}")
    _emit(payload)
    return _EXIT_OK


def cmd_empirical(args) -> int:
    config = _load_config(args, _EMPIRICAL_DEFAULTS)
    if not config.get("ticks"):
        raise ConfigError("empirical needs a tick file (set ticks=...)")
    tickfile = market_data.TickFile(
        path=config["ticks"],
        timestamp_column=config["timestamp_column"],
        price_column=config["price_column"],
    )
    session = config.get("session")
    if session is not None:
        session = tuple(session)
        if len(session) != 2:
            raise ConfigError("session must be [open, close]")
    sessions = market_data.load_sessions(tickfile, session)
    med_n = int(np.median([s.series.n for s in sessions]))
    grid_cfg = dict(config["grid"])
    grid_cfg["objective"] = "variance"
    spec = _build_gridspec(grid_cfg, med_n)
    fev_ms = config["fev_m_values"]
    out_dir = config.get("out_dir")
    _echo_config(config, out_dir)
    result = market_data.empirical_pipeline(
        sessions,
        grid=spec,
        fev_m_values=None if fev_ms == "auto"
        else tuple(int(m) for m in fev_ms),
        fevv_n_values=tuple(int(v) for v in config["fevv_n_values"]),
        rv_interval=float(config["rv_interval"]),
        acf_max_lag=int(config["acf_max_lag"]),
        min_replications=int(config["min_replications"]),
        out_dir=out_dir,
    )
    _emit({
        "command": "empirical",
        "ticks": config["ticks"],
        "sessions": int(len(sessions)),
        "years": result.yearly,
        "skipped_years": result.skipped_years,
        "out_dir": out_dir,
    })
    return _EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key (dotted path)")
    common.add_argument("--seed", type=int, default=None,
                        help="master seed override")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for per-day estimation")
    common.add_argument("--out", default=None, help="output directory")

    parser = argparse.ArgumentParser(
        prog="fourierlev",
        description="Fourier estimation of the stochastic leverage effect",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common],
                   help="simulate model days to CSV").set_defaults(
        func=cmd_simulate)

    est = sub.add_parser("estimate", parents=[common],
                         help="run one estimator on a log-price CSV")
    est.add_argument("--input", required=True, help="input CSV path")
    est.add_argument("--estimator", required=True,
                     choices=["fel", "fel-corrected", "fev", "fevv", "rt"])
    est.add_argument("--column", default="noisy_logprice",
                     help="log-price column name")
    est.add_argument("--time-column", default="timestamp")
    est.add_argument("--horizon", type=float, default=None,
                     help="window length (default: last timestamp)")
    est.add_argument("--m", type=int, default=None)
    est.add_argument("--n", type=int, default=None)
    est.add_argument("--b", type=float, default=None)
    est.add_argument("--control-m", type=int, default=None)
    est.add_argument("--control-n", type=int, default=None)
    est.add_argument("--fev-m", type=int, default=None)
    est.add_argument("--fevv-m", type=int, default=None)
    est.add_argument("--fevv-n", type=int, default=None)
    est.set_defaults(func=cmd_estimate)

    sub.add_parser("tune", parents=[common],
                   help="tune cut frequencies on simulated days"
                   ).set_defaults(func=cmd_tune)
    sub.add_parser("mc", parents=[common],
                   help="Monte Carlo experiment harness").set_defaults(
        func=cmd_mc)
    sub.add_parser("empirical", parents=[common],
                   help="run the pipeline on a tick CSV").set_defaults(
        func=cmd_empirical)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidInputError) as exc:
        log.error("%s", exc)
        return _EXIT_CONFIG
    except DataError as exc:
        log.error("%s", exc)
        return _EXIT_DATA
    except DegenerateValueError as exc:
        log.error("%s", exc)
        return _EXIT_DEGENERATE
    except FourierLevError as exc:  # pragma: no cover - catch-all guard
        log.error("%s", exc)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
