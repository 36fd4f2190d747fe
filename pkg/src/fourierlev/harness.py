"""Monte Carlo experiment harness.

Simulates an ensemble of independent days under one scenario, evaluates
the spectral estimators on a cut grid for every day, tunes the cuts under
both objectives, applies the control-variate correction, and aggregates
accuracy statistics against the simulated ground truth.  Everything a
results table needs comes out of one :func:`run_table_experiment` call;
sweeps and ratio-tracking runs are thin layers on top.

Outputs (when an output directory is configured):

* ``report.json``      aggregate statistics and tuned cuts
* ``per_day.csv``      day, estimator, M, N, value, truth (long format)
* ``surface_<e>.csv``  objective surface of estimator ``e`` on the grid
* ``rt_series.csv``    per-day ratio tracking (when ratios are requested)
* ``README.md``        column documentation for the above
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigError, InvalidInputError
from .estimators import fev_grid, fevv_grid, leverage_grid
from .sde import (
    GenHestonParams,
    HestonParams,
    NoiseConfig,
    SimGrid,
    simulate_gen_heston_batch,
    simulate_heston_batch,
)
from .tuning import (
    GridSpec,
    TuningResult,
    corrected_from_matrices,
    grid_search,
)

__all__ = [
    "SimScenario",
    "ExperimentConfig",
    "ExperimentReport",
    "run_table_experiment",
    "run_sensitivity",
    "run_rt_tracking",
    "ESTIMATOR_NAMES",
]

log = logging.getLogger(__name__)

ESTIMATOR_NAMES = ("fel", "fel_corrected", "fev", "fevv", "rt", "rt_corrected")

# Cap on simultaneously simulated days; keeps the shock arrays in the
# hundreds of MB at worst.
_MAX_BATCH = 256
_BATCH_ELEMENTS = 20_000_000


@dataclass(frozen=True)
class SimScenario:
    """One simulation setting: model, parameters, grid, noise."""

    model: str
    params: HestonParams | GenHestonParams
    n_steps: int
    horizon: float
    noise: NoiseConfig = NoiseConfig()

    def __post_init__(self) -> None:
        if self.model not in ("heston", "gen_heston"):
            raise ConfigError(f"unknown model {self.model!r}")
        want = HestonParams if self.model == "heston" else GenHestonParams
        if not isinstance(self.params, want):
            raise ConfigError(
                f"model {self.model!r} needs {want.__name__}, got "
                f"{type(self.params).__name__}"
            )

    @property
    def grid(self) -> SimGrid:
        return SimGrid(self.n_steps, self.horizon)

    def simulate(self, seed: int, day_indices, noise: NoiseConfig | None = None):
        noise_cfg = self.noise if noise is None else noise
        if self.model == "heston":
            return simulate_heston_batch(self.params, self.grid, seed,
                                         day_indices, noise_cfg)
        return simulate_gen_heston_batch(self.params, self.grid, seed,
                                         day_indices, noise_cfg)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": dataclasses.asdict(self.params),
            "n_steps": self.n_steps,
            "horizon": self.horizon,
            "noise": None if self.noise is None else dataclasses.asdict(self.noise),
        }


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one table run needs."""

    scenario: SimScenario
    days: int
    seed: int
    grid: GridSpec
    estimators: tuple = ESTIMATOR_NAMES
    fev_m_values: tuple | None = None
    fevv_n_values: tuple = (2, 3, 4, 5, 6)
    min_replications: int = 10
    out_dir: str | None = None
    threads: int = 1

    def __post_init__(self) -> None:
        if self.days < 1:
            raise ConfigError("days must be >= 1")
        unknown = set(self.estimators) - set(ESTIMATOR_NAMES)
        if unknown:
            raise ConfigError(
                f"unknown estimators {sorted(unknown)}; valid: "
                f"{list(ESTIMATOR_NAMES)}"
            )
        if not self.estimators:
            raise ConfigError("at least one estimator is required")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if any(n < 2 for n in self.fevv_n_values):
            raise ConfigError(
                "vol-of-vol cuts need n >= 2 (n = 1 estimates are "
                "identically zero)"
            )

    def resolved_fev_grid(self) -> tuple:
        if self.fev_m_values is not None:
            return tuple(int(m) for m in self.fev_m_values)
        n = self.scenario.n_steps
        lo = max(1, -(-n // 64))
        hi = max(lo + 1, (n - 1) // 2)
        grid = np.geomspace(lo, hi, 24)
        return tuple(sorted(set(int(round(g)) for g in grid)))

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "days": self.days,
            "seed": self.seed,
            "grid": {
                "m_values": list(self.grid.m_values),
                "n_values": list(self.grid.n_values),
                "objective": self.grid.objective,
            },
            "estimators": list(self.estimators),
            "fev_m_values": list(self.resolved_fev_grid()),
            "fevv_n_values": list(self.fevv_n_values),
            "min_replications": self.min_replications,
            "out_dir": self.out_dir,
            "threads": self.threads,
        }


@dataclass
class ExperimentReport:
    """Aggregated result of one table run."""

    config: dict
    days: int
    truths: dict
    estimators: dict
    per_day: pd.DataFrame
    surfaces: dict
    rt_series: pd.DataFrame | None
    runtime_seconds: float

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "days": self.days,
            "truth_means": self.truths,
            "estimators": self.estimators,
            "runtime_seconds": self.runtime_seconds,
        }

    def write(self, out_dir: str) -> list[str]:
        os.makedirs(out_dir, exist_ok=True)
        written = []
        path = os.path.join(out_dir, "report.json")
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
        path = os.path.join(out_dir, "per_day.csv")
        self.per_day.to_csv(path, index=False, float_format="%.17g")
        written.append(path)
        for name, frame in self.surfaces.items():
            path = os.path.join(out_dir, f"surface_{name}.csv")
            frame.to_csv(path, index=False, float_format="%.17g")
            written.append(path)
        if self.rt_series is not None:
            path = os.path.join(out_dir, "rt_series.csv")
            self.rt_series.to_csv(path, index=False, float_format="%.17g")
            written.append(path)
        path = os.path.join(out_dir, "README.md")
        with open(path, "w") as fh:
            fh.write(_OUTPUT_README)
        written.append(path)
        return written


_OUTPUT_README = """\
# Experiment output

- `report.json`: run configuration, mean true quantities, and per-estimator
  aggregates. Each estimator block carries one entry per tuning objective
  (`mse`, `variance`) with the selected cuts, mean, bias (absolute mean
  error), sample variance (ddof=1), and for the MSE objective the exact
  population-moment decomposition of the MSE.
- `per_day.csv`: long format, one row per day and estimator at the cuts
  selected under the run's primary objective. Columns: `day`, `estimator`,
  `M`, `N` (empty for the integrated-variance estimator), `value`, `truth`.
- `surface_<estimator>.csv`: tuning surface under the primary objective,
  columns `m`, `n`, `objective`.
- `rt_series.csv` (when ratios are requested): columns `day`, `true_rt`,
  `rt`, `rt_corrected`; empty values mark days with a degenerate
  denominator.
"""


def _batch_indices(total: int, n_steps: int):
    chunk = max(1, min(_MAX_BATCH, _BATCH_ELEMENTS // max(1, n_steps)))
    start = 0
    while start < total:
        stop = min(total, start + chunk)
        yield list(range(start, stop))
        start = stop


def _stats_block(values: np.ndarray, truths: np.ndarray | None) -> dict:
    out = {
        "mean": float(np.mean(values)),
        "variance": float(np.var(values, ddof=1)) if values.size > 1
        else float("nan"),
    }
    if truths is not None:
        err = values - truths
        out["bias"] = float(abs(np.mean(err)))
        out["mse"] = float(np.mean(err * err))
        vx = float(np.var(values, ddof=0))
        vy = float(np.var(truths, ddof=0))
        cxy = float(np.mean((values - values.mean())
                            * (truths - truths.mean())))
        out["decomposition"] = {
            "var_est_pop": vx,
            "var_truth_pop": vy,
            "cov_pop": cxy,
            "mean_gap_sq": (float(np.mean(values)) - float(np.mean(truths))) ** 2,
            "mse": out["mse"],
        }
    return out


def _tune_1d(values: np.ndarray, truths, m_values: tuple, objective: str,
             min_replications: int) -> TuningResult:
    """Grid search over a single cut axis (integrated variance)."""
    spec = GridSpec(m_values, (1,), objective)
    cube = values[:, :, None]
    return grid_search(cube, truths, spec, min_replications=min_replications)


def _surface_frame(result: TuningResult) -> pd.DataFrame:
    ms = np.repeat(result.m_values, len(result.n_values))
    ns = np.tile(result.n_values, len(result.m_values))
    return pd.DataFrame({"m": ms, "n": ns,
                         "objective": result.surface.ravel()})


def run_table_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Simulate, estimate, tune, correct, and aggregate one scenario.

    Returns the report; also writes the output files when the config has
    an ``out_dir``.  Days are simulated in batches with one RNG stream per
    day index, so the ensemble is identical no matter the batch size or
    thread count.
    """
    t0 = time.monotonic()
    n = cfg.scenario.n_steps
    D = cfg.days
    spec = cfg.grid
    fev_ms = cfg.resolved_fev_grid()
    fevv_ns = tuple(int(v) for v in cfg.fevv_n_values)
    want = set(cfg.estimators)
    need_lev = want & {"fel", "fel_corrected", "rt", "rt_corrected"}
    need_fev = want & {"fev", "rt", "rt_corrected"}
    need_fevv = want & {"fevv", "rt", "rt_corrected"}

    eta = np.empty((D, *spec.shape)) if need_lev else None
    ups = np.empty_like(eta) if need_lev else None
    fevs = np.empty((D, len(fev_ms))) if need_fev else None
    fevvs = np.empty((D, len(spec.m_values), len(fevv_ns))) if need_fevv \
        else None
    true_eta = np.empty(D)
    true_iv = np.empty(D)
    true_ivv = np.empty(D)
    true_rt = np.empty(D)

    def eval_day(args):
        idx, series = args
        if need_lev:
            eta[idx], ups[idx] = leverage_grid(series, spec.m_values,
                                               spec.n_values)
        if need_fev:
            fevs[idx] = fev_grid(series, fev_ms)
        if need_fevv:
            fevvs[idx] = fevv_grid(series, spec.m_values, fevv_ns)

    for batch in _batch_indices(D, n):
        outs = cfg.scenario.simulate(cfg.seed, batch)
        jobs = []
        for day, out in zip(batch, outs):
            true_eta[day] = out.true_eta
            true_iv[day] = out.true_iv
            true_ivv[day] = out.true_ivv
            true_rt[day] = out.true_rt
            jobs.append((day, out.series_noisy))
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
                list(ex.map(eval_day, jobs))
        else:
            for job in jobs:
                eval_day(job)
        log.info("processed days %d..%d of %d", batch[0], batch[-1], D)

    results: dict = {}
    surfaces: dict = {}
    primary = spec.objective
    selections: dict = {}

    for objective in ("mse", "variance"):
        sp = GridSpec(spec.m_values, spec.n_values, objective)
        t_eta = true_eta if objective == "mse" else None
        t_iv = true_iv if objective == "mse" else None
        t_ivv = true_ivv if objective == "mse" else None
        if need_lev:
            res = grid_search(eta, t_eta, sp, cfg.min_replications)
            i, j = res.selected_index
            block = _stats_block(eta[:, i, j], true_eta)
            block.update(res.to_dict())
            if "fel" in want:
                results.setdefault("fel", {})[objective] = block
            if objective == primary:
                selections["fel"] = res
                if "fel" in want:
                    surfaces["fel"] = _surface_frame(res)
        if "fel_corrected" in want or "rt_corrected" in want:
            res = corrected_from_matrices(eta, ups, sp, t_eta,
                                          cfg.min_replications)
            i, j = res.selected_index
            ci = spec.m_values.index(res.control_m)
            cj = spec.n_values.index(res.control_n)
            star = eta[:, i, j] - res.b_star * ups[:, ci, cj]
            block = _stats_block(star, true_eta)
            block.update(res.to_dict())
            if "fel_corrected" in want:
                results.setdefault("fel_corrected", {})[objective] = block
            if objective == primary:
                selections["fel_corrected"] = res
                if "fel_corrected" in want:
                    surfaces["fel_corrected"] = _surface_frame(res)
        if need_fev:
            res = _tune_1d(fevs, t_iv, fev_ms, objective,
                           cfg.min_replications)
            i, _ = res.selected_index
            block = _stats_block(fevs[:, i], true_iv)
            block.update(res.to_dict())
            del block["grid_n"], block["n_hat"]
            if "fev" in want:
                results.setdefault("fev", {})[objective] = block
            if objective == primary:
                selections["fev"] = res
                if "fev" in want:
                    frame = pd.DataFrame({"m": list(fev_ms),
                                          "objective": res.surface.ravel()})
                    surfaces["fev"] = frame
        if need_fevv:
            sp_vv = GridSpec(spec.m_values, fevv_ns, objective)
            res = grid_search(fevvs, t_ivv, sp_vv, cfg.min_replications)
            i, j = res.selected_index
            block = _stats_block(fevvs[:, i, j], true_ivv)
            block.update(res.to_dict())
            if "fevv" in want:
                results.setdefault("fevv", {})[objective] = block
            if objective == primary:
                selections["fevv"] = res
                if "fevv" in want:
                    surfaces["fevv"] = _surface_frame(res)

    # Per-day values at the primary-objective selections, plus ratios.
    rows = []
    rt_frame = None

    def add_rows(name, m, n, values, truths):
        for d in range(D):
            rows.append((d, name, m, n, values[d], truths[d]))

    day_values: dict = {}
    if "fel" in selections:
        i, j = selections["fel"].selected_index
        day_values["fel"] = eta[:, i, j]
    if "fel_corrected" in selections:
        res = selections["fel_corrected"]
        i, j = res.selected_index
        ci = spec.m_values.index(res.control_m)
        cj = spec.n_values.index(res.control_n)
        day_values["fel_corrected"] = eta[:, i, j] - res.b_star * ups[:, ci, cj]
    if "fev" in selections:
        i, _ = selections["fev"].selected_index
        day_values["fev"] = fevs[:, i]
    if "fevv" in selections:
        i, j = selections["fevv"].selected_index
        day_values["fevv"] = fevvs[:, i, j]

    if "fel" in want and "fel" in day_values:
        res = selections["fel"]
        add_rows("fel", res.m_hat, res.n_hat, day_values["fel"], true_eta)
    if "fel_corrected" in want and "fel_corrected" in day_values:
        res = selections["fel_corrected"]
        add_rows("fel_corrected", res.m_hat, res.n_hat,
                 day_values["fel_corrected"], true_eta)
    if "fev" in want and "fev" in day_values:
        add_rows("fev", selections["fev"].m_hat, None, day_values["fev"],
                 true_iv)
    if "fevv" in want and "fevv" in day_values:
        res = selections["fevv"]
        add_rows("fevv", res.m_hat, res.n_hat, day_values["fevv"], true_ivv)

    if want & {"rt", "rt_corrected"}:
        denom_ok = (day_values["fev"] > 0) & (day_values["fevv"] > 0)
        denom = np.sqrt(np.where(denom_ok, day_values["fev"]
                                 * day_values["fevv"], np.nan))
        rt_cols = {"day": np.arange(D), "true_rt": true_rt}
        for name, source in (("rt", "fel"), ("rt_corrected", "fel_corrected")):
            if name not in want:
                continue
            ratio = day_values[source] / denom
            valid = np.isfinite(ratio) & np.isfinite(true_rt)
            block: dict = {
                "m_hat": selections[source].m_hat,
                "n_hat": selections[source].n_hat,
                "m_iv": selections["fev"].m_hat,
                "fevv_m": selections["fevv"].m_hat,
                "fevv_n": selections["fevv"].n_hat,
                "degenerate_days": int(D - valid.sum()),
            }
            if valid.any():
                block.update(_stats_block(ratio[valid], true_rt[valid]))
            results[name] = {primary: block}
            res = selections[source]
            add_rows(name, res.m_hat, res.n_hat, ratio, true_rt)
            rt_cols[name] = ratio
        rt_frame = pd.DataFrame(rt_cols)

    per_day = pd.DataFrame(rows, columns=["day", "estimator", "M", "N",
                                          "value", "truth"])
    truth_means = {
        "eta_bar": float(np.mean(true_eta)),
        "iv_bar": float(np.mean(true_iv)),
        "ivv_bar": float(np.mean(true_ivv)),
        "rt_bar": float(np.nanmean(true_rt)),
    }
    report = ExperimentReport(
        config=cfg.to_dict(),
        days=D,
        truths=truth_means,
        estimators=results,
        per_day=per_day,
        surfaces=surfaces,
        rt_series=rt_frame,
        runtime_seconds=time.monotonic() - t0,
    )
    if cfg.out_dir:
        report.write(cfg.out_dir)
    return report


def _with_parameter(cfg: ExperimentConfig, name: str, value):
    """New config with one swept parameter replaced."""
    scen = cfg.scenario
    if name == "noise_ratio":
        noise = dataclasses.replace(scen.noise, ratio=float(value))
        scen = dataclasses.replace(scen, noise=noise)
    elif name == "zeta_target":
        if scen.model != "gen_heston":
            raise ConfigError("zeta_target only applies to gen_heston")
        # Stationary correlation (2 xi - eta_mr) / eta_mr = value, eta_mr
        # held fixed.
        xi = scen.params.eta_mr * (float(value) + 1.0) / 2.0
        params = dataclasses.replace(scen.params, xi=xi)
        scen = dataclasses.replace(scen, params=params)
    elif name in {f.name for f in dataclasses.fields(scen.params)}:
        params = dataclasses.replace(scen.params, **{name: float(value)})
        scen = dataclasses.replace(scen, params=params)
    else:
        raise ConfigError(
            f"unknown sweep parameter {name!r} for model {scen.model!r}"
        )
    return dataclasses.replace(cfg, scenario=scen, out_dir=None)


def run_sensitivity(cfg: ExperimentConfig, parameter: str, values
                    ) -> pd.DataFrame:
    """Re-run the table experiment across one parameter sweep.

    The master seed is shared across sweep points, so all points see the
    same underlying Gaussian draws and differences are purely parametric.
    Points whose parameter value violates model constraints are skipped
    and flagged in the output instead of aborting the sweep.  Writes
    ``sensitivity.csv`` when the config has an output directory.
    """
    rows = []
    for value in values:
        row: dict = {"parameter": parameter, "value": float(value)}
        try:
            sub = _with_parameter(cfg, parameter, value)
            report = run_table_experiment(sub)
        except (ConfigError, InvalidInputError) as exc:
            log.warning("sweep point %s=%s skipped: %s", parameter, value, exc)
            row.update({"skipped": True, "reason": str(exc)})
            rows.append(row)
            continue
        row["skipped"] = False
        row["reason"] = ""
        row["eta_bar"] = report.truths["eta_bar"]
        primary = cfg.grid.objective
        for name in ("fel", "fel_corrected"):
            block = report.estimators.get(name, {}).get(primary)
            if block is None:
                continue
            row[f"{name}_m_hat"] = block["m_hat"]
            row[f"{name}_n_hat"] = block["n_hat"]
            row[f"{name}_mean"] = block["mean"]
            row[f"{name}_variance"] = block["variance"]
            if "mse" in block:
                row[f"{name}_mse"] = block["mse"]
                row[f"{name}_bias"] = block["bias"]
            if name == "fel_corrected":
                row["lambda_ratio"] = block["lambda_ratio"]
        rows.append(row)
    frame = pd.DataFrame(rows)
    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        frame.to_csv(os.path.join(cfg.out_dir, "sensitivity.csv"),
                     index=False, float_format="%.17g")
    return frame


def run_rt_tracking(cfg: ExperimentConfig) -> pd.DataFrame:
    """Per-day leverage-ratio tracking against the simulated truth.

    Convenience wrapper: forces the ratio estimators on and returns the
    ``rt_series`` frame (day, true_rt, rt, rt_corrected).
    """
    want = set(cfg.estimators) | {"rt", "rt_corrected", "fev", "fevv",
                                  "fel", "fel_corrected"}
    sub = dataclasses.replace(
        cfg, estimators=tuple(e for e in ESTIMATOR_NAMES if e in want)
    )
    report = run_table_experiment(sub)
    if report.rt_series is None:  # pragma: no cover - forced on above
        raise InvalidInputError("ratio tracking produced no series")
    return report.rt_series
