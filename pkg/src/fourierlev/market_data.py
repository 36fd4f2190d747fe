"""Tick-file loading and the empirical estimation pipeline.

Input is a two-column CSV of raw trades: a ``timestamp`` (either epoch
seconds or an ISO-8601 string; the whole file must use one convention)
and a strictly positive ``price``.  Rows that fail to parse, carry
nonpositive prices, or fall outside the trading-session window are
dropped and counted, and ties in the timestamp are collapsed to the last
recorded trade.  Each surviving calendar day (UTC) becomes a
:class:`DailySession` holding a :class:`~fourierlev.spectral.TickSeries`
in seconds relative to the session open.

The pipeline treats the days of a calendar year as replications: cuts are
tuned on the pooled sample variance (there is no ground truth outside
simulation), the control-variate correction is applied per year, and
per-day estimates plus yearly aggregates are written out.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DataError, InvalidInputError
from .estimators import fev_grid, fevv_grid, leverage_grid
from .spectral import TickSeries, dedup_last_tick
from .tuning import GridSpec, corrected_from_matrices, default_m_grid, grid_search

__all__ = [
    "TickFile",
    "DailySession",
    "AcfResult",
    "EmpiricalResult",
    "load_sessions",
    "write_sessions",
    "summary_stats",
    "acf",
    "sparse_realized_variance",
    "empirical_pipeline",
]

log = logging.getLogger(__name__)

_SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class TickFile:
    """Location and column naming of a raw tick CSV."""

    path: str
    timestamp_column: str = "timestamp"
    price_column: str = "price"


@dataclass
class DailySession:
    """One trading day of ticks, windowed and deduplicated."""

    date: str
    series: TickSeries
    timestamps: np.ndarray          # absolute epoch seconds, post-filter
    prices: np.ndarray              # raw prices matching `timestamps`
    open_epoch: float
    quality: dict = field(default_factory=dict)

    @property
    def year(self) -> str:
        return self.date[:4]

    @property
    def n_ticks(self) -> int:
        return self.prices.size


def _session_seconds(value) -> float:
    """Seconds since midnight from 'HH:MM:SS' or a plain number."""
    if isinstance(value, str):
        parts = value.split(":")
        if len(parts) != 3:
            raise InvalidInputError(
                f"session time must be HH:MM:SS or seconds, got {value!r}"
            )
        h, m, s = (float(p) for p in parts)
        return h * 3600.0 + m * 60.0 + s
    sec = float(value)
    if not 0.0 <= sec <= _SECONDS_PER_DAY:
        raise InvalidInputError(f"session time {sec} outside [0, 86400]")
    return sec


def _parse_timestamps(raw: pd.Series) -> tuple[np.ndarray, str]:
    """Epoch seconds from a column of epochs or ISO-8601 strings.

    Returns (epoch array with NaN for unparseable rows, mode string).
    The file-level convention is decided by whichever interpretation
    parses more rows, so a handful of corrupt entries cannot flip it.
    """
    as_num = pd.to_numeric(raw, errors="coerce")
    num_ok = int(as_num.notna().sum())
    as_dt = pd.to_datetime(raw, errors="coerce", utc=True)
    dt_ok = int(as_dt.notna().sum())
    if num_ok == 0 and dt_ok == 0:
        raise DataError("no timestamp in the file could be parsed")
    if num_ok >= dt_ok:
        return as_num.to_numpy(dtype=float), "epoch"
    epoch = as_dt.astype("int64").to_numpy(dtype=float) / 1e9
    epoch[as_dt.isna().to_numpy()] = np.nan
    return epoch, "iso8601"


def load_sessions(tickfile: TickFile, session=None) -> list[DailySession]:
    """Load a tick CSV into per-day sessions.

    ``session`` is an optional pair (open, close), each either 'HH:MM:SS'
    or seconds since midnight UTC; ticks outside the window are dropped.
    Without it, each day's window runs from its first to its last tick.
    Days with fewer than two usable ticks are skipped.  Drop counts land
    in each session's ``quality`` dict; file-level problems are logged.
    """
    try:
        frame = pd.read_csv(tickfile.path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {tickfile.path}: {exc}") from exc
    for col in (tickfile.timestamp_column, tickfile.price_column):
        if col not in frame.columns:
            raise DataError(
                f"{tickfile.path} has no column {col!r}; found "
                f"{list(frame.columns)}"
            )
    if len(frame) == 0:
        raise DataError(f"{tickfile.path} contains no rows")

    epoch, mode = _parse_timestamps(frame[tickfile.timestamp_column])
    price = pd.to_numeric(frame[tickfile.price_column],
                          errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(epoch) | ~np.isfinite(price) | (price <= 0.0)
    n_bad = int(bad.sum())
    if n_bad:
        log.warning("%s: dropped %d corrupt rows (unparseable or "
                    "nonpositive price)", tickfile.path, n_bad)
    epoch = epoch[~bad]
    price = price[~bad]
    if epoch.size == 0:
        raise DataError(f"{tickfile.path}: no usable rows after filtering")

    order = np.argsort(epoch, kind="stable")
    epoch = epoch[order]
    price = price[order]

    window = None
    if session is not None:
        open_s = _session_seconds(session[0])
        close_s = _session_seconds(session[1])
        if close_s <= open_s:
            raise InvalidInputError(
                f"session close {close_s} must be after open {open_s}"
            )
        window = (open_s, close_s)

    day_key = np.floor(epoch / _SECONDS_PER_DAY)
    sessions: list[DailySession] = []
    for key in np.unique(day_key):
        mask = day_key == key
        t_day = epoch[mask]
        p_day = price[mask]
        n_raw = int(t_day.size)
        midnight = key * _SECONDS_PER_DAY
        date = pd.Timestamp(midnight, unit="s", tz="UTC").strftime("%Y-%m-%d")
        if window is not None:
            open_e = midnight + window[0]
            close_e = midnight + window[1]
            inside = (t_day >= open_e) & (t_day <= close_e)
            n_window = int(n_raw - inside.sum())
            t_day = t_day[inside]
            p_day = p_day[inside]
            horizon = window[1] - window[0]
        else:
            open_e = t_day[0] if t_day.size else midnight
            n_window = 0
            horizon = t_day[-1] - t_day[0] if t_day.size >= 2 else 0.0
        t_day, p_day, n_dup = dedup_last_tick(t_day, p_day)
        quality = {
            "n_raw": n_raw,
            "n_out_of_window": n_window,
            "n_duplicates": n_dup,
        }
        if t_day.size < 2 or horizon <= 0.0:
            log.warning("session %s skipped: %d usable ticks", date,
                        t_day.size)
            continue
        series = TickSeries(t_day - open_e, np.log(p_day), horizon)
        sessions.append(DailySession(date, series, t_day, p_day,
                                     float(open_e), quality))
    if not sessions:
        raise DataError(f"{tickfile.path}: no session had enough ticks")
    log.info("%s: %d sessions loaded (%s timestamps)", tickfile.path,
             len(sessions), mode)
    return sessions


def write_sessions(sessions, path: str) -> None:
    """Serialize sessions back to the tick-CSV format.

    Epoch timestamps and prices are written with 17 significant digits,
    which round-trips IEEE doubles exactly: loading the written file with
    the same session window reproduces the sessions bit for bit.
    """
    frames = [
        pd.DataFrame({"timestamp": s.timestamps, "price": s.prices})
        for s in sessions
    ]
    pd.concat(frames, ignore_index=True).to_csv(path, index=False,
                                                float_format="%.17g")


def summary_stats(sessions) -> dict:
    """Per-year descriptive statistics of ticks and within-day returns."""
    out: dict = {}
    by_year: dict = {}
    for s in sessions:
        by_year.setdefault(s.year, []).append(s)
    for year in sorted(by_year):
        group = by_year[year]
        prices = np.concatenate([s.prices for s in group])
        rets = np.concatenate([s.series.increments for s in group])
        out[year] = {
            "days": len(group),
            "ticks": int(prices.size),
            "price_mean": float(prices.mean()),
            "price_min": float(prices.min()),
            "price_max": float(prices.max()),
            "return_mean": float(rets.mean()) if rets.size else math.nan,
            "return_std": float(rets.std(ddof=1)) if rets.size > 1
            else math.nan,
            "ticks_per_day_mean": float(prices.size / len(group)),
        }
    return out


@dataclass
class AcfResult:
    """Sample autocorrelation with a white-noise confidence band."""

    lags: np.ndarray
    values: np.ndarray
    band: float
    nobs: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"lag": self.lags, "acf": self.values,
                             "band": self.band})


def acf(x, max_lag: int) -> AcfResult:
    """Biased sample autocorrelation up to ``max_lag``.

    Standard normalization by the lag-0 sum of squares; the band is the
    usual +-1.96/sqrt(n) white-noise reference.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError("acf expects a 1-d array")
    if max_lag < 1:
        raise InvalidInputError("max_lag must be >= 1")
    if arr.size < max_lag + 2:
        raise InvalidInputError(
            f"need at least max_lag + 2 = {max_lag + 2} points, got {arr.size}"
        )
    centered = arr - arr.mean()
    denom = float(np.dot(centered, centered))
    if denom == 0.0:
        raise InvalidInputError("series is constant; acf undefined")
    vals = np.empty(max_lag + 1)
    vals[0] = 1.0
    for k in range(1, max_lag + 1):
        vals[k] = float(np.dot(centered[:-k], centered[k:])) / denom
    return AcfResult(np.arange(max_lag + 1), vals,
                     1.96 / math.sqrt(arr.size), arr.size)


def sparse_realized_variance(series: TickSeries, interval: float = 300.0
                             ) -> float:
    """Realized variance on a sparse calendar grid, last-tick sampled.

    The log price is sampled every ``interval`` time units from the start
    of the window (times before the first tick take the first tick's
    value), and squared increments are summed.  The usual low-frequency
    benchmark that is nearly insensitive to microstructure noise.
    """
    if interval <= 0:
        raise InvalidInputError("interval must be positive")
    t = series.timestamps
    grid = np.arange(0.0, series.horizon + 1e-9, interval)
    if grid.size < 2:
        grid = np.array([t[0], t[-1]])
    idx = np.searchsorted(t, grid, side="right") - 1
    idx = np.clip(idx, 0, t.size - 1)
    sampled = series.log_prices[idx]
    d = np.diff(sampled)
    return float(np.dot(d, d))


@dataclass
class EmpiricalResult:
    """Pipeline output: per-day estimates, yearly aggregates, diagnostics."""

    daily: pd.DataFrame
    yearly: dict
    acf_frame: pd.DataFrame
    skipped_years: dict

    def write(self, out_dir: str) -> list[str]:
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        p = os.path.join(out_dir, "daily_estimates.csv")
        self.daily.to_csv(p, index=False, float_format="%.17g")
        paths.append(p)
        p = os.path.join(out_dir, "yearly_summary.json")
        with open(p, "w") as fh:
            json.dump({"years": self.yearly,
                       "skipped_years": self.skipped_years},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")
        paths.append(p)
        p = os.path.join(out_dir, "acf.csv")
        self.acf_frame.to_csv(p, index=False, float_format="%.17g")
        paths.append(p)
        return paths


def empirical_pipeline(sessions, grid: GridSpec | None = None,
                       fev_m_values=None, fevv_n_values=(2, 3, 4, 5, 6),
                       rv_interval: float = 300.0, acf_max_lag: int = 50,
                       min_replications: int = 10,
                       out_dir: str | None = None) -> EmpiricalResult:
    """Tune, correct, and estimate year by year on real sessions.

    Days within a calendar year are the replications.  All tuning uses
    the variance objective; per-day leverage, corrected leverage,
    integrated variance, vol-of-vol, the normalized ratios, and a sparse
    realized variance benchmark come out in ``daily``, with tuned cuts,
    the control loading, and the variance ratio per year in ``yearly``.
    Years with fewer usable days than ``min_replications`` are skipped
    and reported rather than tuned on hopelessly few replications.
    """
    sessions = list(sessions)
    if not sessions:
        raise InvalidInputError("no sessions supplied")
    if grid is not None and grid.objective != "variance":
        raise InvalidInputError(
            "real data carries no ground truth; tuning must use the "
            "variance objective"
        )
    med_n = int(np.median([s.series.n for s in sessions]))
    if grid is None:
        grid = GridSpec(default_m_grid(med_n), (1, 2, 3, 4, 5, 6), "variance")
    if fev_m_values is None:
        lo = max(1, -(-med_n // 64))
        hi = max(lo + 1, (med_n - 1) // 2)
        fev_m_values = tuple(sorted(set(
            int(round(g)) for g in np.geomspace(lo, hi, 24))))
    fevv_ns = tuple(int(v) for v in fevv_n_values)

    by_year: dict = {}
    for s in sessions:
        by_year.setdefault(s.year, []).append(s)

    daily_rows = []
    yearly: dict = {}
    skipped: dict = {}
    acf_rows = []
    floor = max(2, min_replications)

    for year in sorted(by_year):
        group = sorted(by_year[year], key=lambda s: s.date)
        if len(group) < floor:
            skipped[year] = (
                f"{len(group)} usable days < replication floor {floor}"
            )
            log.warning("year %s skipped: %s", year, skipped[year])
            continue
        D = len(group)
        eta = np.empty((D, *grid.shape))
        ups = np.empty_like(eta)
        fevs = np.empty((D, len(fev_m_values)))
        fevvs = np.empty((D, len(grid.m_values), len(fevv_ns)))
        for d, sess in enumerate(group):
            eta[d], ups[d] = leverage_grid(sess.series, grid.m_values,
                                           grid.n_values)
            fevs[d] = fev_grid(sess.series, fev_m_values)
            fevvs[d] = fevv_grid(sess.series, grid.m_values, fevv_ns)

        fel_res = grid_search(eta, None, grid, min_replications=floor)
        corr_res = corrected_from_matrices(eta, ups, grid,
                                           min_replications=floor)
        fev_spec = GridSpec(fev_m_values, (1,), "variance")
        fev_res = grid_search(fevs[:, :, None], None, fev_spec,
                              min_replications=floor)
        fevv_spec = GridSpec(grid.m_values, fevv_ns, "variance")
        fevv_res = grid_search(fevvs, None, fevv_spec,
                               min_replications=floor)

        i, j = fel_res.selected_index
        fel_day = eta[:, i, j]
        ci = grid.m_values.index(corr_res.control_m)
        cj = grid.n_values.index(corr_res.control_n)
        si, sj = corr_res.selected_index
        corr_day = eta[:, si, sj] - corr_res.b_star * ups[:, ci, cj]
        fi = fev_res.selected_index[0]
        fev_day = fevs[:, fi]
        vi, vj = fevv_res.selected_index
        fevv_day = fevvs[:, vi, vj]

        denom_ok = (fev_day > 0) & (fevv_day > 0)
        denom = np.sqrt(np.where(denom_ok, fev_day * fevv_day, np.nan))
        rt_day = fel_day / denom
        rt_corr_day = corr_day / denom

        rv_day = np.array([
            sparse_realized_variance(s.series, rv_interval) for s in group
        ])
        for d, sess in enumerate(group):
            daily_rows.append({
                "date": sess.date,
                "year": year,
                "n_ticks": sess.n_ticks,
                "fel": fel_day[d],
                "fel_corrected": corr_day[d],
                "fev": fev_day[d],
                "fevv": fevv_day[d],
                "rt": rt_day[d],
                "rt_corrected": rt_corr_day[d],
                "rv_sparse": rv_day[d],
            })

        pooled = np.concatenate([s.series.increments for s in group])
        if pooled.size >= acf_max_lag + 2:
            res = acf(pooled, acf_max_lag)
            for lag, val in zip(res.lags, res.values):
                acf_rows.append({"year": year, "lag": int(lag),
                                 "acf": float(val), "band": res.band})

        yearly[year] = {
            "days": D,
            "fel": {
                "m_hat": fel_res.m_hat, "n_hat": fel_res.n_hat,
                "mean": float(fel_day.mean()),
                "variance": float(np.var(fel_day, ddof=1)),
            },
            "fel_corrected": {
                "m_hat": corr_res.m_hat, "n_hat": corr_res.n_hat,
                "control_m": corr_res.control_m,
                "control_n": corr_res.control_n,
                "b_star": corr_res.b_star,
                "lambda_ratio": corr_res.lambda_ratio,
                "mean": float(corr_day.mean()),
                "variance": float(np.var(corr_day, ddof=1)),
            },
            "fev": {
                "m_hat": fev_res.m_hat,
                "mean": float(fev_day.mean()),
                "variance": float(np.var(fev_day, ddof=1)),
            },
            "fevv": {
                "m_hat": fevv_res.m_hat, "n_hat": fevv_res.n_hat,
                "mean": float(fevv_day.mean()),
                "variance": float(np.var(fevv_day, ddof=1)),
            },
            "rt": {
                "mean": float(np.nanmean(rt_day)) if denom_ok.any()
                else math.nan,
                "degenerate_days": int(D - denom_ok.sum()),
            },
            "rt_corrected": {
                "mean": float(np.nanmean(rt_corr_day)) if denom_ok.any()
                else math.nan,
            },
            "rv_sparse_mean": float(rv_day.mean()),
        }

    if not yearly:
        raise DataError(
            "no year had enough usable days; skipped: "
            + json.dumps(skipped)
        )
    result = EmpiricalResult(
        daily=pd.DataFrame(daily_rows),
        yearly=yearly,
        acf_frame=pd.DataFrame(acf_rows),
        skipped_years=skipped,
    )
    if out_dir:
        result.write(out_dir)
    return result
