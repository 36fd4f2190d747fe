"""Stochastic volatility simulators and microstructure noise.

Two models are implemented with a shared Euler full-truncation scheme:

* square-root stochastic variance with constant leverage correlation
  (:func:`simulate_heston`);
* the same variance dynamics with the price-vol correlation itself
  following a mean-reverting Jacobi-type diffusion on (-1, 1)
  (:func:`simulate_gen_heston`).

The variance state is evolved signed and recorded truncated at zero, and
both the price diffusion and the variance diffusion read the truncated
value.  "True" integrated quantities (integrated variance, integrated
vol-of-vol, integrated leverage) are left-Riemann sums over the recorded
path, so a simulated day carries its own ground truth for the estimators.

Reproducibility contract: the generator for day ``k`` under master seed
``s`` is ``default_rng(SeedSequence(s, spawn_key=(k,)))``, and each day
draws its path shocks first and its observation noise second.  Batched and
one-at-a-time simulation therefore produce bit-identical days, and sweeps
that change only noise settings see identical price paths.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import InvalidInputError
from .spectral import TickSeries

__all__ = [
    "HestonParams",
    "GenHestonParams",
    "SimGrid",
    "NoiseConfig",
    "SimOutput",
    "simulate_heston",
    "simulate_heston_batch",
    "simulate_gen_heston",
    "simulate_gen_heston_batch",
    "add_noise",
    "noise_increment_moments",
    "day_rng",
]

# Keeps the Jacobi correlation strictly inside (-1, 1) so the square-root
# diffusion coefficient stays real.
_RHO_CLAMP = 1.0 - 1e-12

_NOISE_KINDS = ("none", "gaussian", "shifted_exponential")


@dataclass(frozen=True)
class HestonParams:
    """Square-root variance model with constant leverage correlation.

    ``d p = sigma dB,  d sigma^2 = alpha (beta - sigma^2) dt + nu sigma dW``
    with ``corr(dB, dW) = rho``.  Defaults give a slow-reverting,
    moderately negative-leverage day.
    """

    alpha: float = 0.01
    beta: float = 0.2
    nu: float = 0.05
    rho: float = -0.2
    v0: float = 0.2
    p0: float = math.log(100.0)

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0 or self.nu < 0:
            raise InvalidInputError("alpha, beta, nu must be nonnegative")
        if not -1.0 <= self.rho <= 1.0:
            raise InvalidInputError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.v0 < 0:
            raise InvalidInputError("initial variance must be nonnegative")


@dataclass(frozen=True)
class GenHestonParams:
    """Square-root variance with a stochastic leverage correlation.

    The correlation follows
    ``d rho = ((2 xi - eta_mr) - eta_mr rho) dt
              + theta sqrt((1 + rho)(1 - rho)) dW0``
    driven by its own Brownian motion, with stationary mean
    ``(2 xi - eta_mr) / eta_mr``.  The price shock is
    ``rho dW1 + sqrt(1 - rho^2) dW2`` while the variance is driven by
    ``W1`` alone, so the instantaneous price-vol correlation is ``rho(t)``.
    """

    alpha: float = 0.01
    beta: float = 0.2
    nu: float = 0.05
    xi: float = 0.02
    eta_mr: float = 0.5
    theta: float = 0.5
    rho0: float = -0.04
    v0: float = 0.2
    p0: float = math.log(100.0)

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0 or self.nu < 0 or self.theta < 0:
            raise InvalidInputError("alpha, beta, nu, theta must be nonnegative")
        if self.eta_mr <= 0:
            raise InvalidInputError("eta_mr must be positive")
        if not 0.0 < self.xi < self.eta_mr:
            raise InvalidInputError(
                "need 0 < xi < eta_mr so the stationary correlation "
                f"(2 xi - eta_mr) / eta_mr stays in (-1, 1); got xi={self.xi}, "
                f"eta_mr={self.eta_mr}"
            )
        if not -1.0 <= self.rho0 <= 1.0:
            raise InvalidInputError(f"rho0 must lie in [-1, 1], got {self.rho0}")
        if self.v0 < 0:
            raise InvalidInputError("initial variance must be nonnegative")

    @property
    def stationary_rho(self) -> float:
        return (2.0 * self.xi - self.eta_mr) / self.eta_mr


@dataclass(frozen=True)
class SimGrid:
    """Equidistant observation grid: ``n_steps`` increments over ``horizon``."""

    n_steps: int
    horizon: float

    def __post_init__(self) -> None:
        if self.n_steps < 1:
            raise InvalidInputError("n_steps must be >= 1")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise InvalidInputError("horizon must be positive and finite")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def timestamps(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class NoiseConfig:
    """Additive i.i.d. observation noise on the log price.

    ``ratio`` sets the noise standard deviation as a multiple of the
    realized standard deviation of the clean log returns of the day
    (sample std, ddof=1).  ``shifted_exponential`` is a centered
    exponential, optionally sign-flipped via ``skew_sign`` to make the
    third moment negative.
    """

    kind: str = "none"
    ratio: float = 0.0
    skew_sign: int = 1

    def __post_init__(self) -> None:
        if self.kind not in _NOISE_KINDS:
            raise InvalidInputError(
                f"noise kind must be one of {_NOISE_KINDS}, got {self.kind!r}"
            )
        if self.ratio < 0:
            raise InvalidInputError("noise ratio must be nonnegative")
        if self.skew_sign not in (-1, 1):
            raise InvalidInputError("skew_sign must be +1 or -1")

    @property
    def active(self) -> bool:
        return self.kind != "none" and self.ratio > 0.0


@dataclass
class SimOutput:
    """One simulated day: paths, observation grid, and ground truth."""

    model: str
    params: dict
    n_steps: int
    horizon: float
    seed: int
    day_index: int
    series_clean: TickSeries
    series_noisy: TickSeries
    sigma2: np.ndarray
    true_iv: float
    true_ivv: float
    true_eta: float
    true_rt: float
    noise: dict | None = None
    noise_std: float = 0.0
    rho_path: np.ndarray | None = None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "timestamp": self.series_clean.timestamps,
                "clean_logprice": self.series_clean.log_prices,
                "noisy_logprice": self.series_noisy.log_prices,
                "sigma2": self.sigma2,
            }
        )

    def meta(self) -> dict:
        out = {
            "model": self.model,
            "params": self.params,
            "n_steps": self.n_steps,
            "horizon": self.horizon,
            "seed": self.seed,
            "day_index": self.day_index,
            "noise": self.noise,
            "noise_std": self.noise_std,
            "true_iv": self.true_iv,
            "true_ivv": self.true_ivv,
            "true_eta": self.true_eta,
            "true_rt": self.true_rt,
        }
        return out

    def write(self, out_dir: str, stem: str = "sim_day") -> tuple[str, str]:
        """Write ``<stem>.csv`` plus a ``<stem>.json`` sidecar; returns paths."""
        csv_path = os.path.join(out_dir, f"{stem}.csv")
        json_path = os.path.join(out_dir, f"{stem}.json")
        self.to_frame().to_csv(csv_path, index=False, float_format="%.17g")
        with open(json_path, "w") as fh:
            json.dump(self.meta(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return csv_path, json_path


def day_rng(seed: int, day_index: int = 0) -> np.random.Generator:
    """Generator for one simulated day under a master seed.

    Spawning by key rather than splitting sequentially means day ``k`` gets
    the same stream no matter which other days are simulated alongside it.
    """
    ss = np.random.SeedSequence(seed, spawn_key=(day_index,))
    return np.random.default_rng(ss)


def _noise_from_rng(rng: np.random.Generator, cfg: NoiseConfig,
                    count: int) -> np.ndarray:
    """Unit-scale centered noise draws; caller multiplies by the target std."""
    if cfg.kind == "gaussian":
        return rng.standard_normal(count)
    if cfg.kind == "shifted_exponential":
        return cfg.skew_sign * (rng.exponential(1.0, count) - 1.0)
    raise InvalidInputError(f"cannot draw noise of kind {cfg.kind!r}")


def _returns_std(log_prices: np.ndarray) -> float:
    d = np.diff(log_prices)
    if d.size < 2:
        return 0.0
    return float(np.std(d, ddof=1))


def add_noise(series: TickSeries, cfg: NoiseConfig, rng) -> TickSeries:
    """Contaminate a log-price series with additive i.i.d. noise.

    The noise std is ``cfg.ratio`` times the sample std of the series'
    increments, so a constant path (or ratio zero) yields the input
    unchanged.  ``rng`` may be a Generator or anything
    ``numpy.random.default_rng`` accepts.
    """
    if not cfg.active:
        return series
    std = cfg.ratio * _returns_std(series.log_prices)
    if std == 0.0:
        return series
    gen = np.random.default_rng(rng)
    zeta = std * _noise_from_rng(gen, cfg, series.log_prices.size)
    return series.with_log_prices(series.log_prices + zeta)


def noise_increment_moments(cfg: NoiseConfig, noise_std: float) -> dict:
    """Analytic moments of noise increments ``eps_i = zeta_{i+1} - zeta_i``.

    Returns the quantities that drive the noise bias and variance of the
    spectral estimators, expressed through the central moments of a single
    noise draw ``zeta`` with standard deviation ``noise_std``:

    ======================  =============================================
    key                     value
    ======================  =============================================
    ``eps2``                ``E[eps^2] = 2 E[z^2]``
    ``eps4``                ``E[eps^4] = 2 E[z^4] + 6 E[z^2]^2``
    ``eps2_eps_next``       ``E[eps_i^2 eps_{i+1}] = -E[z^3]``
    ``eps2_eps_prev``       ``E[eps_i^2 eps_{i-1}] = +E[z^3]``
    ``eps2_eps2_adjacent``  ``E[eps_i^2 eps_j^2], |i-j| = 1``
    ``eps2_eps2_distant``   ``E[eps_i^2 eps_j^2], |i-j| > 1``
    ======================  =============================================

    The underlying ``zeta`` central moments are included under ``zeta2``,
    ``zeta3``, ``zeta4`` for convenience.
    """
    if noise_std < 0:
        raise InvalidInputError("noise_std must be nonnegative")
    v = float(noise_std) ** 2
    if cfg.kind == "gaussian" or not cfg.active or noise_std == 0.0:
        m3 = 0.0
        m4 = 3.0 * v * v
    elif cfg.kind == "shifted_exponential":
        s = float(noise_std)
        m3 = cfg.skew_sign * 2.0 * s ** 3
        m4 = 9.0 * v * v
    else:  # pragma: no cover - NoiseConfig already validates
        raise InvalidInputError(f"unknown noise kind {cfg.kind!r}")
    if noise_std == 0.0:
        m3, m4 = 0.0, 0.0
        v = 0.0
    return {
        "zeta2": v,
        "zeta3": m3,
        "zeta4": m4,
        "eps2": 2.0 * v,
        "eps4": 2.0 * m4 + 6.0 * v * v,
        "eps2_eps_next": -m3,
        "eps2_eps_prev": m3,
        "eps2_eps2_adjacent": m4 + 3.0 * v * v,
        "eps2_eps2_distant": 4.0 * v * v,
    }


def _finalize_day(model: str, params, grid: SimGrid, seed: int,
                  day_index: int, logp: np.ndarray, sig2: np.ndarray,
                  eta: float, nu: float,
                  noise_cfg: NoiseConfig | None, noise_raw: np.ndarray | None,
                  rho_path: np.ndarray | None) -> SimOutput:
    """Assemble a SimOutput from recorded paths of one day.

    Integrated variance is the left-Riemann sum of the recorded variance
    path; integrated vol-of-vol follows from it since the vol-of-vol
    process is ``nu * sigma`` in both models.  The integrated leverage is
    computed by the caller (for the constant-correlation model it is
    ``rho * nu * iv`` by construction, and that identity is preserved to
    the last bit on purpose).
    """
    dt = grid.dt
    times = grid.timestamps()
    iv = float(np.sum(sig2[:-1]) * dt)
    ivv = nu * nu * iv
    denom = iv * ivv
    rt = eta / math.sqrt(denom) if denom > 0 else math.nan

    clean = TickSeries(times, logp, grid.horizon)
    noisy = clean
    noise_std = 0.0
    noise_meta = None
    if noise_cfg is not None:
        noise_meta = dataclasses.asdict(noise_cfg)
        if noise_cfg.active:
            noise_std = noise_cfg.ratio * _returns_std(logp)
            if noise_std > 0.0:
                noisy = clean.with_log_prices(logp + noise_std * noise_raw)
    return SimOutput(
        model=model,
        params=dataclasses.asdict(params),
        n_steps=grid.n_steps,
        horizon=grid.horizon,
        seed=seed,
        day_index=day_index,
        series_clean=clean,
        series_noisy=noisy,
        sigma2=sig2,
        true_iv=iv,
        true_ivv=ivv,
        true_eta=eta,
        true_rt=rt,
        noise=noise_meta,
        noise_std=noise_std,
        rho_path=rho_path,
    )


def simulate_heston_batch(params: HestonParams, grid: SimGrid, seed: int,
                          day_indices, noise: NoiseConfig | None = None
                          ) -> list[SimOutput]:
    """Simulate several days at once, one independent stream per day.

    The Euler recursion is vectorized across days, which is what makes the
    Monte Carlo harness cheap without any compiled extension: the time loop
    runs once and every operation inside it touches a (days,) vector.
    """
    days = [int(k) for k in day_indices]
    B = len(days)
    if B == 0:
        return []
    n, dt = grid.n_steps, grid.dt
    sqdt = math.sqrt(dt)
    rngs = [day_rng(seed, k) for k in days]
    shocks = np.stack([r.standard_normal((2, n)) for r in rngs])
    z1 = shocks[:, 0, :]
    z2 = shocks[:, 1, :]
    noise_raw = None
    if noise is not None and noise.active:
        noise_raw = np.stack([_noise_from_rng(r, noise, n + 1) for r in rngs])

    rho = params.rho
    mix = math.sqrt(max(0.0, 1.0 - rho * rho))
    logp = np.empty((B, n + 1))
    sig2 = np.empty((B, n + 1))
    logp[:, 0] = params.p0
    x = np.full(B, float(params.v0))
    sig2[:, 0] = np.maximum(x, 0.0)
    p = logp[:, 0].copy()
    for k in range(n):
        sp = np.maximum(x, 0.0)
        sq = np.sqrt(sp)
        p = p + sq * sqdt * z1[:, k]
        logp[:, k + 1] = p
        vol_shock = rho * z1[:, k] + mix * z2[:, k]
        x = x + params.alpha * (params.beta - sp) * dt \
            + params.nu * sq * sqdt * vol_shock
        sig2[:, k + 1] = np.maximum(x, 0.0)

    out = []
    for b, k in enumerate(days):
        iv = float(np.sum(sig2[b, :-1]) * dt)
        eta = rho * params.nu * iv
        raw = noise_raw[b] if noise_raw is not None else None
        out.append(_finalize_day("heston", params, grid, seed, k, logp[b],
                                 sig2[b], eta, params.nu, noise, raw, None))
    return out


def simulate_heston(params: HestonParams, grid: SimGrid, seed: int,
                    day_index: int = 0,
                    noise: NoiseConfig | None = None) -> SimOutput:
    """Single day of the constant-correlation model; see the batch variant."""
    return simulate_heston_batch(params, grid, seed, [day_index], noise)[0]


def simulate_gen_heston_batch(params: GenHestonParams, grid: SimGrid,
                              seed: int, day_indices,
                              noise: NoiseConfig | None = None
                              ) -> list[SimOutput]:
    """Batched simulation of the stochastic-correlation model.

    Per step, in this order: the price uses the current correlation to mix
    the shared shock ``W1`` with the orthogonal one, the variance is
    updated from ``W1``, and the correlation takes its own Jacobi step and
    is clamped a hair inside (-1, 1).
    """
    days = [int(k) for k in day_indices]
    B = len(days)
    if B == 0:
        return []
    n, dt = grid.n_steps, grid.dt
    sqdt = math.sqrt(dt)
    rngs = [day_rng(seed, k) for k in days]
    shocks = np.stack([r.standard_normal((3, n)) for r in rngs])
    z0 = shocks[:, 0, :]   # drives the correlation
    z1 = shocks[:, 1, :]   # shared price/variance shock
    z2 = shocks[:, 2, :]   # orthogonal price shock
    noise_raw = None
    if noise is not None and noise.active:
        noise_raw = np.stack([_noise_from_rng(r, noise, n + 1) for r in rngs])

    drift_const = 2.0 * params.xi - params.eta_mr
    logp = np.empty((B, n + 1))
    sig2 = np.empty((B, n + 1))
    rho = np.empty((B, n + 1))
    logp[:, 0] = params.p0
    x = np.full(B, float(params.v0))
    sig2[:, 0] = np.maximum(x, 0.0)
    r = np.full(B, float(np.clip(params.rho0, -_RHO_CLAMP, _RHO_CLAMP)))
    rho[:, 0] = r
    p = logp[:, 0].copy()
    for k in range(n):
        sp = np.maximum(x, 0.0)
        sq = np.sqrt(sp)
        price_shock = r * z1[:, k] + np.sqrt(1.0 - r * r) * z2[:, k]
        p = p + sq * sqdt * price_shock
        logp[:, k + 1] = p
        x = x + params.alpha * (params.beta - sp) * dt \
            + params.nu * sq * sqdt * z1[:, k]
        sig2[:, k + 1] = np.maximum(x, 0.0)
        r = r + (drift_const - params.eta_mr * r) * dt \
            + params.theta * np.sqrt((1.0 + r) * (1.0 - r)) * sqdt * z0[:, k]
        np.clip(r, -_RHO_CLAMP, _RHO_CLAMP, out=r)
        rho[:, k + 1] = r

    out = []
    for b, k in enumerate(days):
        eta = float(np.sum(params.nu * rho[b, :-1] * sig2[b, :-1]) * dt)
        raw = noise_raw[b] if noise_raw is not None else None
        out.append(_finalize_day("gen_heston", params, grid, seed, k,
                                 logp[b], sig2[b], eta, params.nu,
                                 noise, raw, rho[b]))
    return out


def simulate_gen_heston(params: GenHestonParams, grid: SimGrid, seed: int,
                        day_index: int = 0,
                        noise: NoiseConfig | None = None) -> SimOutput:
    """Single day of the stochastic-correlation model."""
    return simulate_gen_heston_batch(params, grid, seed, [day_index], noise)[0]
