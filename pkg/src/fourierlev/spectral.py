"""Fourier coefficients of log-price increments and kernels on [0, T].

Everything downstream (volatility reconstruction, leverage and vol-of-vol
estimators, the bias-correction machinery) is built from two ingredients
computed here:

* discrete Fourier coefficients of the return measure,
  ``c(s) = (1/T) * sum_i exp(-i s (2pi/T) t_i) * delta_i``,
  where ``delta_i`` is the log-price increment over ``[t_i, t_{i+1})``;
* their self-convolution, which estimates the Fourier coefficients of the
  spot variance path.

Coefficients are returned as dense complex arrays indexed from ``-S`` to
``S`` (entry ``k`` holds frequency ``k - S``).  For equidistant grids the
computation collapses to a single FFT because the complex exponential at
integer frequency ``s`` evaluated on the grid ``t_i = i T / n`` equals the
DFT kernel at bin ``s mod n`` exactly, aliasing included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "TickSeries",
    "SpectralCoefficients",
    "dedup_last_tick",
    "dirichlet",
    "dirichlet_derivative",
    "return_coefficients",
    "squared_return_coefficients",
    "volatility_coefficients",
    "integration_by_parts_check",
]

# Below this, |sin(pi t / T)| is treated as a lattice point of the kernel.
_SING_TOL = 1e-14

# Relative slack when deciding whether a grid is equidistant enough for the
# FFT fast path.  Floating-point grids built as i*T/n wobble at the ulp
# level, which is many orders of magnitude below this.
_GRID_RTOL = 1e-9


@dataclass(eq=False)
class TickSeries:
    """An irregular time series of log prices on a window ``[0, horizon]``.

    Parameters
    ----------
    timestamps : array_like
        Observation times, strictly increasing, in ``[0, horizon]``.  Units
        are whatever the caller works in (model time for simulations,
        seconds since the session open for market data); they only need to
        be consistent with ``horizon``.
    log_prices : array_like
        Log prices at those times.  Same length as ``timestamps``.
    horizon : float
        Length ``T`` of the window the Fourier basis lives on.

    Notes
    -----
    Ties in the timestamps are rejected here; loaders are expected to apply
    :func:`dedup_last_tick` first.  With ``k + 1`` observations the series
    carries ``k`` increments, available as :attr:`increments`.
    """

    timestamps: np.ndarray
    log_prices: np.ndarray
    horizon: float

    def __post_init__(self) -> None:
        t = np.asarray(self.timestamps, dtype=float)
        p = np.asarray(self.log_prices, dtype=float)
        if t.ndim != 1 or p.ndim != 1:
            raise InvalidInputError("timestamps and log_prices must be 1-d")
        if t.shape != p.shape:
            raise InvalidInputError(
                f"length mismatch: {t.size} timestamps vs {p.size} log prices"
            )
        if t.size < 2:
            raise InvalidInputError("need at least two observations")
        if not (np.isfinite(t).all() and np.isfinite(p).all()):
            raise InvalidInputError("timestamps and log_prices must be finite")
        horizon = float(self.horizon)
        if not math.isfinite(horizon) or horizon <= 0.0:
            raise InvalidInputError(f"horizon must be positive, got {horizon}")
        dt = np.diff(t)
        if (dt <= 0.0).any():
            raise InvalidInputError(
                "timestamps must be strictly increasing; collapse ties with "
                "dedup_last_tick before constructing a TickSeries"
            )
        slack = _GRID_RTOL * horizon
        if t[0] < -slack or t[-1] > horizon * (1.0 + _GRID_RTOL):
            raise InvalidInputError(
                f"timestamps [{t[0]}, {t[-1]}] fall outside [0, {horizon}]"
            )
        self.timestamps = t
        self.log_prices = p
        self.horizon = horizon
        self._increments: np.ndarray | None = None

    @property
    def n(self) -> int:
        """Number of increments (one less than the observation count)."""
        return self.timestamps.size - 1

    @property
    def increments(self) -> np.ndarray:
        if self._increments is None:
            self._increments = np.diff(self.log_prices)
        return self._increments

    def is_equidistant(self) -> bool:
        """True when ``t_i = i * horizon / n`` up to relative slack.

        This is the condition under which coefficient computation can use
        the FFT fast path; a regular grid that does not start at zero or
        does not span the full window fails it on purpose.
        """
        n = self.n
        h = self.horizon / n
        ideal = np.arange(n + 1) * h
        return bool(np.abs(self.timestamps - ideal).max() <= _GRID_RTOL * h)

    def with_log_prices(self, log_prices: np.ndarray) -> "TickSeries":
        """Copy of this series with the same grid and new log prices."""
        return TickSeries(self.timestamps, np.asarray(log_prices, dtype=float),
                          self.horizon)


def dedup_last_tick(timestamps: np.ndarray, values: np.ndarray):
    """Collapse runs of equal timestamps, keeping the last value of each run.

    Inputs must already be sorted by timestamp (stable sort upstream, so
    the record seen last in the file wins).  Returns the filtered pair
    ``(timestamps, values)`` plus the number of rows dropped.
    """
    t = np.asarray(timestamps, dtype=float)
    v = np.asarray(values)
    if t.size != v.size:
        raise InvalidInputError("timestamps and values must have equal length")
    if t.size == 0:
        return t, v, 0
    if (np.diff(t) < 0).any():
        raise InvalidInputError("dedup_last_tick expects sorted timestamps")
    keep = np.ones(t.size, dtype=bool)
    keep[:-1] = t[1:] != t[:-1]
    return t[keep], v[keep], int(t.size - keep.sum())


def dirichlet(order: int, t, horizon: float):
    """Rescaled Dirichlet kernel ``D_N(t)`` of the Fourier basis on [0, T].

    ``D_N(t) = sin((2N+1) pi t / T) / ((2N+1) sin(pi t / T))``, extended by
    its limit value 1 at multiples of ``T``.  ``D_0`` is identically 1.
    Accepts scalar or array ``t`` and follows numpy broadcasting.
    """
    if order < 0:
        raise InvalidInputError(f"kernel order must be >= 0, got {order}")
    if horizon <= 0.0:
        raise InvalidInputError("horizon must be positive")
    t_arr = np.asarray(t, dtype=float)
    q = 2 * order + 1
    x = np.pi * t_arr / horizon
    s = np.sin(x)
    singular = np.abs(s) < _SING_TOL
    denom = np.where(singular, 1.0, s)
    out = np.sin(q * x) / (q * denom)
    out = np.where(singular, 1.0, out)
    return out if out.ndim else float(out)


def dirichlet_derivative(order: int, t, horizon: float):
    """Derivative ``D'_N(t)`` of the rescaled Dirichlet kernel.

    Closed form, with ``q = 2N + 1`` and ``x = pi t / T``::

        D'_N(t) = (pi / T) * (q cos(q x) sin(x) - sin(q x) cos(x))
                  / (q sin(x)^2)

    At lattice points ``t = k T`` both numerator and denominator vanish;
    the limit is 0 (the kernel is even around each lattice point), and
    that value is substituted explicitly.  ``D'_0`` is identically 0.
    """
    if order < 0:
        raise InvalidInputError(f"kernel order must be >= 0, got {order}")
    if horizon <= 0.0:
        raise InvalidInputError("horizon must be positive")
    t_arr = np.asarray(t, dtype=float)
    q = 2 * order + 1
    x = np.pi * t_arr / horizon
    s = np.sin(x)
    singular = np.abs(s) < _SING_TOL
    denom = np.where(singular, 1.0, q * s * s)
    num = q * np.cos(q * x) * s - np.sin(q * x) * np.cos(x)
    out = (np.pi / horizon) * num / denom
    out = np.where(singular, 0.0, out)
    return out if out.ndim else float(out)


def _coefficients_of_weights(times: np.ndarray, weights: np.ndarray,
                             horizon: float, max_freq: int,
                             equidistant: bool) -> np.ndarray:
    """Dense array of ``(1/T) sum_i exp(-i s w t_i) weights_i``, |s| <= S.

    ``times`` are the left endpoints of the increments.  The weights are
    real, so only nonnegative frequencies are evaluated and the rest filled
    by conjugate symmetry.
    """
    n = times.size
    S = max_freq
    out = np.empty(2 * S + 1, dtype=complex)
    if equidistant:
        # t_i = i T / n makes exp(-i s 2pi t_i / T) the DFT kernel at bin
        # s mod n, so every frequency (aliased ones included) comes from
        # one FFT of the weights.
        spec = np.fft.fft(weights)
        idx = np.mod(np.arange(-S, S + 1), n)
        out[:] = spec[idx] / horizon
        return out
    # Irregular grid: march e^{-i s theta_i} up in s.  Unit-modulus factors
    # keep the recursion stable; drift is of order S * eps.
    phase = np.exp(-2j * np.pi * times / horizon)
    cur = np.ones(n, dtype=complex)
    out[S] = weights.sum() / horizon
    for s in range(1, S + 1):
        cur = cur * phase
        val = np.dot(cur, weights) / horizon
        out[S + s] = val
        out[S - s] = val.conjugate()
    return out


def return_coefficients(series: TickSeries, max_freq: int) -> np.ndarray:
    """Fourier coefficients of the return measure up to ``|s| = max_freq``.

    Returns a complex array of length ``2 * max_freq + 1``; entry ``k``
    holds frequency ``k - max_freq``.  Frequency 0 is the net return over
    the window divided by ``T``.
    """
    if max_freq < 0:
        raise InvalidInputError(f"max_freq must be >= 0, got {max_freq}")
    return _coefficients_of_weights(series.timestamps[:-1], series.increments,
                                    series.horizon, max_freq,
                                    series.is_equidistant())


def squared_return_coefficients(series: TickSeries, max_freq: int) -> np.ndarray:
    """Fourier coefficients of the squared-return measure.

    Same layout as :func:`return_coefficients` with weights
    ``delta_i**2``.  Frequency 0 times ``T`` is the realized variance.
    """
    if max_freq < 0:
        raise InvalidInputError(f"max_freq must be >= 0, got {max_freq}")
    return _coefficients_of_weights(series.timestamps[:-1],
                                    series.increments ** 2,
                                    series.horizon, max_freq,
                                    series.is_equidistant())


def volatility_coefficients(return_coeffs: np.ndarray, cut_m: int,
                            max_l: int, horizon: float) -> np.ndarray:
    """Estimated Fourier coefficients of spot variance via self-convolution.

    ``c(l; var) = T / (2M + 1) * sum_{|s| <= M} c(s) c(l - s)`` for
    ``|l| <= max_l``.  The input array must cover frequencies out to
    ``cut_m + max_l``, otherwise the convolution window would run off the
    end and the estimate would be silently truncated; that case raises.

    Returns a dense array of length ``2 * max_l + 1`` (entry ``k`` holds
    frequency ``k - max_l``).  Negative frequencies come from conjugate
    symmetry, which the self-convolution of a real measure's coefficients
    preserves.
    """
    rc = np.asarray(return_coeffs)
    if rc.ndim != 1 or rc.size % 2 == 0:
        raise InvalidInputError("return_coeffs must be a dense odd-length array")
    if cut_m < 0 or max_l < 0:
        raise InvalidInputError("cut_m and max_l must be >= 0")
    have = (rc.size - 1) // 2
    need = cut_m + max_l
    if have < need:
        raise InvalidInputError(
            f"return coefficients cover |s| <= {have} but the convolution "
            f"needs |s| <= {need} (cut_m={cut_m}, max_l={max_l})"
        )
    off = have
    base = rc[off - cut_m: off + cut_m + 1]
    out = np.empty(2 * max_l + 1, dtype=complex)
    scale = horizon / (2 * cut_m + 1)
    for l in range(max_l + 1):
        # c(l - s) for s = -M..M is the slice [l-M, l+M] read backwards.
        window = rc[off + l - cut_m: off + l + cut_m + 1][::-1]
        val = scale * np.dot(base, window)
        out[max_l + l] = val
        out[max_l - l] = val.conjugate()
    return out


@dataclass
class SpectralCoefficients:
    """Bundle of return and variance coefficients for one series.

    Mostly a convenience for interactive work and tests; the estimators
    operate on the raw arrays.  ``ret(s)`` and ``vol(l)`` index by signed
    frequency.
    """

    horizon: float
    return_coeffs: np.ndarray
    vol_coeffs: np.ndarray | None = None
    cut_m: int | None = None
    _roff: int = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._roff = (self.return_coeffs.size - 1) // 2

    @classmethod
    def from_series(cls, series: TickSeries, max_freq: int,
                    cut_m: int | None = None,
                    max_l: int = 0) -> "SpectralCoefficients":
        rc = return_coefficients(series, max_freq)
        vc = None
        if cut_m is not None:
            vc = volatility_coefficients(rc, cut_m, max_l, series.horizon)
        return cls(series.horizon, rc, vc, cut_m)

    def ret(self, s: int) -> complex:
        if abs(s) > self._roff:
            raise InvalidInputError(f"frequency {s} outside |s| <= {self._roff}")
        return complex(self.return_coeffs[self._roff + s])

    def vol(self, l: int) -> complex:
        if self.vol_coeffs is None:
            raise InvalidInputError("variance coefficients were not computed")
        voff = (self.vol_coeffs.size - 1) // 2
        if abs(l) > voff:
            raise InvalidInputError(f"frequency {l} outside |l| <= {voff}")
        return complex(self.vol_coeffs[voff + l])


def integration_by_parts_check(timestamps: np.ndarray, values: np.ndarray,
                               horizon: float, freq: int) -> float:
    """Residual of the discrete integration-by-parts identity at one frequency.

    For a path ``v`` observed on a grid, compares the Riemann-Stieltjes
    coefficient of ``dv`` against the boundary term plus ``i s (2pi/T)``
    times the Riemann coefficient of ``v``:

        (1/T) sum e^{-i s w t_i} (v_{i+1} - v_i)
            vs
        (v_n - v_0)/T + i s (2pi/T) (1/T) sum e^{-i s w t_i} v_i dt_i

    The two agree exactly in the continuum; on a grid the gap is O(dt).
    Returns the absolute residual, used by tests as a sanity check that the
    coefficient conventions are mutually consistent.
    """
    t = np.asarray(timestamps, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1 or t.size < 2:
        raise InvalidInputError("need matching 1-d arrays with >= 2 points")
    if horizon <= 0.0:
        raise InvalidInputError("horizon must be positive")
    w = 2.0 * np.pi * freq / horizon
    phases = np.exp(-1j * w * t[:-1])
    lhs = np.dot(phases, np.diff(v)) / horizon
    boundary = (v[-1] - v[0]) / horizon
    riemann = np.dot(phases, v[:-1] * np.diff(t)) / horizon
    rhs = boundary + 1j * w * riemann
    return float(abs(lhs - rhs))
