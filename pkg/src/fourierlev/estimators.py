"""Spectral estimators of integrated leverage, variance and vol-of-vol.

The leverage estimator pairs the reconstructed Fourier coefficients of
spot variance with the return coefficients:

    eta_hat = T^2 / (2N+1) * sum_{|l| <= N} i l (2pi/T)
              * c_vol(l; M) * c_ret(-l)

where ``M`` controls the variance reconstruction and ``N`` the outer
leverage cut.  Expanding the coefficients shows this is exactly the
kernel-weighted triple sum over return increments

    sum_{i,j,k} D_M(t_i - t_j) D'_N(t_k - t_j) delta_i delta_j delta_k

which :func:`fel_triple_sum` evaluates directly for validation at small n.

Under market microstructure noise the dominant finite-sample bias of the
triple sum lives on the index sheets where two of the three increments
coincide.  :func:`upsilon` evaluates the triple sum restricted to fully
distinct indices by inclusion-exclusion, entirely in the frequency domain,
and :func:`fel_corrected` uses it as a control variate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateValueError, InvalidInputError
from .spectral import (
    TickSeries,
    dirichlet,
    dirichlet_derivative,
    return_coefficients,
    squared_return_coefficients,
    volatility_coefficients,
)

__all__ = [
    "CutFrequencies",
    "LeverageEstimate",
    "RTEstimate",
    "fel_spectral",
    "fel_triple_sum",
    "fev",
    "fev_grid",
    "fevv",
    "fevv_grid",
    "upsilon",
    "leverage_grid",
    "optimal_b",
    "fel_corrected",
    "noise_bias_analytic",
    "rt_estimate",
]

# Relative ceiling on the imaginary part left over after summing a
# spectral series that should be real.  Anything larger points at a bug or
# catastrophic cancellation, not roundoff.
_IMAG_REL_TOL = 1e-8

_TRIPLE_SUM_CAP = 500


@dataclass(frozen=True)
class CutFrequencies:
    """Cutting frequencies of the two nested spectral sums.

    ``m`` caps the variance-reconstruction convolution, ``n`` the outer
    leverage (or vol-of-vol) sum.  ``n_obs``, when set, records the number
    of return observations (increments) the pair was chosen for, and
    estimators check it against the series they are handed.
    """

    m: int
    n: int
    n_obs: int | None = None

    def __post_init__(self) -> None:
        if self.m < 1:
            raise InvalidInputError(f"cut m must be >= 1, got {self.m}")
        if self.n < 1:
            raise InvalidInputError(f"cut n must be >= 1, got {self.n}")
        if self.n_obs is not None and self.n_obs < 2:
            raise InvalidInputError("n_obs must be >= 2 when given")

    def check_series(self, series: TickSeries) -> None:
        if self.n_obs is not None and self.n_obs != series.n:
            raise InvalidInputError(
                f"cuts were chosen for {self.n_obs} increments but the "
                f"series has {series.n}"
            )


@dataclass(frozen=True)
class LeverageEstimate:
    """Integrated leverage estimate with its numerical health record."""

    value: float
    form: str
    cut: CutFrequencies
    imag_residual: float


@dataclass(frozen=True)
class RTEstimate:
    """Leverage ratio estimate and the pieces it was assembled from."""

    value: float
    numerator: float
    iv: float
    ivv: float
    corrected: bool
    cut_lev: CutFrequencies
    m_iv: int
    cut_ivv: CutFrequencies
    b: float | None = None
    upsilon_star: float | None = None


def _take_real(value: complex, label: str) -> tuple[float, float]:
    """Real part of a spectral sum, enforcing the imaginary-residual bound."""
    real = float(value.real)
    resid = float(abs(value.imag))
    if resid >= _IMAG_REL_TOL * max(1.0, abs(real)):
        raise DegenerateValueError(
            f"{label}: imaginary residual {resid:.3e} too large for value "
            f"{real:.6e}"
        )
    return real, resid


def _fel_complex(rc: np.ndarray, vol: np.ndarray, cut_n: int,
                 horizon: float) -> complex:
    """Complex spectral leverage sum from dense coefficient arrays.

    ``rc`` must cover at least ``|s| <= cut_n``; ``vol`` must be the dense
    variance-coefficient array covering at least ``|l| <= cut_n``.
    """
    roff = (rc.size - 1) // 2
    voff = (vol.size - 1) // 2
    ls = np.arange(-cut_n, cut_n + 1)
    rc_neg = rc[roff - cut_n: roff + cut_n + 1][::-1]
    vol_slice = vol[voff - cut_n: voff + cut_n + 1]
    omega = 2.0 * np.pi / horizon
    s = np.sum(1j * ls * omega * vol_slice * rc_neg)
    return complex(s * horizon * horizon / (2 * cut_n + 1))


def fel_spectral(series: TickSeries, cut: CutFrequencies) -> LeverageEstimate:
    """Fourier estimator of integrated leverage, spectral form.

    Needs at least three increments; the triple-sum representation is
    empty below that and the estimator is not defined.
    """
    if series.n < 3:
        raise InvalidInputError(
            f"leverage estimation needs >= 3 increments, got {series.n}"
        )
    cut.check_series(series)
    rc = return_coefficients(series, cut.m + cut.n)
    vol = volatility_coefficients(rc, cut.m, cut.n, series.horizon)
    value, resid = _take_real(
        _fel_complex(rc, vol, cut.n, series.horizon), "fel_spectral"
    )
    return LeverageEstimate(value, "spectral", cut, resid)


def fel_triple_sum(series: TickSeries, cut: CutFrequencies,
                   cap: int = _TRIPLE_SUM_CAP) -> LeverageEstimate:
    """Kernel-space form of the leverage estimator, O(n^2) memory.

    Mathematically identical to :func:`fel_spectral`; exists so tests can
    cross-check the spectral bookkeeping.  Refuses series longer than
    ``cap`` increments since the kernel matrices grow quadratically.
    """
    n = series.n
    if n < 3:
        raise InvalidInputError(
            f"leverage estimation needs >= 3 increments, got {n}"
        )
    if n > cap:
        raise InvalidInputError(
            f"triple-sum form is for validation at small n (cap {cap}), "
            f"got n={n}; use fel_spectral"
        )
    cut.check_series(series)
    t = series.timestamps[:-1]
    d = series.increments
    T = series.horizon
    diffs = t[:, None] - t[None, :]
    ker_m = dirichlet(cut.m, diffs, T)               # D_M(t_i - t_j)
    ker_dn = dirichlet_derivative(cut.n, diffs, T)   # D'_N(t_k - t_j), rows k
    left = ker_m.T @ d      # sum over i, indexed by j
    right = ker_dn.T @ d    # sum over k, indexed by j
    value = float(np.dot(d * left, right))
    return LeverageEstimate(value, "triple_sum", cut, 0.0)


def fev(series: TickSeries, cut_m: int) -> float:
    """Fourier estimator of integrated variance.

    ``T^2 / (2M+1) * sum_{|s| <= M} |c_ret(s)|^2``.  On an equidistant
    grid with an odd number of increments, the Nyquist cut
    ``M = (n-1)/2`` makes this the realized variance exactly (Parseval);
    for even n the match at ``floor((n-1)/2)`` is close but not exact.
    """
    if cut_m < 0:
        raise InvalidInputError(f"cut_m must be >= 0, got {cut_m}")
    rc = return_coefficients(series, cut_m)
    power = np.abs(rc) ** 2
    T = series.horizon
    return float(T * T * power.sum() / (2 * cut_m + 1))


def fev_grid(series: TickSeries, m_values) -> np.ndarray:
    """Integrated-variance estimates over a grid of cuts, shared FFT.

    Equivalent to ``[fev(series, m) for m in m_values]`` but computes the
    return coefficients once and reuses cumulative sums of their power.
    """
    ms = np.asarray(list(m_values), dtype=int)
    if ms.size == 0:
        return np.empty(0)
    if (ms < 0).any():
        raise InvalidInputError("all cuts must be >= 0")
    top = int(ms.max())
    rc = return_coefficients(series, top)
    power = np.abs(rc) ** 2
    pos = power[top:]
    cums = np.concatenate(([pos[0]], pos[0] + 2.0 * np.cumsum(pos[1:])))
    T = series.horizon
    return T * T * cums[ms] / (2 * ms + 1)


def fevv(series: TickSeries, cut: CutFrequencies) -> float:
    """Fourier estimator of integrated vol-of-vol (Bartlett-weighted).

    ``T^2 / (2N+1) * sum_{|l| <= N} (1 - |l|/N) l^2 (2pi/T)^2
    |c_vol(l; M)|^2``.  Nonnegative by construction.  With ``N = 1`` the
    Bartlett weight annihilates every term and the estimate is exactly 0,
    so meaningful cuts start at ``N = 2``.
    """
    cut.check_series(series)
    rc = return_coefficients(series, cut.m + cut.n)
    vol = volatility_coefficients(rc, cut.m, cut.n, series.horizon)
    N = cut.n
    ls = np.arange(-N, N + 1)
    omega = 2.0 * np.pi / series.horizon
    weights = (1.0 - np.abs(ls) / N) * (ls * omega) ** 2
    T = series.horizon
    val = T * T * np.sum(weights * np.abs(vol) ** 2) / (2 * N + 1)
    return float(val)


def fevv_grid(series: TickSeries, m_values, n_values) -> np.ndarray:
    """Vol-of-vol estimates over a cut grid; rows index m, columns n."""
    ms = [int(m) for m in m_values]
    ns = [int(n) for n in n_values]
    if not ms or not ns:
        return np.empty((len(ms), len(ns)))
    max_n = max(ns)
    rc = return_coefficients(series, max(ms) + max_n)
    T = series.horizon
    omega = 2.0 * np.pi / T
    out = np.empty((len(ms), len(ns)))
    for i, m in enumerate(ms):
        vol = volatility_coefficients(rc, m, max_n, T)
        for j, n in enumerate(ns):
            ls = np.arange(-n, n + 1)
            weights = (1.0 - np.abs(ls) / n) * (ls * omega) ** 2
            sl = vol[max_n - n: max_n + n + 1]
            out[i, j] = T * T * np.sum(weights * np.abs(sl) ** 2) / (2 * n + 1)
    return out


def _sheet_a(big_r: np.ndarray, big_q: np.ndarray, cut_n: int,
             omega: float) -> complex:
    """Spectral value of the i = j sheet of the leverage triple sum."""
    off = (big_r.size - 1) // 2
    ls = np.arange(-cut_n, cut_n + 1)
    r_neg = big_r[off - cut_n: off + cut_n + 1][::-1]
    q_pos = big_q[off - cut_n: off + cut_n + 1]
    return complex(np.sum(1j * ls * omega * r_neg * q_pos) / (2 * cut_n + 1))


def _sheet_b(big_r: np.ndarray, big_q: np.ndarray, cut_m: int, cut_n: int,
             omega: float) -> complex:
    """Spectral value of the i = k sheet of the leverage triple sum.

    The double frequency sum collapses to one sum over ``u = l - s`` with
    the integer weight ``W(u) = sum of l over the window [max(-N, u-M),
    min(N, u+M)]``; that window is where the product kernel
    ``D_M D'_N`` has spectral mass.
    """
    off = (big_r.size - 1) // 2
    span = cut_m + cut_n
    u = np.arange(-span, span + 1)
    lo = np.maximum(-cut_n, u - cut_m)
    hi = np.minimum(cut_n, u + cut_m)
    w = (hi * (hi + 1) - (lo - 1) * lo) / 2.0
    r_pos = big_r[off - span: off + span + 1]
    q_neg = big_q[off - span: off + span + 1][::-1]
    total = np.sum(1j * w * omega * q_neg * r_pos)
    return complex(total / ((2 * cut_m + 1) * (2 * cut_n + 1)))


def upsilon(series: TickSeries, cut: CutFrequencies) -> float:
    """Leverage triple sum restricted to fully distinct indices.

    Computed by inclusion-exclusion in the frequency domain: the full sum
    minus its i = j and i = k sheets (the j = k sheet carries
    ``D'_N(0) = 0`` and vanishes, as does the triple diagonal).  The cost
    is O(n (M + N)) instead of the O(n^3) of the defining sum.

    Under pure noise its expectation is zero, which is what makes it a
    usable control variate for the leverage estimator.  For fewer than
    three increments there are no distinct triples; returns 0 with a
    warning.
    """
    if series.n < 3:
        warnings.warn(
            "upsilon needs >= 3 increments for any distinct triple; "
            "returning 0",
            RuntimeWarning,
            stacklevel=2,
        )
        return 0.0
    cut.check_series(series)
    T = series.horizon
    omega = 2.0 * np.pi / T
    span = cut.m + cut.n
    rc = return_coefficients(series, span)
    qc = squared_return_coefficients(series, span)
    big_r = T * rc
    big_q = T * qc
    vol = volatility_coefficients(rc, cut.m, cut.n, T)
    full = _fel_complex(rc, vol, cut.n, T)
    val = full - _sheet_a(big_r, big_q, cut.n, omega) \
        - _sheet_b(big_r, big_q, cut.m, cut.n, omega)
    real, _ = _take_real(val, "upsilon")
    return real


def leverage_grid(series: TickSeries, m_values, n_values
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Leverage estimate and distinct-index sum over a whole cut grid.

    Returns ``(eta, ups)``, both shaped ``(len(m_values), len(n_values))``.
    The return and squared-return coefficients are computed once at the
    largest span, so tuning over a grid costs little more than a single
    estimate.  This is the fast path the Monte Carlo harness and the
    empirical pipeline are built on.
    """
    ms = [int(m) for m in m_values]
    ns = [int(n) for n in n_values]
    if any(m < 1 for m in ms) or any(n < 1 for n in ns):
        raise InvalidInputError("all cuts must be >= 1")
    if series.n < 3:
        raise InvalidInputError(
            f"leverage estimation needs >= 3 increments, got {series.n}"
        )
    T = series.horizon
    omega = 2.0 * np.pi / T
    max_n = max(ns, default=0)
    span = max(ms, default=0) + max_n
    rc = return_coefficients(series, span)
    qc = squared_return_coefficients(series, span)
    big_r = T * rc
    big_q = T * qc
    a_sheets = {n: _sheet_a(big_r, big_q, n, omega) for n in set(ns)}
    eta = np.empty((len(ms), len(ns)))
    ups = np.empty((len(ms), len(ns)))
    for i, m in enumerate(ms):
        vol = volatility_coefficients(rc, m, max_n, T)
        for j, n in enumerate(ns):
            full = _fel_complex(rc, vol, n, T)
            eta[i, j], _ = _take_real(full, f"leverage_grid cell ({m},{n})")
            corr = full - a_sheets[n] - _sheet_b(big_r, big_q, m, n, omega)
            ups[i, j], _ = _take_real(corr, f"upsilon cell ({m},{n})")
    return eta, ups


def optimal_b(cov: float, var: float) -> float:
    """Optimal control-variate loading ``cov / var``."""
    if not math.isfinite(var) or var <= 0.0:
        raise InvalidInputError(
            f"control variate variance must be positive, got {var}"
        )
    return float(cov) / float(var)


def fel_corrected(eta_tilde, upsilon_star, b):
    """Variance-corrected leverage estimate ``eta - b * upsilon``.

    Plain arithmetic with numpy broadcasting, so it applies equally to a
    single day and to a replication-by-grid matrix.
    """
    return np.subtract(eta_tilde, np.multiply(b, upsilon_star))


def noise_bias_analytic(n, cut: CutFrequencies, zeta3: float,
                        horizon: float | None = None) -> float:
    """Expected value of the leverage estimator under pure i.i.d. noise.

    On an equidistant grid of ``n`` increments, with observation noise
    whose third central moment is ``zeta3``:

        bias = 2 (n - 1) (D_M(T/n) - 1) D'_N(T/n) E[zeta^3]

    Only the third moment survives: every other term in the noise
    expectation of the triple sum either carries ``D'_N(0) = 0`` or pairs
    terms that the kernels cancel, so symmetric noise is bias-free.

    ``n`` may also be a :class:`TickSeries`, in which case the grid is
    checked for equidistance (the formula does not apply otherwise) and
    the horizon is taken from it.
    """
    if isinstance(n, TickSeries):
        if not n.is_equidistant():
            raise InvalidInputError(
                "analytic noise bias is only valid on an equidistant grid"
            )
        horizon = n.horizon
        n = n.n
    n = int(n)
    if n < 2:
        raise InvalidInputError("need at least two increments")
    if horizon is None:
        raise InvalidInputError("horizon is required when n is an integer")
    h = horizon / n
    dm = dirichlet(cut.m, h, horizon)
    dpn = dirichlet_derivative(cut.n, h, horizon)
    return 2.0 * (n - 1) * (dm - 1.0) * dpn * float(zeta3)


def rt_estimate(series: TickSeries, cut_lev: CutFrequencies, m_iv: int,
                cut_ivv: CutFrequencies, b: float | None = None,
                upsilon_star: float | None = None) -> RTEstimate:
    """Estimate the normalized leverage ratio on one series.

    The numerator is the spectral leverage estimate at ``cut_lev``; when
    ``b`` and ``upsilon_star`` are both given it is corrected to
    ``eta - b * upsilon_star`` (the control value usually comes from a
    different, variance-optimal cut, so it is passed in rather than
    recomputed here).  The denominator is ``sqrt(fev * fevv)``; either
    factor failing to be strictly positive raises, since the ratio is
    undefined there.  The result is deliberately not clipped to [-1, 1]:
    values outside that range are informative about estimation error.
    """
    if (b is None) != (upsilon_star is None):
        raise InvalidInputError(
            "corrected ratio needs both b and upsilon_star (or neither)"
        )
    est = fel_spectral(series, cut_lev)
    numerator = est.value
    corrected = b is not None
    if corrected:
        numerator = float(fel_corrected(est.value, upsilon_star, b))
    iv = fev(series, m_iv)
    ivv_val = fevv(series, cut_ivv)
    if not (iv > 0.0):
        raise DegenerateValueError(f"integrated variance estimate {iv} <= 0")
    if not (ivv_val > 0.0):
        raise DegenerateValueError(
            f"integrated vol-of-vol estimate {ivv_val} <= 0 at cuts "
            f"({cut_ivv.m}, {cut_ivv.n}); note N = 1 always yields 0"
        )
    value = numerator / math.sqrt(iv * ivv_val)
    return RTEstimate(value, numerator, iv, ivv_val, corrected, cut_lev,
                      m_iv, cut_ivv, b, upsilon_star)
