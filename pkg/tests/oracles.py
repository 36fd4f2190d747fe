"""Naive reference implementations used as oracles.

Everything here is written as a direct transcription of the defining
formulas: explicit sums, no FFT, no shared code with the package. Slow on
purpose; tests keep the sizes small.
"""

import cmath
import math

import numpy as np


def naive_fourier_coefficient(times, weights, horizon, freq):
    """(1/T) sum_i w_i exp(-i * freq * (2pi/T) * t_i)."""
    omega = 2.0 * math.pi / horizon
    total = 0.0 + 0.0j
    for t, w in zip(times, weights):
        total += w * cmath.exp(-1j * freq * omega * t)
    return total / horizon


def naive_dirichlet(order, t, horizon):
    """(1/(2N+1)) sum_{|l|<=N} exp(i l (2pi/T) t), evaluated literally."""
    omega = 2.0 * math.pi / horizon
    total = 0.0 + 0.0j
    for l in range(-order, order + 1):
        total += cmath.exp(1j * l * omega * t)
    return total.real / (2 * order + 1)


def naive_dirichlet_derivative(order, t, horizon):
    """d/dt of naive_dirichlet: (1/(2N+1)) sum i l omega exp(i l omega t)."""
    omega = 2.0 * math.pi / horizon
    total = 0.0 + 0.0j
    for l in range(-order, order + 1):
        total += 1j * l * omega * cmath.exp(1j * l * omega * t)
    return total.real / (2 * order + 1)


def naive_vol_coefficient(times, increments, horizon, cut_m, freq):
    """(T/(2M+1)) sum_{|s|<=M} c(s; dp) c(freq - s; dp)."""
    total = 0.0 + 0.0j
    for s in range(-cut_m, cut_m + 1):
        total += (naive_fourier_coefficient(times, increments, horizon, s)
                  * naive_fourier_coefficient(times, increments, horizon,
                                              freq - s))
    return total * horizon / (2 * cut_m + 1)


def naive_fel(times, increments, horizon, cut_m, cut_n):
    """Triple sum over all (i, j, k) with both kernels, no restriction."""
    n = len(increments)
    total = 0.0
    for j in range(n):
        for i in range(n):
            dm = naive_dirichlet(cut_m, times[i] - times[j], horizon)
            for k in range(n):
                dn = naive_dirichlet_derivative(cut_n, times[k] - times[j],
                                                horizon)
                total += dm * dn * increments[i] * increments[j] * increments[k]
    return total


def naive_fel_spectral(times, increments, horizon, cut_m, cut_n):
    """(T^2/(2N+1)) sum_{|l|<=N} i l omega c_vol(l) c(-l; dp)."""
    omega = 2.0 * math.pi / horizon
    total = 0.0 + 0.0j
    for l in range(-cut_n, cut_n + 1):
        cv = naive_vol_coefficient(times, increments, horizon, cut_m, l)
        cr = naive_fourier_coefficient(times, increments, horizon, -l)
        total += 1j * l * omega * cv * cr
    return (total * horizon * horizon / (2 * cut_n + 1)).real


def naive_upsilon(times, increments, horizon, cut_m, cut_n):
    """Sum over triples with i, j, k pairwise distinct."""
    n = len(increments)
    total = 0.0
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            dm = naive_dirichlet(cut_m, times[i] - times[j], horizon)
            for k in range(n):
                if k == i or k == j:
                    continue
                dn = naive_dirichlet_derivative(cut_n, times[k] - times[j],
                                                horizon)
                total += (dm * dn
                          * increments[i] * increments[j] * increments[k])
    return total


def naive_kernel_matrix(order, times, horizon, derivative=False):
    """Kernel values at all pairwise lags t_a - t_b, by explicit l-sum."""
    omega = 2.0 * math.pi / horizon
    lags = np.subtract.outer(np.asarray(times), np.asarray(times))
    total = np.zeros(lags.shape, dtype=complex)
    for l in range(-order, order + 1):
        term = np.exp(1j * l * omega * lags)
        if derivative:
            term = 1j * l * omega * term
        total += term
    return total.real / (2 * order + 1)


def naive_upsilon_tensor(times, increments, horizon, cut_m, cut_n):
    """O(n^3) evaluation with the pairwise-distinct mask applied literally.

    Builds the full rank-3 weight tensor W[i, j, k] and zeroes the i=j,
    i=k and j=k planes before summing; feasible up to n of a few hundred.
    """
    d = np.asarray(increments, dtype=float)
    n = d.size
    km = naive_kernel_matrix(cut_m, times, horizon)          # [i, j]
    kd = naive_kernel_matrix(cut_n, times, horizon, True)    # [k, j]
    w = (km * d[:, None] * d[None, :])[:, :, None] * \
        (kd.T * d[None, :])[None, :, :]                      # [i, j, k]
    i_idx, j_idx, k_idx = np.ogrid[:n, :n, :n]
    w = np.where((i_idx == j_idx) | (i_idx == k_idx) | (j_idx == k_idx),
                 0.0, w)
    return float(w.sum())


def naive_fev(times, increments, horizon, cut_m):
    """(T^2/(2M+1)) sum_{|s|<=M} c(s) c(-s)."""
    total = 0.0 + 0.0j
    for s in range(-cut_m, cut_m + 1):
        total += (naive_fourier_coefficient(times, increments, horizon, s)
                  * naive_fourier_coefficient(times, increments, horizon, -s))
    return (total * horizon * horizon / (2 * cut_m + 1)).real


def naive_fevv(times, increments, horizon, cut_m, cut_n):
    """Bartlett-weighted sum of l^2 omega^2 |c_vol(l)|^2."""
    omega = 2.0 * math.pi / horizon
    total = 0.0 + 0.0j
    for l in range(-cut_n, cut_n + 1):
        weight = 1.0 - abs(l) / cut_n
        cv_pos = naive_vol_coefficient(times, increments, horizon, cut_m, l)
        cv_neg = naive_vol_coefficient(times, increments, horizon, cut_m, -l)
        total += weight * (l * omega) ** 2 * cv_pos * cv_neg
    return (total * horizon * horizon / (2 * cut_n + 1)).real


def naive_heston_path(alpha, beta, nu, rho, v0, p0, n, horizon, z1, z2):
    """Scalar Euler loop with full truncation, price first.

    z1 drives the price, the variance shock is rho*z1 + sqrt(1-rho^2)*z2.
    Returns (log_prices, recorded_variances) with n+1 and n+1 entries.
    """
    dt = horizon / n
    sq = math.sqrt(dt)
    p = [p0]
    v_signed = v0
    recorded = [max(v0, 0.0)]
    for i in range(n):
        v_plus = max(v_signed, 0.0)
        vol = math.sqrt(v_plus)
        p.append(p[-1] + vol * sq * z1[i])
        shock = rho * z1[i] + math.sqrt(1.0 - rho * rho) * z2[i]
        v_signed = v_signed + alpha * (beta - v_plus) * dt + nu * vol * sq * shock
        recorded.append(max(v_signed, 0.0))
    return np.array(p), np.array(recorded)


def centered_moments_gaussian(std):
    """Central moments 2..4 of a centered normal with the given std."""
    return {"m2": std ** 2, "m3": 0.0, "m4": 3.0 * std ** 4}


def centered_moments_shifted_exponential(std, skew_sign):
    """Central moments 2..4 of sign*(Exp(1)-1) scaled to the given std.

    The unit exponential has central moments 1, 2, 9 (orders 2, 3, 4);
    scaling by s multiplies order k by s^k, the sign flip flips odd orders.
    """
    return {
        "m2": std ** 2,
        "m3": float(skew_sign) * 2.0 * std ** 3,
        "m4": 9.0 * std ** 4,
    }


def increment_moment_mc(draws):
    """Empirical versions of the increment-moment identities.

    ``draws`` is a 1-d array of i.i.d. noise levels; increments are the
    first differences. Returns sample means with standard errors:
    eps^2, eps^4, eps_i^2 eps_{i+1}, eps_i^2 eps_{i-1}, and the adjacent
    and distant eps^2 eps^2 products.
    """
    eps = np.diff(draws)

    def stat(x):
        x = np.asarray(x, dtype=float)
        return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))

    return {
        "eps2": stat(eps ** 2),
        "eps4": stat(eps ** 4),
        "eps2_eps_next": stat(eps[:-1] ** 2 * eps[1:]),
        "eps2_eps_prev": stat(eps[1:] ** 2 * eps[:-1]),
        "eps2_eps2_adjacent": stat(eps[:-1] ** 2 * eps[1:] ** 2),
        "eps2_eps2_distant": stat(eps[:-5] ** 2 * eps[5:] ** 2),
    }


def naive_acf(x, max_lag):
    """Autocorrelation with the 1/n normalization at every lag."""
    x = np.asarray(x, dtype=float)
    n = x.size
    centered = x - x.mean()
    denom = float(np.sum(centered ** 2))
    out = []
    for lag in range(1, max_lag + 1):
        num = float(np.sum(centered[lag:] * centered[:-lag]))
        out.append(num / denom)
    return np.array(out)


def naive_last_tick_rv(times, log_prices, horizon, interval):
    """Realized variance on a calendar grid with last-tick interpolation."""
    grid = []
    g = 0.0
    while g <= horizon + 1e-9:
        grid.append(g)
        g += interval
    sampled = []
    for g in grid:
        idx = None
        for i, t in enumerate(times):
            if t <= g + 1e-12:
                idx = i
            else:
                break
        if idx is None:
            idx = 0
        sampled.append(log_prices[idx])
    rets = np.diff(np.array(sampled))
    return float(np.sum(rets ** 2))
