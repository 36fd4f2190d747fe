import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fourierlev as fl
from fourierlev.errors import InvalidInputError
from fourierlev.spectral import dedup_last_tick

import oracles
from conftest import random_series


class TestTickSeries:
    def test_basic_construction(self):
        t = np.array([0.0, 0.5, 1.0])
        p = np.array([0.0, 0.1, 0.05])
        s = fl.TickSeries(t, p, 1.0)
        assert s.n == 2
        np.testing.assert_allclose(s.increments, [0.1, -0.05])

    def test_rejects_unsorted_timestamps(self):
        with pytest.raises(InvalidInputError):
            fl.TickSeries(np.array([0.0, 0.6, 0.5]), np.zeros(3), 1.0)

    def test_rejects_duplicate_timestamps(self):
        with pytest.raises(InvalidInputError):
            fl.TickSeries(np.array([0.0, 0.5, 0.5]), np.zeros(3), 1.0)

    def test_rejects_mismatched_lengths(self):
        with pytest.raises(InvalidInputError):
            fl.TickSeries(np.array([0.0, 1.0]), np.zeros(3), 1.0)

    def test_rejects_nonfinite_prices(self):
        with pytest.raises(InvalidInputError):
            fl.TickSeries(np.array([0.0, 1.0]), np.array([0.0, np.nan]), 1.0)

    def test_rejects_nonpositive_horizon(self):
        with pytest.raises(InvalidInputError):
            fl.TickSeries(np.array([0.0, 1.0]), np.zeros(2), 0.0)

    def test_rejects_timestamps_beyond_horizon(self):
        with pytest.raises(InvalidInputError):
            fl.TickSeries(np.array([0.0, 2.0]), np.zeros(2), 1.0)

    def test_rejects_single_point(self):
        with pytest.raises(InvalidInputError):
            fl.TickSeries(np.array([0.0]), np.zeros(1), 1.0)

    def test_equidistant_detection(self):
        t = np.linspace(0.0, 1.0, 11)
        s = fl.TickSeries(t, np.zeros(11), 1.0)
        assert s.is_equidistant()
        t2 = t.copy()
        t2[5] += 0.01
        s2 = fl.TickSeries(t2, np.zeros(11), 1.0)
        assert not s2.is_equidistant()

    def test_with_log_prices_replaces_values_only(self):
        t = np.linspace(0.0, 1.0, 5)
        s = fl.TickSeries(t, np.zeros(5), 1.0)
        s2 = s.with_log_prices(np.arange(5.0))
        assert s2.horizon == s.horizon
        np.testing.assert_array_equal(s2.timestamps, s.timestamps)
        np.testing.assert_array_equal(s2.log_prices, np.arange(5.0))
        np.testing.assert_array_equal(s.log_prices, np.zeros(5))


class TestDedup:
    def test_keeps_last_of_each_run(self):
        t = np.array([0.0, 1.0, 1.0, 1.0, 2.0])
        v = np.array([10.0, 11.0, 12.0, 13.0, 14.0])
        t2, v2, dropped = dedup_last_tick(t, v)
        np.testing.assert_array_equal(t2, [0.0, 1.0, 2.0])
        np.testing.assert_array_equal(v2, [10.0, 13.0, 14.0])
        assert dropped == 2

    def test_no_duplicates_is_identity(self):
        t = np.array([0.0, 1.0, 2.0])
        v = np.array([1.0, 2.0, 3.0])
        t2, v2, dropped = dedup_last_tick(t, v)
        np.testing.assert_array_equal(t2, t)
        np.testing.assert_array_equal(v2, v)
        assert dropped == 0

    def test_requires_sorted_input(self):
        with pytest.raises(InvalidInputError):
            dedup_last_tick(np.array([1.0, 0.0]), np.array([1.0, 2.0]))


class TestKernels:
    @pytest.mark.parametrize("order", [1, 3, 7])
    def test_matches_literal_sum(self, order):
        rng = np.random.default_rng(0)
        horizon = 0.7
        for t in rng.uniform(-horizon, horizon, 25):
            got = fl.dirichlet(order, t, horizon)
            want = oracles.naive_dirichlet(order, t, horizon)
            assert got == pytest.approx(want, abs=1e-12)
            got_d = fl.dirichlet_derivative(order, t, horizon)
            want_d = oracles.naive_dirichlet_derivative(order, t, horizon)
            assert got_d == pytest.approx(want_d, rel=1e-10, abs=1e-9)

    def test_unit_value_on_lattice(self):
        horizon = 1.0
        # D is T-periodic and equals one wherever sin(pi t / T) vanishes
        for t in (0.0, horizon, -horizon, 2 * horizon):
            assert fl.dirichlet(5, t, horizon) == pytest.approx(1.0)

    def test_derivative_zero_on_lattice_and_odd(self):
        horizon = 0.3
        assert fl.dirichlet_derivative(4, 0.0, horizon) == 0.0
        assert fl.dirichlet_derivative(4, horizon, horizon) == pytest.approx(
            0.0, abs=1e-9)
        rng = np.random.default_rng(1)
        for t in rng.uniform(0.0, horizon, 10):
            left = fl.dirichlet_derivative(4, -t, horizon)
            right = fl.dirichlet_derivative(4, t, horizon)
            assert left == pytest.approx(-right, rel=1e-12, abs=1e-12)

    def test_vectorized_matches_scalar(self):
        t = np.linspace(-0.5, 0.5, 101)
        vec = fl.dirichlet(6, t, 1.0)
        scal = np.array([fl.dirichlet(6, x, 1.0) for x in t])
        np.testing.assert_allclose(vec, scal, rtol=0, atol=0)

    @pytest.mark.parametrize("order", [1, 5, 20, 50])
    def test_squared_norm(self, order):
        # integral of D^2 over one period is T/(2N+1)
        horizon = 2.0
        m = 200_001
        u = np.linspace(0.0, horizon, m)
        vals = fl.dirichlet(order, u, horizon) ** 2
        integral = np.trapezoid(vals, u)
        assert integral == pytest.approx(horizon / (2 * order + 1), rel=1e-6)


class TestCoefficients:
    def test_fft_path_matches_literal(self):
        rng = np.random.default_rng(2)
        s = random_series(rng, 32, horizon=0.4, equidistant=True)
        coeffs = fl.return_coefficients(s, 10)
        for freq in range(-10, 11):
            want = oracles.naive_fourier_coefficient(
                s.timestamps[:-1], s.increments, s.horizon, freq)
            got = coeffs[freq + 10]
            assert got == pytest.approx(want, rel=1e-10, abs=1e-12)

    def test_direct_path_matches_literal(self):
        rng = np.random.default_rng(3)
        s = random_series(rng, 40, horizon=1.3, equidistant=False)
        assert not s.is_equidistant()
        coeffs = fl.return_coefficients(s, 12)
        for freq in (-12, -5, 0, 1, 7, 12):
            want = oracles.naive_fourier_coefficient(
                s.timestamps[:-1], s.increments, s.horizon, freq)
            got = coeffs[freq + 12]
            assert got == pytest.approx(want, rel=1e-9, abs=1e-12)

    def test_fft_and_direct_paths_agree(self):
        rng = np.random.default_rng(4)
        s = random_series(rng, 64, horizon=0.05, equidistant=True)
        jitter = fl.TickSeries(s.timestamps.copy(), s.log_prices, s.horizon)
        via_fft = fl.return_coefficients(s, 30)
        # same data forced down the generic path
        from fourierlev.spectral import _coefficients_of_weights
        via_direct = _coefficients_of_weights(
            s.timestamps[:-1], s.increments, s.horizon, 30, False)
        np.testing.assert_allclose(via_fft, via_direct, rtol=0, atol=1e-13)
        del jitter

    def test_aliasing_above_observation_count(self):
        # frequencies past n wrap around exactly on an equidistant grid
        rng = np.random.default_rng(5)
        s = random_series(rng, 16, horizon=1.0, equidistant=True)
        coeffs = fl.return_coefficients(s, 20)
        mid = 20
        for freq in (17, 18, 20):
            want = oracles.naive_fourier_coefficient(
                s.timestamps[:-1], s.increments, s.horizon, freq)
            assert coeffs[mid + freq] == pytest.approx(want, rel=1e-10,
                                                       abs=1e-14)

    def test_conjugate_symmetry(self):
        rng = np.random.default_rng(6)
        for equi in (True, False):
            s = random_series(rng, 30, horizon=0.9, equidistant=equi)
            c = fl.return_coefficients(s, 9)
            np.testing.assert_allclose(c, np.conj(c[::-1]), rtol=0, atol=1e-15)

    def test_zero_frequency_is_total_change(self):
        rng = np.random.default_rng(7)
        s = random_series(rng, 25, horizon=0.6)
        c = fl.return_coefficients(s, 0)
        total = s.log_prices[-1] - s.log_prices[0]
        assert c[0] == pytest.approx(total / s.horizon, rel=1e-12)

    def test_squared_return_coefficients(self):
        rng = np.random.default_rng(8)
        s = random_series(rng, 20, horizon=0.5)
        c = fl.squared_return_coefficients(s, 6)
        for freq in (-6, -1, 0, 4):
            want = oracles.naive_fourier_coefficient(
                s.timestamps[:-1], s.increments ** 2, s.horizon, freq)
            assert c[freq + 6] == pytest.approx(want, rel=1e-10, abs=1e-15)

    def test_rejects_negative_max_freq(self):
        rng = np.random.default_rng(9)
        s = random_series(rng, 10)
        with pytest.raises(InvalidInputError):
            fl.return_coefficients(s, -1)

    @settings(max_examples=25, deadline=None)
    @given(scale=st.floats(0.1, 10.0), seed=st.integers(0, 999))
    def test_linear_in_weights(self, scale, seed):
        rng = np.random.default_rng(seed)
        s = random_series(rng, 12, horizon=0.3)
        scaled = s.with_log_prices(s.log_prices * scale)
        base = fl.return_coefficients(s, 5)
        np.testing.assert_allclose(fl.return_coefficients(scaled, 5),
                                   base * scale, rtol=1e-12, atol=1e-16)


class TestVolatilityCoefficients:
    def test_matches_literal_convolution(self):
        rng = np.random.default_rng(10)
        s = random_series(rng, 24, horizon=0.8)
        cut_m, max_l = 5, 3
        rc = fl.return_coefficients(s, cut_m + max_l)
        vol = fl.volatility_coefficients(rc, cut_m, max_l, s.horizon)
        for l in range(-max_l, max_l + 1):
            want = oracles.naive_vol_coefficient(
                s.timestamps[:-1], s.increments, s.horizon, cut_m, l)
            assert vol[l + max_l] == pytest.approx(want, rel=1e-9, abs=1e-14)

    def test_rejects_insufficient_span(self):
        rng = np.random.default_rng(11)
        s = random_series(rng, 16)
        rc = fl.return_coefficients(s, 6)
        with pytest.raises(InvalidInputError):
            fl.volatility_coefficients(rc, 5, 3, s.horizon)  # needs 8

    def test_conjugate_symmetry(self):
        rng = np.random.default_rng(12)
        s = random_series(rng, 20)
        rc = fl.return_coefficients(s, 9)
        vol = fl.volatility_coefficients(rc, 6, 3, s.horizon)
        np.testing.assert_allclose(vol, np.conj(vol[::-1]), rtol=0, atol=1e-18)


class TestIntegrationByParts:
    def test_residual_small_on_smooth_path(self):
        # the discrete Stieltjes sum and the endpoint formula agree up to
        # quadrature error, which shrinks with the step
        n = 4000
        t = np.linspace(0.0, 1.0, n + 1)
        v = np.sin(2 * np.pi * t) + 0.3 * t
        res = fl.integration_by_parts_check(t, v, 1.0, freq=3)
        assert res < 1e-2

    def test_residual_shrinks_with_resolution(self):
        res = []
        for n in (500, 2000, 8000):
            t = np.linspace(0.0, 1.0, n + 1)
            v = np.sin(2 * np.pi * t) + 0.3 * t
            res.append(fl.integration_by_parts_check(t, v, 1.0, freq=3))
        assert res[0] > res[1] > res[2]
