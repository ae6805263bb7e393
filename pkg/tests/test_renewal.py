import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import poisson

from pwdyn.quadrature import Grid, product_weights, solve_volterra
from pwdyn.renewal import (WaitingTimeDist, counting_probabilities, counting_tail, density, parity_q,
                           sample_jump_times, sample_trajectory, survival)

E1 = math.exp(-1)
WAITS = [WaitingTimeDist.exponential(1.3), WaitingTimeDist.erlang(2, 0.8), WaitingTimeDist.erlang(3, 2.5)]


class TestGrid:
    def test_from_horizon(self):
        g = Grid.from_horizon(2.0, 4)
        np.testing.assert_allclose(g.times, [0, 0.5, 1, 1.5, 2])

    def test_with_step(self):
        assert Grid.with_step(5.0, 1e-3).steps == 5000

    @pytest.mark.parametrize("h, steps", [(0.0, 3), (-1.0, 3), (0.1, 0)])
    def test_invalid(self, h, steps):
        with pytest.raises(ValueError):
            Grid(h, steps)


class TestProductWeights:
    def test_sum_to_cdf(self):
        w = WaitingTimeDist.erlang(3, 1.7)
        pw = product_weights(w.density, 0.05, 200)
        t = 0.05 * np.arange(201)
        np.testing.assert_allclose(pw.cumulative(), 1 - w.survival(t), atol=1e-15)
        assert np.all(pw.rising >= 0) and np.all(pw.falling >= 0)

    def test_linear_integrand_exact(self):
        # a piecewise-linear phi is integrated exactly against f
        w = WaitingTimeDist.erlang(2, 1.0)
        grid = Grid(0.1, 50)
        pw = product_weights(w.density, grid.h, grid.steps)
        phi = 2.0 + 3.0 * grid.times
        conv = pw.convolve(phi)
        for n in (7, 50):
            tn = grid.times[n]
            ref, _ = integrate.quad(lambda s: w.density(tn - s) * (2.0 + 3.0 * s), 0, tn, epsabs=1e-14)
            assert conv[n] == pytest.approx(ref, abs=1e-13)

    def test_fft_path_matches_direct(self):
        w = WaitingTimeDist.exponential(1.0)
        pw = product_weights(w.density, 1e-3, 5000)
        phi = np.cos(np.arange(5001) * 1e-3)
        a = pw.convolve(phi)

        def direct(n):
            j = np.arange(1, n)
            return (pw.rising[n - 1] * phi[0] + np.dot(pw.rising[n - 1 - j] + pw.falling[n - j], phi[j])
                    + pw.falling[0] * phi[n])

        for n in (1, 2, 3, 4000, 5000):
            assert a[n] == pytest.approx(direct(n), abs=1e-13)

    def test_solve_volterra_exponential(self):
        # x = 1 - int_0^t e^{-(t-s)} x(s) ds  has x = (1 + e^{-2t}) / 2
        grid = Grid.with_step(4.0, 1e-3)
        w = WaitingTimeDist.exponential(1.0)
        pw = product_weights(w.density, grid.h, grid.steps)
        x = solve_volterra(pw, np.ones(grid.steps + 1), np.ones(grid.steps + 1), sign=-1.0)
        np.testing.assert_allclose(x, 0.5 * (1 + np.exp(-2 * grid.times)), atol=1e-7)


class TestWaitingTime:
    @pytest.mark.parametrize("w, t, expected", [
        (WaitingTimeDist.exponential(1.0), 0.0, 1.0),
        (WaitingTimeDist.erlang(2, 1.0), 1.0, E1),
        (WaitingTimeDist.erlang(3, 1.0), 0.0, 0.0),
    ])
    def test_density(self, w, t, expected):
        assert density(w, t) == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("w, t, expected", [
        (WaitingTimeDist.exponential(1.0), 0.0, 1.0),
        (WaitingTimeDist.erlang(3, 2.0), 0.0, 1.0),
        (WaitingTimeDist.exponential(1.0), 1.0, E1),
        (WaitingTimeDist.erlang(2, 1.0), 1.0, 0.7357588823428847),
    ])
    def test_survival(self, w, t, expected):
        assert survival(w, t) == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("w", WAITS)
    def test_normalized(self, w):
        upper = 60 * w.mean
        mass, _ = integrate.quad(w.density, 0, upper, limit=200)
        assert abs(mass - 1) < 1e-8
        assert w.survival(upper) < 1e-10

    @pytest.mark.parametrize("w", WAITS)
    def test_survival_is_one_minus_cdf(self, w):
        for t in (0.3, 1.0, 4.0):
            cdf, _ = integrate.quad(w.density, 0, t)
            assert w.survival(t) == pytest.approx(1 - cdf, abs=1e-12)
        g = w.survival(np.linspace(0, 20, 2001))
        assert np.all(np.diff(g) <= 0)

    def test_f0(self):
        assert WaitingTimeDist.exponential(2.5).f0 == 2.5
        assert WaitingTimeDist.erlang(2, 2.5).f0 == 0.0
        assert WaitingTimeDist.erlang(3, 2.0).mean == 1.5

    @pytest.mark.parametrize("w", WAITS)
    def test_density_derivative(self, w):
        t = np.linspace(0.1, 5, 50)
        fd = (w.density(t + 1e-6) - w.density(t - 1e-6)) / 2e-6
        np.testing.assert_allclose(w.density_derivative(t), fd, atol=1e-7)

    @pytest.mark.parametrize("rate, stages", [(0.0, 1), (-1.0, 1), (1.0, 0), (1.0, 1.5)])
    def test_invalid(self, rate, stages):
        with pytest.raises(ValueError):
            WaitingTimeDist(rate, stages)

    def test_negative_time(self):
        with pytest.raises(ValueError):
            density(WAITS[0], -0.1)


class TestCounting:
    def test_exponential_p0_p1(self):
        table = counting_probabilities(WaitingTimeDist.exponential(1.0), Grid.with_step(1.0, 1e-3), 5)
        assert table.p[0, -1] == pytest.approx(E1, abs=1e-15)
        assert table.p[1, -1] == pytest.approx(E1, abs=1e-7)

    def test_erlang2_p1_cdf_difference(self):
        # P(N=1) = P(S_1 <= t) - P(S_2 <= t) with Erlang(2) and Erlang(4) partial sums
        table = counting_probabilities(WaitingTimeDist.erlang(2, 1.0), Grid.with_step(1.0, 1e-3), 5)
        assert table.p[1, -1] == pytest.approx(0.24525296078096154, abs=1e-7)

    def test_poisson(self):
        rate = 1.0
        grid = Grid.with_step(5.0 / rate, 2.5e-4)
        table = counting_probabilities(WaitingTimeDist.exponential(rate), grid, 10)
        for k in range(11):
            ref = poisson.pmf(k, rate * grid.times)
            assert np.abs(table.p[k] - ref).max() <= 1e-8

    @pytest.mark.parametrize("w", WAITS)
    def test_nonnegative_and_normalized(self, w):
        grid = Grid.with_step(5.0, 1e-2)
        table = counting_probabilities(w, grid, 40)
        assert table.p.min() >= -1e-10
        tail = counting_tail(w, grid.times, 40)
        np.testing.assert_allclose(table.p.sum(axis=0) + tail, 1.0, atol=1e-12)

    def test_tail_closed_form(self):
        w = WaitingTimeDist.exponential(2.0)
        assert counting_tail(w, 1.0, 2) == pytest.approx(1 - poisson.cdf(2, 2.0), abs=1e-14)

    def test_negative_kmax(self):
        with pytest.raises(ValueError):
            counting_probabilities(WAITS[0], Grid(0.1, 5), -1)


class TestParity:
    def test_exponential_value(self):
        grid = Grid.with_step(1.0, 2e-4)
        assert parity_q(WaitingTimeDist.exponential(1.0), grid)[-1] == pytest.approx(0.1353352832366127, abs=1e-8)

    @pytest.mark.parametrize("w", WAITS)
    def test_starts_at_one(self, w):
        assert parity_q(w, Grid(0.1, 10))[0] == 1.0

    @pytest.mark.parametrize("w", WAITS)
    def test_alternating_sum(self, w):
        grid = Grid.with_step(5.0, 1e-2)
        q = parity_q(w, grid)
        alt = counting_probabilities(w, grid, 40).alternating_sum()
        assert np.abs(q - alt).max() <= 1e-8


class TestSampling:
    def test_mean_count_poisson(self):
        rate, T, n = 2.0, 3.0, 100_000
        times = sample_jump_times(WaitingTimeDist.exponential(rate), T, n, np.random.default_rng(5))
        counts = np.isfinite(times).sum(axis=1)
        sigma = math.sqrt(rate * T / n)
        assert abs(counts.mean() - rate * T) <= 3 * sigma

    @pytest.mark.parametrize("w", WAITS)
    def test_counts_match_table(self, w):
        T, n = 2.0, 100_000
        counts = np.isfinite(sample_jump_times(w, T, n, np.random.default_rng(9))).sum(axis=1)
        p = counting_probabilities(w, Grid.with_step(T, 1e-3), 5).p[:, -1]
        assert abs(np.mean(counts == 0) - w.survival(T)) <= 3 * math.sqrt(w.survival(T) * (1 - w.survival(T)) / n)
        for k in range(6):
            sigma = math.sqrt(max(p[k] * (1 - p[k]), 1e-12) / n)
            assert abs(np.mean(counts == k) - p[k]) <= 3 * sigma + 1e-6

    def test_trajectory_deterministic(self):
        w = WaitingTimeDist.erlang(2, 3.0)
        a, b = sample_trajectory(w, 10.0, 42), sample_trajectory(w, 10.0, 42)
        assert a == b
        assert all(0 < t <= 10.0 for t in a.jump_times)
        assert list(a.jump_times) == sorted(a.jump_times)

    def test_short_horizon_empty(self):
        w = WaitingTimeDist.exponential(1.0)
        empty = sum(len(sample_trajectory(w, 1e-6, s).jump_times) == 0 for s in range(200))
        assert empty == 200

    def test_invalid_horizon(self):
        with pytest.raises(ValueError):
            sample_trajectory(WAITS[0], 0.0, 1)
