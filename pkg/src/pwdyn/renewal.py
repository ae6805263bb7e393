"""Renewal-process statistics for the jump events.

Waiting times are Erlang(n, rate): the n-fold convolution of identical
exponentials with per-stage rate ``rate`` (n = 1 is the exponential case).
The mean waiting time is therefore n / rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

from pwdyn.quadrature import Grid, ProductWeights, product_weights, solve_volterra


@dataclass(frozen=True)
class WaitingTimeDist:
    rate: float
    stages: int = 1

    def __post_init__(self):
        if not self.rate > 0 or not math.isfinite(self.rate):
            raise ValueError(f"rate must be positive, got {self.rate}")
        if int(self.stages) != self.stages or self.stages < 1:
            raise ValueError(f"stages must be a positive integer, got {self.stages}")

    @classmethod
    def exponential(cls, rate: float) -> "WaitingTimeDist":
        return cls(rate, 1)

    @classmethod
    def erlang(cls, stages: int, rate: float) -> "WaitingTimeDist":
        return cls(rate, stages)

    @property
    def kind(self) -> str:
        return "exponential" if self.stages == 1 else "erlang"

    @property
    def mean(self) -> float:
        return self.stages / self.rate

    @property
    def f0(self) -> float:
        """Density at t = 0."""
        return self.rate if self.stages == 1 else 0.0

    def density(self, t):
        t = _nonneg(t)
        n, r = self.stages, self.rate
        return r ** n * t ** (n - 1) * np.exp(-r * t) / math.factorial(n - 1)

    def density_derivative(self, t):
        t = _nonneg(t)
        n, r = self.stages, self.rate
        poly = -r * t ** (n - 1)
        if n > 1:
            poly = poly + (n - 1) * t ** (n - 2)
        return r ** n * poly * np.exp(-r * t) / math.factorial(n - 1)

    def survival(self, t):
        t = _nonneg(t)
        x = self.rate * t
        term = np.ones_like(x)
        acc = np.ones_like(x)
        for j in range(1, self.stages):
            term = term * x / j
            acc = acc + term
        return np.exp(-x) * acc

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """i.i.d. waiting times, each a sum of ``stages`` exponential draws."""
        size = (size,) if np.isscalar(size) else tuple(size)
        return rng.exponential(1.0 / self.rate, size=size + (self.stages,)).sum(axis=-1)

    def describe(self) -> dict:
        return {"kind": self.kind, "rate": self.rate, "stages": self.stages,
                "rate_convention": "per-stage", "mean_waiting_time": self.mean}


def _nonneg(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    return t


def density(w: WaitingTimeDist, t):
    return w.density(t)


def survival(w: WaitingTimeDist, t):
    return w.survival(t)


@dataclass(frozen=True)
class CountingTable:
    grid: Grid
    p: np.ndarray  # p[k, n] = probability of k jumps up to grid.times[n]

    @property
    def k_max(self) -> int:
        return self.p.shape[0] - 1

    def alternating_sum(self) -> np.ndarray:
        signs = (-1.0) ** np.arange(self.p.shape[0])
        return signs @ self.p


def weights_for(w: WaitingTimeDist, grid: Grid) -> ProductWeights:
    return product_weights(w.density, grid.h, grid.steps)


def counting_probabilities(w: WaitingTimeDist, grid: Grid, k_max: int = 40) -> CountingTable:
    """p_k(t) on the grid by iterated product-trapezoidal convolution with f."""
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    pw = weights_for(w, grid)
    p = np.empty((k_max + 1, grid.steps + 1))
    p[0] = w.survival(grid.times)
    for k in range(1, k_max + 1):
        p[k] = pw.convolve(p[k - 1])
    return CountingTable(grid, p)


def counting_tail(w: WaitingTimeDist, t, k_max: int):
    """Exact probability of more than ``k_max`` jumps by time t."""
    return gammainc(w.stages * (k_max + 1), w.rate * _nonneg(t))


def parity_q(w: WaitingTimeDist, grid: Grid) -> np.ndarray:
    """Even-minus-odd jump-count probability, from q + f*q = g."""
    g = w.survival(grid.times)
    kern = np.ones(grid.steps + 1)
    return solve_volterra(weights_for(w, grid), kern, g, sign=-1.0)


@dataclass(frozen=True)
class JumpTrajectory:
    jump_times: tuple
    horizon: float

    def count_until(self, t: float) -> int:
        return int(np.searchsorted(self.jump_times, t, side="right"))


def sample_trajectory(w: WaitingTimeDist, horizon: float, seed) -> JumpTrajectory:
    """Jump times on [0, horizon] of one renewal realization."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    rng = np.random.default_rng(seed)
    times = []
    t = 0.0
    while True:
        t += float(w.sample(rng, 1)[0])
        if t > horizon:
            break
        times.append(t)
    return JumpTrajectory(tuple(times), float(horizon))


def sample_jump_times(w: WaitingTimeDist, horizon: float, n: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Batched sampler: (n, k) array of jump times, padded with +inf past ``horizon``."""
    block = max(4, int(math.ceil(2 * horizon / w.mean)) + 4)
    waits = w.sample(rng, (n, block))
    times = np.cumsum(waits, axis=1)
    while np.any(times[:, -1] <= horizon):
        extra = np.cumsum(w.sample(rng, (n, block)), axis=1) + times[:, -1:]
        times = np.concatenate([times, extra], axis=1)
    times[times > horizon] = np.inf
    k = int(np.max(np.sum(np.isfinite(times), axis=1), initial=0))
    return times[:, :max(k, 1)]
