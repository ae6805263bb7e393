"""Product-trapezoidal quadrature for convolution Volterra equations.

Integrals of the form

    int_0^{t_n} f(t_n - tau) phi(tau) dtau

are discretized on a uniform grid by integrating the weight ``f`` exactly
(Gauss-Legendre per cell) against the piecewise-linear interpolant of the
smooth factor ``phi``.  The weights are then nonnegative whenever f is, and
they sum to int_0^{t_n} f to round-off, which is what keeps the renewal
identities (g + f*1 = 1) exact on the grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

_GL_ORDER = 12
_FFT_THRESHOLD = 4096


@dataclass(frozen=True)
class Grid:
    """Uniform time grid t_n = n h, n = 0..steps."""

    h: float
    steps: int

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"grid step must be positive, got {self.h}")
        if self.steps < 1:
            raise ValueError(f"need at least one step, got {self.steps}")

    @classmethod
    def from_horizon(cls, t_max: float, steps: int) -> "Grid":
        return cls(t_max / steps, int(steps))

    @classmethod
    def with_step(cls, t_max: float, h: float) -> "Grid":
        steps = int(round(t_max / h))
        return cls(t_max / steps, steps)

    @property
    def t_max(self) -> float:
        return self.h * self.steps

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(self.steps + 1)

    def describe(self) -> dict:
        return {"h": self.h, "steps": self.steps, "t_max": self.t_max}


@dataclass(frozen=True)
class ProductWeights:
    """Cell moments of the weight function on [k h, (k+1) h].

    rising[k]  = int f(s) (s - k h)/h ds,
    falling[k] = int f(s) ((k+1) h - s)/h ds.
    """

    h: float
    rising: np.ndarray
    falling: np.ndarray

    @property
    def diagonal(self) -> float:
        """Weight on the unknown at the current node."""
        return float(self.falling[0])

    def cumulative(self) -> np.ndarray:
        """int_0^{t_n} f, n = 0..steps."""
        return np.concatenate([[0.0], np.cumsum(self.rising + self.falling)])

    def convolve(self, phi: np.ndarray) -> np.ndarray:
        """int_0^{t_n} f(t_n - tau) phi(tau) dtau at every node, phi known everywhere."""
        phi = np.asarray(phi, dtype=float)
        n = len(phi)
        falling = np.zeros(n)
        falling[:min(n, len(self.falling))] = self.falling[:n]
        c = falling.copy()
        c[1:] += self.rising[:n - 1]
        full = fftconvolve(c, phi)[:n] if n > _FFT_THRESHOLD else np.convolve(c, phi)[:n]
        # tau = 0 carries only the rising half-cell
        full -= falling * phi[0]
        full[0] = 0.0
        return full


def product_weights(density, h: float, steps: int) -> ProductWeights:
    """Cell moments of ``density`` for ``steps`` cells of width ``h``."""
    x, wq = np.polynomial.legendre.leggauss(_GL_ORDER)
    u = 0.5 * (x + 1.0)
    wq = 0.5 * wq
    s = h * (np.arange(steps)[:, None] + u[None, :])
    fs = density(s)
    rising = h * (fs * (wq * u)).sum(axis=1)
    falling = h * (fs * (wq * (1.0 - u))).sum(axis=1)
    return ProductWeights(h, rising, falling)


def solve_volterra(weights: ProductWeights, kernel: np.ndarray, rhs: np.ndarray,
                   sign: float = 1.0) -> np.ndarray:
    """Forward-march x(t) = rhs(t) + sign * int_0^t f(t-tau) K(t-tau) x(tau) dtau.

    ``kernel`` holds the smooth factor K at the grid lags (shape (N+1,) for a
    scalar equation or (N+1, d, d) for a matrix one); ``rhs`` has shape (N+1,)
    or (N+1, d, p).  The implicit diagonal term is resolved exactly.
    """
    kernel = np.asarray(kernel)
    rhs = np.asarray(rhs)
    scalar = kernel.ndim == 1
    if scalar:
        kernel = kernel[:, None, None]
        rhs = rhs[:, None, None]
    n_nodes, d, _ = kernel.shape
    p = rhs.shape[2]
    n_steps = n_nodes - 1
    if rhs.shape[0] != n_nodes or len(weights.rising) < n_steps:
        raise ValueError("kernel, rhs and weights disagree on the grid size")
    dtype = np.result_type(kernel, rhs, float)

    diag = np.eye(d) - sign * weights.diagonal * kernel[0]
    if np.linalg.cond(diag) > 1e12:
        raise np.linalg.LinAlgError("implicit Volterra step is singular; reduce the step")
    diag_inv = np.linalg.inv(diag)

    omega = np.zeros(n_nodes)
    omega[1:n_steps] = weights.rising[:n_steps - 1] + weights.falling[1:n_steps]
    # block m of the columns holds omega_m K_m
    wk = (omega[:, None, None] * kernel).transpose(1, 0, 2).reshape(d, n_nodes * d)
    wk = np.ascontiguousarray(sign * wk, dtype=dtype)
    # x_j lives in rows of block N - j so that increasing lag maps to increasing rows
    xrev = np.zeros((n_nodes * d, p), dtype=dtype)
    out = np.empty((n_nodes, d, p), dtype=dtype)

    out[0] = rhs[0]
    xrev[n_steps * d:] = rhs[0]
    x0 = rhs[0]
    for n in range(1, n_nodes):
        acc = rhs[n] + (sign * weights.rising[n - 1]) * (kernel[n] @ x0)
        if n > 1:
            acc = acc + wk[:, d:n * d] @ xrev[(n_steps - n + 1) * d:n_steps * d]
        xn = diag_inv @ acc
        out[n] = xn
        xrev[(n_steps - n) * d:(n_steps - n + 1) * d] = xn
    return out[:, 0, 0] if scalar else out


def integrate_lagged(weights: ProductWeights, phi: np.ndarray) -> np.ndarray:
    """int_0^{t_n} f(s) phi(s) ds for every node, phi tabulated at the grid lags."""
    phi = np.asarray(phi)
    n = len(phi) - 1
    cell = (weights.falling[:n, None] * phi[:-1].reshape(n, -1)
            + weights.rising[:n, None] * phi[1:].reshape(n, -1))
    out = np.concatenate([np.zeros((1, cell.shape[1])), np.cumsum(cell, axis=0)])
    return out.reshape(phi.shape)


def convolve_matrix(weights: ProductWeights, kernel: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Explicit sum_j W_{n,j} K_{n-j} x_j for every node (x known on the whole grid)."""
    kernel = np.asarray(kernel)
    x = np.asarray(x)
    n_nodes, d, _ = kernel.shape
    p = x.shape[2]
    n_steps = n_nodes - 1
    omega = np.zeros(n_nodes)
    omega[1:n_steps] = weights.rising[:n_steps - 1] + weights.falling[1:n_steps]
    wk = (omega[:, None, None] * kernel).transpose(1, 0, 2).reshape(d, n_nodes * d)
    xrev = x[::-1].reshape(n_nodes * d, p)
    out = np.zeros_like(x, dtype=np.result_type(kernel, x))
    for n in range(1, n_nodes):
        acc = weights.rising[n - 1] * (kernel[n] @ x[0]) + weights.diagonal * (kernel[0] @ x[n])
        if n > 1:
            acc = acc + wk[:, d:n * d] @ xrev[(n_steps - n + 1) * d:n_steps * d]
        out[n] = acc
    return out
