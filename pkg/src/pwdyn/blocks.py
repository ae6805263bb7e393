"""Inter-jump map families F(t) and jump channels E in transfer-matrix form."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from pwdyn import qstate
from pwdyn.quadrature import Grid

OPERATORS = {
    "id": qstate.SIGMA_0,
    "sx": qstate.SIGMA_X,
    "sy": qstate.SIGMA_Y,
    "sz": qstate.SIGMA_Z,
    "sm": np.array([[0, 0], [1, 0]], dtype=complex),  # |1><0|, lowers the sz = +1 level
    "sp": np.array([[0, 1], [0, 0]], dtype=complex),
}


class OffGridError(ValueError):
    """A tabulated map was queried between its grid nodes."""


class OneSidedDifferenceWarning(UserWarning):
    pass


# -- damping function --------------------------------------------------------

def _g_parts(lam: float, gamma: float, t):
    """(cosh-like, sinh-like / gtilde) pieces of G, real for either sign of gtilde^2."""
    t = np.asarray(t, dtype=float)
    disc = lam * lam - 2.0 * gamma * lam
    a = math.sqrt(abs(disc)) if disc != 0 else 0.0
    if a < 1e-8 * lam:
        # second-order series in disc around the exceptional point
        x2 = disc * t * t / 4.0
        c = 1.0 + x2 / 2.0
        s = 0.5 * t * (1.0 + x2 / 6.0)
    elif disc > 0:
        c = np.cosh(a * t / 2.0)
        s = np.sinh(a * t / 2.0) / a
    else:
        c = np.cos(a * t / 2.0)
        s = np.sin(a * t / 2.0) / a
    return c, s


def _check_rates(lam, gamma):
    if not (lam > 0 and gamma > 0):
        raise ValueError(f"rates must be positive, got lambda={lam}, gamma={gamma}")


def eval_G(lam: float, gamma: float, t):
    """Coherence factor of the vacuum-coupled two-level map.

    exp(-lam t/2) [cosh(gt t/2) + (lam/gt) sinh(gt t/2)], gt = sqrt(lam^2 - 2 gamma lam),
    continued to the oscillating branch for gamma > lam/2.
    """
    _check_rates(lam, gamma)
    if np.any(np.asarray(t) < 0):
        raise ValueError("time must be nonnegative")
    c, s = _g_parts(lam, gamma, t)
    return np.exp(-lam * np.asarray(t, dtype=float) / 2.0) * (c + lam * s)


def eval_G_derivative(lam: float, gamma: float, t):
    _check_rates(lam, gamma)
    _, s = _g_parts(lam, gamma, t)
    return -gamma * lam * np.exp(-lam * np.asarray(t, dtype=float) / 2.0) * s


# -- Lindblad generators and channels ---------------------------------------

def _as_operator(op) -> np.ndarray:
    if isinstance(op, str):
        return OPERATORS[op]
    return np.asarray(op, dtype=complex)


@dataclass(frozen=True)
class LindbladSpec:
    hamiltonian: np.ndarray
    jumps: tuple = ()
    rates: tuple = ()

    def __post_init__(self):
        h = _as_operator(self.hamiltonian)
        if np.max(np.abs(h - h.conj().T)) > 1e-12:
            raise ValueError("Hamiltonian is not Hermitian")
        jumps = tuple(_as_operator(j) for j in self.jumps)
        rates = tuple(self.rates) if self.rates else (1.0,) * len(jumps)
        if len(rates) != len(jumps):
            raise ValueError("one rate per jump operator")
        if any(r < 0 for r in rates):
            raise ValueError("jump rates must be nonnegative")
        if any(j.shape != h.shape for j in jumps):
            raise ValueError("jump operators and Hamiltonian differ in shape")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "rates", tuple(float(r) for r in rates))

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


def lindblad_transfer_generator(spec: LindbladSpec) -> np.ndarray:
    """Transfer matrix of rho -> R rho + rho R^dag + sum_k L_k rho L_k^dag."""
    r = -1j * spec.hamiltonian
    for rate, lk in zip(spec.rates, spec.jumps):
        r = r - 0.5 * rate * lk.conj().T @ lk

    def action(x):
        out = r @ x + x @ r.conj().T
        for rate, lk in zip(spec.rates, spec.jumps):
            out = out + rate * lk @ x @ lk.conj().T
        return out

    return qstate.superop_to_transfer(action, spec.dim)


PAULI_INDEX = {"0": 0, "i": 0, "x": 1, "y": 2, "z": 3}


def pauli_index(index) -> int:
    key = str(index).lower()
    if key in PAULI_INDEX:
        return PAULI_INDEX[key]
    if key in {"1", "2", "3"}:
        return int(key)
    raise ValueError(f"unknown Pauli index {index!r}")


@dataclass(frozen=True)
class PauliChannel:
    """rho -> sigma_i rho sigma_i."""

    index: int

    def __post_init__(self):
        object.__setattr__(self, "index", pauli_index(self.index))

    @property
    def dim(self) -> int:
        return 2

    @property
    def label(self) -> str:
        return "0xyz"[self.index]

    @property
    def epsilons(self) -> np.ndarray:
        """Diagonal (1, eps_x, eps_y, eps_z) of the transfer matrix."""
        eps = np.ones(4)
        if self.index:
            eps[1:] = -1.0
            eps[self.index] = 1.0
        return eps

    def transfer(self) -> np.ndarray:
        return np.diag(self.epsilons)

    def describe(self) -> dict:
        return {"kind": "pauli", "index": self.label}


@dataclass(frozen=True)
class KrausChannel:
    operators: tuple

    def __post_init__(self):
        ops = tuple(_as_operator(k) for k in self.operators)
        if not ops:
            raise ValueError("empty Kraus set")
        d = ops[0].shape[0]
        completeness = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(completeness - np.eye(d))) > 1e-12:
            raise ValueError("Kraus operators are not complete (sum K^dag K != I)")
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    def transfer(self) -> np.ndarray:
        return qstate.kraus_to_transfer(self.operators)

    def describe(self) -> dict:
        return {"kind": "kraus", "n_operators": len(self.operators)}


def amplitude_damping_kraus(p: float) -> tuple:
    """Kraus pair taking |1> to |0> with probability p."""
    k0 = np.array([[1, 0], [0, math.sqrt(1 - p)]], dtype=complex)
    k1 = np.array([[0, math.sqrt(p)], [0, 0]], dtype=complex)
    return (k0, k1)


def channel_transfer(channel) -> np.ndarray:
    return channel.transfer()


# -- timed map families ------------------------------------------------------

class TimedMap:
    """Family t -> F(t) of CPT transfer matrices with F(0) = identity.

    ``at`` and ``derivative`` accept scalar or array times and return arrays of
    shape t.shape + (d^2, d^2).
    """

    dim = 2
    has_derivative = True

    def at(self, t):
        raise NotImplementedError

    def derivative(self, t):
        raise NotImplementedError

    def on_grid(self, grid: Grid) -> np.ndarray:
        return self.at(grid.times)

    def derivative_on_grid(self, grid: Grid) -> np.ndarray:
        return self.derivative(grid.times)

    def describe(self) -> dict:
        raise NotImplementedError


def _times(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    return t


@dataclass(frozen=True)
class IdentityMap(TimedMap):
    dim: int = 2

    def at(self, t):
        t = _times(t)
        return np.broadcast_to(np.eye(self.dim ** 2), t.shape + (self.dim ** 2,) * 2).copy()

    def derivative(self, t):
        return np.zeros(_times(t).shape + (self.dim ** 2,) * 2)

    def describe(self):
        return {"kind": "identity", "dim": self.dim}


def _cos_profile(rate):
    return (lambda t: np.cos(rate * t)), (lambda t: -rate * np.sin(rate * t))


@dataclass(frozen=True)
class DephasingMap(TimedMap):
    """diag(1, D(t), D(t), 1); D defaults to cos(rate t)."""

    rate: float = 1.0
    profile: Callable | None = field(default=None, compare=False)
    profile_derivative: Callable | None = field(default=None, compare=False)
    name: str = "cos"

    def __post_init__(self):
        if self.profile is None:
            d, dd = _cos_profile(self.rate)
            object.__setattr__(self, "profile", d)
            object.__setattr__(self, "profile_derivative", dd)
        if abs(float(self.profile(0.0)) - 1.0) > 1e-12:
            raise ValueError("dephasing profile must satisfy D(0) = 1")

    @property
    def has_derivative(self):
        return self.profile_derivative is not None

    def coherence(self, t):
        d = np.asarray(self.profile(_times(t)), dtype=float)
        if np.any(np.abs(d) > 1 + 1e-12):
            raise ValueError("|D(t)| > 1: the dephasing map is not positive")
        return d

    def at(self, t):
        d = self.coherence(t)
        out = np.zeros(d.shape + (4, 4))
        out[..., 0, 0] = out[..., 3, 3] = 1.0
        out[..., 1, 1] = out[..., 2, 2] = d
        return out

    def derivative(self, t):
        if self.profile_derivative is None:
            raise ValueError("no derivative registered for this dephasing profile")
        dd = np.asarray(self.profile_derivative(_times(t)), dtype=float)
        out = np.zeros(dd.shape + (4, 4))
        out[..., 1, 1] = out[..., 2, 2] = dd
        return out

    def describe(self):
        return {"kind": "dephasing", "profile": self.name, "lambda": self.rate}


@dataclass(frozen=True)
class DampingMap(TimedMap):
    """diag(1, G, G, G^2) + corner(G^2 - 1) with G from ``eval_G``."""

    lam: float
    gamma: float

    def __post_init__(self):
        _check_rates(self.lam, self.gamma)

    def coherence(self, t):
        return eval_G(self.lam, self.gamma, _times(t))

    def at(self, t):
        g = self.coherence(t)
        out = np.zeros(g.shape + (4, 4))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = out[..., 2, 2] = g
        out[..., 3, 3] = g * g
        out[..., 3, 0] = g * g - 1.0
        return out

    def derivative(self, t):
        t = _times(t)
        g = eval_G(self.lam, self.gamma, t)
        dg = eval_G_derivative(self.lam, self.gamma, t)
        out = np.zeros(g.shape + (4, 4))
        out[..., 1, 1] = out[..., 2, 2] = dg
        out[..., 3, 3] = out[..., 3, 0] = 2.0 * g * dg
        return out

    def describe(self):
        return {"kind": "damping", "lambda": self.lam, "gamma": self.gamma}


@dataclass(frozen=True, eq=False)
class SemigroupMap(TimedMap):
    """exp(t L) for a Lindblad generator L."""

    lindblad: LindbladSpec

    def __post_init__(self):
        gen = lindblad_transfer_generator(self.lindblad)
        object.__setattr__(self, "generator", gen)
        vals, vecs = np.linalg.eig(gen)
        if np.linalg.cond(vecs) < 1e6:
            object.__setattr__(self, "_eig", (vals, vecs, np.linalg.inv(vecs)))
        else:
            object.__setattr__(self, "_eig", None)

    @property
    def dim(self):
        return self.lindblad.dim

    def at(self, t):
        t = _times(t)
        if self._eig is None:
            return expm(t[..., None, None] * self.generator)
        vals, vecs, inv = self._eig
        out = np.einsum("ik,...k,kj->...ij", vecs, np.exp(t[..., None] * vals), inv)
        return out.real

    def derivative(self, t):
        return self.generator @ self.at(t)

    def describe(self):
        return {"kind": "semigroup", "dim": self.dim,
                "generator": np.round(self.generator, 15).tolist()}


@dataclass(frozen=True, eq=False)
class TabulatedMap(TimedMap):
    """F(t) given on a uniform grid; derivatives by second-order finite differences."""

    grid: Grid
    maps: np.ndarray
    interpolate: bool = False

    def __post_init__(self):
        maps = np.asarray(self.maps, dtype=float)
        if maps.shape[0] != self.grid.steps + 1:
            raise ValueError("one map per grid node required")
        if np.max(np.abs(maps[0] - np.eye(maps.shape[1]))) > 1e-12:
            raise ValueError("tabulated family must start at the identity")
        maps.setflags(write=False)
        object.__setattr__(self, "maps", maps)

    @property
    def dim(self):
        return qstate.dim_from_size(self.maps.shape[1])

    def _index(self, t):
        t = _times(t)
        x = t / self.grid.h
        idx = np.rint(x).astype(int)
        exact = np.abs(x - idx) < 1e-9 * np.maximum(1.0, x)
        if np.any(idx > self.grid.steps):
            raise OffGridError("time beyond the tabulated horizon")
        return x, idx, exact

    def at(self, t):
        x, idx, exact = self._index(t)
        if np.all(exact):
            return self.maps[idx]
        if not self.interpolate:
            raise OffGridError("tabulated map queried between grid nodes")
        lo = np.minimum(np.floor(x).astype(int), self.grid.steps - 1)
        w = (x - lo)[..., None, None]
        return (1 - w) * self.maps[lo] + w * self.maps[lo + 1]

    def derivative(self, t):
        x, idx, exact = self._index(t)
        if not np.all(exact):
            raise OffGridError("finite differences only available at grid nodes")
        if np.any((idx == 0) | (idx == self.grid.steps)):
            warnings.warn("one-sided difference used at the grid boundary",
                          OneSidedDifferenceWarning, stacklevel=2)
        return np.gradient(self.maps, self.grid.h, axis=0, edge_order=2)[idx]

    def describe(self):
        return {"kind": "tabulated", "grid": self.grid.describe()}


def eval_F(spec: TimedMap, t):
    return spec.at(t)


def eval_F_derivative(spec: TimedMap, t, h_fd: float | None = None):
    """Analytic derivative for built-ins; central differences of width ``h_fd`` otherwise."""
    if h_fd is None:
        return spec.derivative(t)
    t = np.asarray(t, dtype=float)
    if np.any(t < h_fd):
        warnings.warn("forward difference used near t = 0", OneSidedDifferenceWarning, stacklevel=2)
        fwd = (-3 * spec.at(t) + 4 * spec.at(t + h_fd) - spec.at(t + 2 * h_fd)) / (2 * h_fd)
        cen = (spec.at(t + h_fd) - spec.at(np.maximum(t - h_fd, 0))) / (2 * h_fd)
        return np.where((t < h_fd)[..., None, None], fwd, cen)
    return (spec.at(t + h_fd) - spec.at(t - h_fd)) / (2 * h_fd)
