"""Scalar-functional assembly of the qubit example maps.

For a Pauli channel E = diag(1, e_x, e_y, e_z) and an F(t) that is diagonal
(plus the bottom-left corner for the damping family) every diagonal entry of
Lambda obeys its own scalar renewal equation

    x(t) - e_i int_0^t f(t-s) M_i(t-s) x(s) ds = g(t) M_i(t),

i.e. x = L^-[M_i] for e_i = +1 and x = L^+[M_i] for e_i = -1.
"""
from __future__ import annotations

import numpy as np

from pwdyn.blocks import DampingMap, DephasingMap, PauliChannel
from pwdyn.engines.process import MapTrajectory, ProcessSpec, ScalarSolution
from pwdyn.engines.volterra import EngineError, check_step
from pwdyn.quadrature import Grid, integrate_lagged, solve_volterra
from pwdyn.renewal import WaitingTimeDist, weights_for


def scalar_functional(sign: int, M, f: WaitingTimeDist, grid: Grid, label: str = "") -> ScalarSolution:
    """Solve x + sign * (f M) * x = g M; ``M`` is a callable or a table on the grid."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    m = np.asarray(M(grid.times) if callable(M) else M, dtype=float)
    if m.shape != (grid.steps + 1,):
        raise ValueError("M must be tabulated on every grid node")
    if grid.h * f.f0 >= 2.0:
        raise EngineError(f"step h={grid.h} too coarse for f(0)={f.f0}")
    g = f.survival(grid.times)
    x = solve_volterra(weights_for(f, grid), m, g * m, sign=-float(sign))
    return ScalarSolution(grid, x, label)


def _sign_for(eps: float) -> int:
    return -1 if eps > 0 else 1


def _label(prefix: str, eps: float) -> str:
    return prefix + ("-" if eps > 0 else "+")


def _require_pauli(channel) -> PauliChannel:
    if not isinstance(channel, PauliChannel):
        raise TypeError("closed-form assembly needs a Pauli channel")
    return channel


def assemble_lambda_dephasing(D, f: WaitingTimeDist, channel: PauliChannel, grid: Grid) -> MapTrajectory:
    """diag(1, X, Y, Z) with X, Y in {d+, d-} and Z in {1, q}."""
    eps = _require_pauli(channel).epsilons
    d = D.coherence if isinstance(D, DephasingMap) else D
    x = scalar_functional(_sign_for(eps[1]), d, f, grid, _label("d", eps[1]))
    y = x if eps[2] == eps[1] else scalar_functional(_sign_for(eps[2]), d, f, grid, _label("d", eps[2]))
    z = _population(eps[3], f, grid)
    maps = np.zeros((grid.steps + 1, 4, 4))
    maps[:, 0, 0] = 1.0
    maps[:, 1, 1], maps[:, 2, 2], maps[:, 3, 3] = x.values, y.values, z.values
    prov = {"engine": "closed_form", "example": "dephasing", "h": grid.h,
            "entries": {"X": x.label, "Y": y.label, "Z": z.label}}
    return MapTrajectory(grid, maps, prov)


def _population(eps_z: float, f, grid) -> ScalarSolution:
    if eps_z > 0:
        return ScalarSolution(grid, np.ones(grid.steps + 1), "1")
    return scalar_functional(1, np.ones(grid.steps + 1), f, grid, "q")


def corner_block(G2: np.ndarray, eps_z: float, f: WaitingTimeDist, grid: Grid) -> np.ndarray:
    """(Lambda_00, Lambda_30; Lambda_33) from the invariant {0, 3} block of the matrix equation."""
    n = grid.steps + 1
    F = np.zeros((n, 2, 2))
    F[:, 0, 0] = 1.0
    F[:, 1, 0] = G2 - 1.0
    F[:, 1, 1] = G2
    E = np.diag([1.0, eps_z])
    g = f.survival(grid.times)
    return solve_volterra(weights_for(f, grid), F @ E, g[:, None, None] * F, sign=1.0)


def corner_scalar(G2: np.ndarray, eps_z: float, f: WaitingTimeDist, grid: Grid) -> np.ndarray:
    """W from its own scalar equation W - e_z (f G^2) * W = g G^2 - 1 + int_0^t f G^2."""
    g = f.survival(grid.times)
    pw = weights_for(f, grid)
    # int_0^t f (G^2 - 1) on the grid, so the discrete equation matches the matrix solve
    rhs = g * G2 - g + integrate_lagged(pw, G2) - pw.cumulative()
    return solve_volterra(pw, G2, rhs, sign=eps_z)


def assemble_lambda_damping(lam: float, gamma: float, f: WaitingTimeDist, channel: PauliChannel,
                            grid: Grid) -> MapTrajectory:
    """diag(1, X, Y, Z) + corner(W), X, Y in {g+, g-}, Z in {h+, h-}."""
    eps = _require_pauli(channel).epsilons
    G = DampingMap(lam, gamma).coherence(grid.times)
    G2 = G * G
    x = scalar_functional(_sign_for(eps[1]), G, f, grid, _label("g", eps[1]))
    y = x if eps[2] == eps[1] else scalar_functional(_sign_for(eps[2]), G, f, grid, _label("g", eps[2]))
    z = scalar_functional(_sign_for(eps[3]), G2, f, grid, _label("h", eps[3]))
    block = corner_block(G2, eps[3], f, grid)
    maps = np.zeros((grid.steps + 1, 4, 4))
    maps[:, 0, 0] = 1.0
    maps[:, 1, 1], maps[:, 2, 2], maps[:, 3, 3] = x.values, y.values, z.values
    maps[:, 3, 0] = block[:, 1, 0]
    prov = {"engine": "closed_form", "example": "damping", "h": grid.h,
            "entries": {"X": x.label, "Y": y.label, "Z": z.label, "W": "corner"}}
    return MapTrajectory(grid, maps, prov)


def assemble(p: ProcessSpec) -> MapTrajectory:
    """Closed-form route for a ProcessSpec built from the two qubit examples."""
    check_step(p)
    if isinstance(p.F, DephasingMap):
        return assemble_lambda_dephasing(p.F, p.f, p.E, p.grid)
    if isinstance(p.F, DampingMap):
        return assemble_lambda_damping(p.F.lam, p.F.gamma, p.f, p.E, p.grid)
    raise TypeError(f"no closed form for {type(p.F).__name__}")
