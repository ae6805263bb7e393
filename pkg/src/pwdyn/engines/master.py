"""Time-local integration of the memory-kernel master equations."""
from __future__ import annotations

import numpy as np

from pwdyn import qstate
from pwdyn.blocks import LindbladSpec, SemigroupMap
from pwdyn.engines.process import MapTrajectory, ProcessSpec, ScalarSolution, StateSeries
from pwdyn.engines.volterra import EngineError, check_step
from pwdyn.quadrature import Grid, convolve_matrix, solve_volterra
from pwdyn.renewal import WaitingTimeDist, weights_for


def integrate_vide(grid: Grid, A: np.ndarray, K: np.ndarray, b: np.ndarray, y0: np.ndarray) -> np.ndarray:
    """Solve y' = A y + int_0^t K(t-s) y(s) ds + b(t) with the implicit trapezoid rule.

    The memory integral also uses the trapezoid rule, so the scheme is second
    order; the implicit part is linear and solved exactly at every step.
    """
    h = grid.h
    n_nodes = grid.steps + 1
    d = A.shape[0]
    y = np.empty((n_nodes, d))
    y[0] = y0
    kcat = np.ascontiguousarray(K.transpose(1, 0, 2).reshape(d, n_nodes * d))
    yrev = np.zeros(n_nodes * d)
    yrev[(n_nodes - 1) * d:] = y0
    lhs = np.eye(d) - 0.5 * h * (A + 0.5 * h * K[0])
    lhs_inv = np.linalg.inv(lhs)
    step_op = A + 0.5 * h * K[0]
    phi = A @ y0 + b[0]
    n_steps = n_nodes - 1
    for n1 in range(1, n_nodes):
        mem = 0.5 * h * (K[n1] @ y0)
        if n1 > 1:
            mem = mem + h * (kcat[:, d:n1 * d] @ yrev[(n_steps - n1 + 1) * d:n_steps * d])
        yn = lhs_inv @ (y[n1 - 1] + 0.5 * h * (phi + mem + b[n1]))
        y[n1] = yn
        yrev[(n_steps - n1) * d:(n_steps - n1 + 1) * d] = yn
        phi = step_op @ yn + mem + b[n1]
    return y


def _master_operators(p: ProcessSpec):
    if not p.F.has_derivative:
        raise EngineError("master-equation route needs dF/dt")
    check_step(p)
    t = p.grid.times
    F = p.F.on_grid(p.grid)
    dF = p.F.derivative_on_grid(p.grid)
    E = p.E.transfer()
    f, df, g = p.f.density(t), p.f.density_derivative(t), p.f.survival(t)
    kernel = (df[:, None, None] * F + f[:, None, None] * dF) @ E
    inhom = -f[:, None, None] * F + g[:, None, None] * dF
    return p.f.f0 * E, kernel, inhom


def integrate_master_equation(p: ProcessSpec, rho0: np.ndarray) -> StateSeries:
    """rho' = int K(t-s) E rho(s) ds + I(t) rho(0), K = (fF)' + f(0) delta, I = (gF)'.

    The point mass of K is applied as the instantaneous term f(0) E rho(t).
    """
    A, kernel, inhom = _master_operators(p)
    y0 = qstate.to_pauli_vec(qstate.validate_state(rho0))
    y = integrate_vide(p.grid, A, kernel, inhom @ y0, y0)
    return StateSeries(p.grid, y, {"engine": "master_equation", "h": p.grid.h})


def master_equation_map(p: ProcessSpec) -> MapTrajectory:
    """Transfer matrices from the master equation, one basis column at a time.

    The equation is linear in rho(0), so column j of Lambda(t) is the solution
    started from the j-th basis operator.
    """
    A, kernel, inhom = _master_operators(p)
    d2 = A.shape[0]
    cols = [integrate_vide(p.grid, A, kernel, inhom[:, :, j], np.eye(d2)[j]) for j in range(d2)]
    return MapTrajectory(p.grid, np.stack(cols, axis=2), {"engine": "master_equation", "h": p.grid.h})


def renewal_kernel_k(f: WaitingTimeDist, grid: Grid) -> tuple[ScalarSolution, float]:
    """Regular part of k with k^ = f^/g^, plus its point mass f(0) at t = 0.

    The regular part solves k = f' + f(0) f + f * k.
    """
    t = grid.times
    rhs = f.density_derivative(t) + f.f0 * f.density(t)
    k = solve_volterra(weights_for(f, grid), np.ones(grid.steps + 1), rhs, sign=1.0)
    return ScalarSolution(grid, k, "k"), f.f0


def integrate_budini(lindblad: LindbladSpec, E, f: WaitingTimeDist, rho0: np.ndarray,
                     grid: Grid) -> StateSeries:
    """rho' = L rho + int k(t-s) e^{(t-s)L} (E - 1) rho(s) ds."""
    semigroup = SemigroupMap(lindblad)
    L = semigroup.generator
    Et = E.transfer()
    jump = Et - np.eye(len(Et))
    k, point_mass = renewal_kernel_k(f, grid)
    kernel = k.values[:, None, None] * (semigroup.on_grid(grid) @ jump)
    y0 = qstate.to_pauli_vec(qstate.validate_state(rho0))
    b = np.zeros((grid.steps + 1, len(Et)))
    y = integrate_vide(grid, L + point_mass * jump, kernel, b, y0)
    return StateSeries(grid, y, {"engine": "budini", "h": grid.h})


def reset_equation_residual(F, f: WaitingTimeDist, trajectory: MapTrajectory) -> np.ndarray:
    """Max-norm mismatch per node of Lambda' = int f F Lambda'(s) ds + g F' (E = identity)."""
    grid = trajectory.grid
    dlam = np.gradient(trajectory.maps, grid.h, axis=0, edge_order=2)
    Fg = F.on_grid(grid)
    g = f.survival(grid.times)
    rhs = convolve_matrix(weights_for(f, grid), Fg, dlam) + g[:, None, None] * F.derivative_on_grid(grid)
    return np.max(np.abs(dlam - rhs), axis=(1, 2))
