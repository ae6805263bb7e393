"""Deterministic map solver for Lambda = g F + int f F E Lambda."""
from __future__ import annotations

import numpy as np

from pwdyn.engines.process import MapTrajectory, ProcessSpec
from pwdyn.renewal import weights_for


class EngineError(RuntimeError):
    pass


def check_step(p: ProcessSpec) -> None:
    if p.grid.h * p.f.f0 >= 2.0:
        raise EngineError(f"step h={p.grid.h} too coarse: need h < 2/f(0) = {2.0 / p.f.f0}")


def solve_volterra_map(p: ProcessSpec) -> MapTrajectory:
    """Lambda(t) on the grid by forward product-trapezoidal marching (O(h^2))."""
    from pwdyn.quadrature import solve_volterra

    check_step(p)
    F = p.F.on_grid(p.grid)
    E = p.E.transfer()
    g = p.f.survival(p.grid.times)
    try:
        maps = solve_volterra(weights_for(p.f, p.grid), F @ E, g[:, None, None] * F, sign=1.0)
    except np.linalg.LinAlgError as exc:
        raise EngineError(str(exc)) from exc
    return MapTrajectory(p.grid, maps, {"engine": "volterra", "h": p.grid.h})
