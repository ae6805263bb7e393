"""Value types shared by the evolution engines."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pwdyn import qstate
from pwdyn.blocks import KrausChannel, PauliChannel, TimedMap
from pwdyn.quadrature import Grid
from pwdyn.renewal import WaitingTimeDist


@dataclass(frozen=True, eq=False)
class ProcessSpec:
    """Inter-jump family F, jump channel E and waiting-time law f on a time grid."""

    F: TimedMap
    E: PauliChannel | KrausChannel
    f: WaitingTimeDist | None  # None: no jumps
    grid: Grid

    def __post_init__(self):
        if self.F.dim != self.E.dim:
            raise ValueError(f"F acts on C^{self.F.dim} but E on C^{self.E.dim}")

    @property
    def dim(self) -> int:
        return self.F.dim

    def describe(self) -> dict:
        f = self.f.describe() if self.f else {"kind": "none"}
        return {"F": self.F.describe(), "E": self.E.describe(), "f": f, "grid": self.grid.describe()}


@dataclass(frozen=True, eq=False)
class MapTrajectory:
    grid: Grid
    maps: np.ndarray
    provenance: dict = field(default_factory=dict)
    stderr: np.ndarray | None = None

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def apply(self, rho0: np.ndarray) -> np.ndarray:
        """Pauli-vector series Lambda(t) rho0, shape (N+1, d^2)."""
        return self.maps @ qstate.to_pauli_vec(rho0)

    def states(self, rho0: np.ndarray) -> np.ndarray:
        basis = qstate.operator_basis(qstate.dim_from_size(self.maps.shape[1]))
        return np.einsum("ni,iab->nab", self.apply(rho0), basis)

    def cpt_check(self, tol_psd: float = qstate.PSD_TOL, tol_tp: float = qstate.TP_TOL):
        min_eig, tp = qstate.cpt_report_batch(self.maps)
        return bool(min_eig.min() >= -tol_psd and tp.max() <= tol_tp), float(min_eig.min()), float(tp.max())


@dataclass(frozen=True, eq=False)
class ScalarSolution:
    grid: Grid
    values: np.ndarray
    label: str

    @property
    def times(self) -> np.ndarray:
        return self.grid.times


@dataclass(frozen=True, eq=False)
class StateSeries:
    """Operator-basis coefficients rho(t_n), shape (N+1, d^2)."""

    grid: Grid
    coeffs: np.ndarray
    provenance: dict = field(default_factory=dict)

    def operators(self) -> np.ndarray:
        basis = qstate.operator_basis(qstate.dim_from_size(self.coeffs.shape[1]))
        return np.einsum("ni,iab->nab", self.coeffs, basis)
