"""Trace-distance witnesses of non-Markovianity.

Growth is judged on tabulated series by forward differences: a step counts
as growth when D_{i+1} - D_i > eps_growth, and the accumulated measure is the
grid sum of positive increments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from pwdyn import qstate
from pwdyn.blocks import DampingMap, DephasingMap
from pwdyn.engines.closed_form import scalar_functional
from pwdyn.engines.process import MapTrajectory
from pwdyn.quadrature import Grid
from pwdyn.renewal import WaitingTimeDist

EPS_GROWTH = 1e-9


@dataclass(frozen=True, eq=False)
class StatePair:
    rho1: np.ndarray
    rho2: np.ndarray
    label: str = ""

    def __post_init__(self):
        r1 = qstate.validate_state(self.rho1)
        r2 = qstate.validate_state(self.rho2)
        if r1.shape != r2.shape:
            raise qstate.DimensionError("states of different dimension")
        object.__setattr__(self, "rho1", r1)
        object.__setattr__(self, "rho2", r2)

    @property
    def delta_p(self) -> float:
        """Difference of the <0|rho|0> populations (qubit)."""
        return float((self.rho1[0, 0] - self.rho2[0, 0]).real)

    @property
    def delta_c(self) -> complex:
        """Difference of the <0|rho|1> coherences (qubit)."""
        return complex(self.rho1[0, 1] - self.rho2[0, 1])

    def difference_vector(self) -> np.ndarray:
        return qstate.to_pauli_vec(self.rho1 - self.rho2)


def axis_pairs() -> list[StatePair]:
    """Antipodal pure-state pairs along x, y and z."""
    out = []
    for name, v in (("x", (1, 0, 0)), ("y", (0, 1, 0)), ("z", (0, 0, 1))):
        out.append(StatePair(qstate.bloch_state(*v), qstate.bloch_state(*(-np.array(v))), f"axis_{name}"))
    return out


def random_pairs(n: int, seed, dim: int = 2) -> list[StatePair]:
    """Seeded random orthogonal pure-state pairs."""
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n):
        g = rng.normal(size=(dim, 2)) + 1j * rng.normal(size=(dim, 2))
        q, _ = np.linalg.qr(g)
        pairs.append(StatePair(qstate.pure_state(q[:, 0]), qstate.pure_state(q[:, 1]), f"random_{i}"))
    return pairs


def trace_distance_series(traj: MapTrajectory, pair: StatePair) -> np.ndarray:
    """D(Lambda(t) rho1, Lambda(t) rho2) on every node."""
    dv = pair.difference_vector()
    if traj.maps.shape[1] != dv.size:
        raise qstate.DimensionError("trajectory and state pair differ in dimension")
    basis = qstate.operator_basis(qstate.dim_from_size(dv.size))
    ops = np.einsum("ni,iab->nab", traj.maps @ dv, basis)
    ops = 0.5 * (ops + ops.conj().transpose(0, 2, 1))
    return 0.5 * np.abs(np.linalg.eigvalsh(ops)).sum(axis=1)


@dataclass(frozen=True)
class Growth:
    intervals: tuple  # (t_start, t_end, max increment)
    nm_measure: float
    increments: np.ndarray = field(repr=False)

    @property
    def detected(self) -> bool:
        return bool(self.intervals)

    @property
    def first_start(self) -> float:
        return self.intervals[0][0] if self.intervals else math.inf


def detect_growth(series: np.ndarray, times: np.ndarray | None = None,
                  eps_growth: float = EPS_GROWTH) -> Growth:
    """Maximal runs of forward increments above ``eps_growth``."""
    if not eps_growth > 0:
        raise ValueError("eps_growth must be positive")
    series = np.asarray(series, dtype=float)
    times = np.arange(len(series), dtype=float) if times is None else np.asarray(times)
    inc = np.diff(series)
    grow = inc > eps_growth
    intervals = []
    if grow.any():
        edges = np.diff(np.concatenate([[0], grow.astype(int), [0]]))
        for a, b in zip(np.nonzero(edges == 1)[0], np.nonzero(edges == -1)[0]):
            intervals.append((float(times[a]), float(times[b]), float(inc[a:b].max())))
    return Growth(tuple(intervals), float(np.clip(inc, 0.0, None).sum()), inc)


def is_diagonal_plus_corner(maps: np.ndarray, tol: float = 1e-12) -> bool:
    if maps.shape[1] != 4:
        return False
    mask = np.ones((4, 4), dtype=bool)
    np.fill_diagonal(mask, False)
    mask[3, 0] = False
    return bool(np.max(np.abs(maps[:, mask]), initial=0.0) <= tol)


@dataclass(frozen=True, eq=False)
class WitnessFunctions:
    series: dict
    growth: dict
    method: str

    @property
    def detected(self) -> bool:
        return any(g.detected for g in self.growth.values())


def witness_functions(traj: MapTrajectory, eps_growth: float = EPS_GROWTH) -> WitnessFunctions:
    """|X|, |Y|, |Z| of a diagonal-plus-corner trajectory; axis-pair distances otherwise."""
    t = traj.times
    if is_diagonal_plus_corner(traj.maps):
        series = {k: np.abs(traj.maps[:, i, i]) for k, i in (("X", 1), ("Y", 2), ("Z", 3))}
        method = "diagonal"
    else:
        series = {p.label: trace_distance_series(traj, p) for p in axis_pairs()}
        method = "axis_pairs"
    growth = {k: detect_growth(v, t, eps_growth) for k, v in series.items()}
    return WitnessFunctions(series, growth, method)


@dataclass(frozen=True, eq=False)
class WitnessReport:
    grid: Grid
    D_values: dict
    growth: dict
    nm_measure: float
    detected: bool
    best_pair: str

    @property
    def growth_intervals(self) -> dict:
        return {k: g.intervals for k, g in self.growth.items()}


def pair_search(traj: MapTrajectory, n_random: int = 32, seed=0,
                eps_growth: float = EPS_GROWTH) -> WitnessReport:
    """Axis pairs plus ``n_random`` seeded random orthogonal pure pairs."""
    if n_random < 0:
        raise ValueError("n_random must be nonnegative")
    dim = qstate.dim_from_size(traj.maps.shape[1])
    pairs = (axis_pairs() if dim == 2 else []) + random_pairs(n_random, seed, dim)
    d_values, growth = {}, {}
    for pair in pairs:
        d_values[pair.label] = trace_distance_series(traj, pair)
        growth[pair.label] = detect_growth(d_values[pair.label], traj.times, eps_growth)
    best = max(growth, key=lambda k: growth[k].nm_measure)
    return WitnessReport(traj.grid, d_values, growth, growth[best].nm_measure,
                         any(g.detected for g in growth.values()), best)


# -- parameter surfaces --------------------------------------------------------

SURFACE_LAYERS = {"dephasing": ("abs_d_minus", "abs_q"), "damping": ("abs_g_minus", "abs_h_plus")}


@dataclass(frozen=True, eq=False)
class SurfaceData:
    example: str
    lambda_t: np.ndarray
    ratios: np.ndarray
    layers: dict  # name -> (n_ratio, n_t) array
    growth: dict  # name -> list of Growth per ratio, judged on the fine internal grid
    params: dict


def default_t_grid(t_max: float = 15.0, nodes: int = 150) -> Grid:
    return Grid.from_horizon(t_max, nodes - 1)


def default_ratio_grid(lo: float = 0.25, hi: float = 25.0, n: int = 40) -> np.ndarray:
    return np.geomspace(lo, hi, n)


def _fine_grid(display: Grid, rate: float, cells_per_unit: float) -> tuple[Grid, int]:
    sub = max(1, math.ceil(display.h * rate * cells_per_unit))
    return Grid(display.h / sub, display.steps * sub), sub


def surface_column(example: str, ratio: float, t_grid: Grid, lam: float = 1.0,
                   gamma_ratio: float = 3.0, cells_per_unit: float = 50.0,
                   eps_growth: float = EPS_GROWTH) -> tuple[dict, dict]:
    """Layers on ``t_grid`` (in units of lambda t) and their growth on a fine grid."""
    if not ratio > 0:
        raise ValueError("ratios must be positive")
    rate = ratio * lam
    display = Grid(t_grid.h / lam, t_grid.steps)
    fine, sub = _fine_grid(display, max(rate, lam), cells_per_unit)
    if example == "dephasing":
        f = WaitingTimeDist.erlang(3, rate)
        d_minus = scalar_functional(-1, DephasingMap(lam).coherence, f, fine, "d-")
        q = scalar_functional(1, np.ones(fine.steps + 1), f, fine, "q")
        series = {"abs_d_minus": np.abs(d_minus.values), "abs_q": np.abs(q.values)}
    elif example == "damping":
        f = WaitingTimeDist.erlang(2, rate)
        G = DampingMap(lam, gamma_ratio * lam).coherence(fine.times)
        # Pauli x channel: X = g- and Z = h+
        g_minus = scalar_functional(-1, G, f, fine, "g-")
        h_plus = scalar_functional(1, G * G, f, fine, "h+")
        series = {"abs_g_minus": np.abs(g_minus.values), "abs_h_plus": np.abs(h_plus.values)}
    else:
        raise ValueError(f"unknown example {example!r}")
    lam_t = lam * fine.times
    growth = {k: detect_growth(v, lam_t, eps_growth) for k, v in series.items()}
    layers = {k: v[::sub] for k, v in series.items()}
    return layers, growth


def sweep_surface(example: str, t_grid: Grid | None = None, ratio_grid=None, lam: float = 1.0,
                  gamma_ratio: float = 3.0, workers: int = 1, **kw) -> SurfaceData:
    """Tabulate the witness layers of one example over (lambda t, Gamma/lambda)."""
    from concurrent.futures import ThreadPoolExecutor

    if example not in SURFACE_LAYERS:
        raise ValueError(f"unknown example {example!r}")
    t_grid = default_t_grid() if t_grid is None else t_grid
    ratios = default_ratio_grid() if ratio_grid is None else np.asarray(ratio_grid, dtype=float)
    if np.any(ratios <= 0):
        raise ValueError("ratios must be positive")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        cols = list(pool.map(lambda r: surface_column(example, r, t_grid, lam, gamma_ratio, **kw), ratios))
    names = SURFACE_LAYERS[example]
    layers = {n: np.array([c[0][n] for c in cols]) for n in names}
    growth = {n: [c[1][n] for c in cols] for n in names}
    params = {"example": example, "lambda": lam,
              "waiting_time": {"kind": "erlang", "stages": 3 if example == "dephasing" else 2,
                               "rate_convention": "per-stage rate = ratio * lambda"},
              "channel": "pauli x"}
    if example == "damping":
        params["gamma_over_lambda"] = gamma_ratio
    return SurfaceData(example, t_grid.times, ratios, layers, growth, params)
