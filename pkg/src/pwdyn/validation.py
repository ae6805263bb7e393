"""Self-check suite behind ``pwdyn validate``.

Every check compares an engine against an independent oracle and reports the
observed error next to the required tolerance.  ``quick`` runs unit-level
oracles on coarse grids; ``full`` adds Monte Carlo cross-checks, fine-grid
master-equation runs and the h-halving convergence study.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import expm

from pwdyn import blocks, qstate, witness
from pwdyn.engines import (ProcessSpec, assemble, integrate_budini, master_equation_map,
                           renewal_kernel_k, reset_equation_residual, simulate_monte_carlo,
                           solve_volterra_map)
from pwdyn.quadrature import Grid
from pwdyn.renewal import WaitingTimeDist, counting_probabilities, counting_tail, parity_q

BUILTIN_WAITS = (WaitingTimeDist.exponential(1.0), WaitingTimeDist.erlang(2, 1.5),
                 WaitingTimeDist.erlang(3, 2.0))


@dataclass
class Check:
    name: str
    observed: float
    required: float
    passed: bool
    relation: str = "<="
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def _le(name, observed, required):
    observed = float(observed)
    return Check(name, observed, required, bool(observed <= required))


def dephasing_lindblad(kappa: float = 1.0) -> blocks.LindbladSpec:
    """Pure dephasing with coherence decay e^{-2 kappa t}."""
    return blocks.LindbladSpec(np.zeros((2, 2)), (blocks.OPERATORS["sz"],), (kappa,))


def amplitude_lindblad(rate: float = 0.7, omega: float = 0.4) -> blocks.LindbladSpec:
    return blocks.LindbladSpec(0.5 * omega * blocks.OPERATORS["sx"], (blocks.OPERATORS["sm"],), (rate,))


# -- oracle checks -------------------------------------------------------------

def check_pauli_roundtrip(n: int = 200, seed: int = 1) -> Check:
    rng = np.random.default_rng(seed)
    err = 0.0
    for _ in range(n):
        rho = qstate.random_state(2, rng)
        err = max(err, np.abs(qstate.from_pauli_vec(qstate.to_pauli_vec(rho)) - rho).max())
    return _le("pauli_roundtrip", err, 1e-12)


def check_pauli_channels() -> Check:
    """Diagonal Pauli transfer matrices against the Kraus construction sigma_i rho sigma_i."""
    err = max(np.abs(blocks.PauliChannel(i).transfer() - qstate.kraus_to_transfer([qstate.PAULIS[i]])).max()
              for i in range(4))
    return _le("pauli_channel_vs_kraus", err, 1e-12)


def check_counting(h: float = 1e-2) -> Check:
    w = WaitingTimeDist.erlang(2, 1.5)
    grid = Grid.with_step(5.0, h)
    table = counting_probabilities(w, grid, 40)
    err = np.abs(table.p.sum(axis=0) + counting_tail(w, grid.times, 40) - 1).max()
    return _le("counting_normalization", err, 1e-10)


def check_parity(h: float) -> list[Check]:
    out = []
    grid = Grid.with_step(5.0, h)
    worst = 0.0
    for w in BUILTIN_WAITS:
        worst = max(worst, np.abs(parity_q(w, grid) - counting_probabilities(w, grid, 40).alternating_sum()).max())
    out.append(_le("parity_vs_alternating_sum", worst, 1e-8))
    q = parity_q(WaitingTimeDist.exponential(1.0), grid)
    out.append(_le(f"parity_exponential_h{h:g}", np.abs(q - np.exp(-2 * grid.times)).max(),
                   1e-8 if h <= 2e-4 else 1e-6))
    return out


def _specs():
    x, z = blocks.PauliChannel("x"), blocks.PauliChannel("z")
    kraus = blocks.KrausChannel(blocks.amplitude_damping_kraus(0.3))
    return [
        (blocks.DephasingMap(1.0), x, WaitingTimeDist.erlang(3, 1.5)),
        (blocks.DampingMap(1.0, 3.0), x, WaitingTimeDist.erlang(2, 1.5)),
        (blocks.DampingMap(1.0, 0.5), z, WaitingTimeDist.exponential(2.0)),
        (blocks.SemigroupMap(amplitude_lindblad()), kraus, WaitingTimeDist.erlang(2, 1.0)),
        (blocks.DampingMap(1.0, 2.0), kraus, WaitingTimeDist.exponential(1.0)),
    ]


def check_volterra_cpt(h: float = 1e-2) -> Check:
    grid = Grid.with_step(10.0, h)
    worst_psd, worst_tp = 0.0, 0.0
    for F, E, f in _specs():
        _, mn, tp = solve_volterra_map(ProcessSpec(F, E, f, grid)).cpt_check()
        worst_psd = min(worst_psd, mn)
        worst_tp = max(worst_tp, tp)
    # one number: the larger of the two violations relative to its tolerance
    score = max(-worst_psd / qstate.PSD_TOL, worst_tp / qstate.TP_TOL)
    return Check("volterra_cpt", score, 1.0, bool(score <= 1.0))


def check_semigroup_recovery(h: float) -> Check:
    grid = Grid.with_step(5.0, h)
    F = blocks.SemigroupMap(dephasing_lindblad())
    exact = F.on_grid(grid)
    err = 0.0
    for f in BUILTIN_WAITS:
        err = max(err, np.abs(solve_volterra_map(ProcessSpec(F, blocks.PauliChannel("0"), f, grid)).maps
                              - exact).max())
    return _le(f"semigroup_recovery_h{h:g}", err, 1e-6)


def check_closed_form(h: float = 1e-2) -> Check:
    grid = Grid.with_step(5.0, h)
    err = 0.0
    for F in (blocks.DephasingMap(1.0), blocks.DampingMap(1.0, 3.0), blocks.DampingMap(1.0, 0.3)):
        for idx in "0xyz":
            for f in BUILTIN_WAITS:
                p = ProcessSpec(F, blocks.PauliChannel(idx), f, grid)
                err = max(err, np.abs(assemble(p).maps - solve_volterra_map(p).maps).max())
    return _le("closed_form_vs_volterra", err, 1e-8)


def check_threshold(h: float) -> Check:
    """Jump-free damping family: Markovian below gamma/lambda = 1/2, witnessed above."""
    grid = Grid.with_step(20.0, h)
    wrong = 0
    for ratio, expect in ((0.1, False), (0.4, False), (0.6, True), (1.0, True), (3.0, True)):
        traj = _jump_free(blocks.DampingMap(1.0, ratio), grid)
        wrong += witness.witness_functions(traj).detected != expect
    return Check("markovianity_threshold", float(wrong), 0.0, wrong == 0, "==")


def _jump_free(F, grid):
    from pwdyn.engines import MapTrajectory
    return MapTrajectory(grid, F.on_grid(grid), {"engine": "jump_free"})


def check_budini_kernel(h: float) -> Check:
    rate = 1.3
    grid = Grid.with_step(5.0, h)
    k, _ = renewal_kernel_k(WaitingTimeDist.erlang(2, rate), grid)
    return _le(f"erlang2_kernel_h{h:g}", np.abs(k.values - rate ** 2 * np.exp(-2 * rate * grid.times)).max(), 1e-8)


def check_budini_exponential(h: float) -> Check:
    lind = amplitude_lindblad()
    E = blocks.KrausChannel(blocks.amplitude_damping_kraus(0.4))
    rate = 1.2
    grid = Grid.with_step(5.0, h)
    rho0 = qstate.bloch_state(0.3, -0.4, 0.5)
    series = integrate_budini(lind, E, WaitingTimeDist.exponential(rate), rho0, grid)
    gen = blocks.lindblad_transfer_generator(lind) + rate * (E.transfer() - np.eye(4))
    exact = expm(grid.times[:, None, None] * gen) @ qstate.to_pauli_vec(rho0)
    return _le("budini_exponential_vs_expm", np.abs(series.coeffs - exact).max(), 1e-6)


def check_reset_residual(h: float) -> Check:
    grid = Grid.with_step(5.0, h)
    worst = 0.0
    for F in (blocks.DampingMap(1.0, 3.0), blocks.DephasingMap(1.0)):
        for f in BUILTIN_WAITS[1:]:
            traj = solve_volterra_map(ProcessSpec(F, blocks.PauliChannel("0"), f, grid))
            worst = max(worst, reset_equation_residual(F, f, traj).max())
    return _le("reset_equation_residual", worst, 1e-4)


def check_master_equation(h: float) -> Check:
    grid = Grid.with_step(5.0, h)
    err = 0.0
    for F, E, f in _specs()[:3]:
        p = ProcessSpec(F, E, f, grid)
        err = max(err, np.abs(master_equation_map(p).maps - solve_volterra_map(p).maps).max())
    return _le("master_equation_vs_volterra", err, 1e-4)


def check_monte_carlo(n_traj: int = 100_000, seed: int = 7) -> Check:
    grid = Grid.with_step(5.0, 1e-3)
    worst = 0.0
    for F, E, f in _specs()[1:4]:
        p = ProcessSpec(F, E, f, grid)
        mc = simulate_monte_carlo(p, n_traj, seed=seed, stride=100)
        ref = solve_volterra_map(p).maps[::100]
        bound = np.maximum(3 * mc.stderr, 5e-3)
        worst = max(worst, (np.abs(mc.maps - ref) / bound).max())
    return Check("monte_carlo_vs_volterra", float(worst), 1.0, bool(worst <= 1.0))


# -- convergence study ---------------------------------------------------------

CONVERGENCE_STEPS = (4e-3, 2e-3, 1e-3)


def _orders(errors) -> list[float]:
    return [math.log2(a / b) for a, b in zip(errors, errors[1:])]


def convergence_study(steps=CONVERGENCE_STEPS, t_max: float = 5.0) -> dict:
    """Observed orders from successive h-halvings.

    ``master_vs_volterra`` is the master-equation versus Volterra discrepancy,
    ``volterra_richardson`` the self-convergence of the Volterra map on the
    coarsest grid and ``parity_exact`` the exponential parity against e^{-2t}.
    """
    coarse = steps[0]
    F, E, f = _specs()[1]
    master, maps = [], []
    for h in steps:
        p = ProcessSpec(F, E, f, Grid.with_step(t_max, h))
        stride = int(round(coarse / h))
        vol = solve_volterra_map(p).maps
        master.append(np.abs(master_equation_map(p).maps - vol)[::stride].max())
        maps.append(vol[::stride])
    rich = [np.abs(a - b).max() for a, b in zip(maps, maps[1:])]
    parity = []
    for h in steps:
        grid = Grid.with_step(t_max, h)
        parity.append(np.abs(parity_q(WaitingTimeDist.exponential(1.0), grid) - np.exp(-2 * grid.times)).max())
    return {
        "steps": list(steps),
        "master_vs_volterra": {"errors": master, "orders": _orders(master)},
        "volterra_richardson": {"differences": rich, "orders": _orders(rich)},
        "parity_exact": {"errors": parity, "orders": _orders(parity)},
    }


def check_convergence() -> tuple[Check, dict]:
    study = convergence_study()
    orders = [o for key in ("master_vs_volterra", "volterra_richardson", "parity_exact")
              for o in study[key]["orders"]]
    dev = max(abs(o - 2.0) for o in orders)
    return Check("convergence_order_deviation", dev, 0.3, bool(dev <= 0.3)), study


# -- surfaces ------------------------------------------------------------------

def dephasing_surface_properties() -> dict:
    t_grid = witness.default_t_grid()
    out = {}
    for ratio in (0.5, 20.0):
        _, growth = witness.surface_column("dephasing", ratio, t_grid)
        out[ratio] = {"d_minus_measure": growth["abs_d_minus"].nm_measure,
                      "q_detected": growth["abs_q"].detected}
    return out


def check_dephasing_surface() -> Check:
    props = dephasing_surface_properties()
    low, high = props[0.5], props[20.0]
    ok = (high["d_minus_measure"] < low["d_minus_measure"] and low["q_detected"] and high["q_detected"])
    ratio = high["d_minus_measure"] / low["d_minus_measure"] if low["d_minus_measure"] else math.inf
    return Check("dephasing_surface_suppression", ratio, 1.0, bool(ok and ratio < 1.0), "<")


def check_damping_surface(workers: int = 1) -> Check:
    data = witness.sweep_surface("damping", workers=workers)
    starts = np.array([g.first_start for g in data.growth["abs_h_plus"]])
    detected = all(g.detected for g in data.growth["abs_h_plus"])
    increase = float(np.max(np.diff(starts), initial=0.0)) if detected else math.inf
    return Check("damping_surface_first_growth", increase, 0.0, bool(detected and increase <= 0.0))


# -- driver ----------------------------------------------------------------------

def _timed(fn, *a):
    t0 = time.perf_counter()
    res = fn(*a)
    items = res if isinstance(res, list) else [res]
    for c in items:
        c.seconds = round(time.perf_counter() - t0, 3)
    return items


def run_validation(level: str = "quick") -> dict:
    if level not in ("quick", "full"):
        raise ValueError(f"unknown validation level {level!r}")
    checks = []
    checks += _timed(check_pauli_roundtrip)
    checks += _timed(check_pauli_channels)
    checks += _timed(check_counting)
    checks += _timed(check_parity, 1e-3)
    checks += _timed(check_volterra_cpt)
    checks += _timed(check_semigroup_recovery, 1e-2)
    checks += _timed(check_closed_form)
    checks += _timed(check_threshold, 1e-2)
    checks += _timed(check_budini_kernel, 1e-4)
    extra = {}
    if level == "full":
        checks += _timed(check_parity, 2e-4)
        checks += _timed(check_semigroup_recovery, 1e-3)
        checks += _timed(check_master_equation, 1e-3)
        checks += _timed(check_budini_exponential, 1e-3)
        checks += _timed(check_reset_residual, 1e-3)
        checks += _timed(check_monte_carlo)
        t0 = time.perf_counter()
        conv, extra["convergence"] = check_convergence()
        conv.seconds = round(time.perf_counter() - t0, 3)
        checks.append(conv)
        checks += _timed(check_dephasing_surface)
        checks += _timed(check_damping_surface)
    return {"level": level, "passed": all(c.passed for c in checks),
            "checks": [c.as_dict() for c in checks], **extra}
