"""Command-line front end: simulate, witness, surface and validate.

Every data file is written together with ``<file>.meta.json`` holding the tool
version, the echoed configuration, seeds and tolerances.  Numbers are written
with 17 significant digits through ``format``, which ignores the locale.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from pwdyn import __version__, qstate, witness
from pwdyn.config import ConfigError, RunConfig, load_config
from pwdyn.engines import (EngineError, MapTrajectory, assemble, master_equation_map,
                           simulate_monte_carlo, solve_volterra_map)
from pwdyn.engines.montecarlo import worker_count
from pwdyn.quadrature import Grid
from pwdyn.validation import run_validation

EXIT_OK, EXIT_CONFIG, EXIT_ENGINE, EXIT_VALIDATION = 0, 2, 3, 4


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_metadata(out: Path, command: str, started: float, **fields) -> Path:
    meta = {"tool": "pwdyn", "version": __version__, "command": command,
            "numpy": np.__version__, **fields,
            "wall_time_s": round(time.perf_counter() - started, 6)}
    path = out.with_name(out.name + ".meta.json")
    write_json(path, meta)
    return path


def _engine_info(cfg: RunConfig) -> dict:
    info = {"kind": cfg.engine["kind"],
            "tolerances": {"psd": qstate.PSD_TOL, "tp": qstate.TP_TOL,
                           "eps_growth": cfg.witness["eps_growth"]}}
    if cfg.process.f is None:
        info["kind"] = "jump_free"
    return info


def _seeds(cfg: RunConfig) -> dict:
    seeds = {"witness_pairs": cfg.witness["seed"]}
    if cfg.engine["kind"] == "monte_carlo":
        seeds["monte_carlo"] = cfg.engine["seed"]
    return seeds


def run_engine(cfg: RunConfig, workers: int | None = None) -> MapTrajectory:
    """Transfer-matrix trajectory for a parsed configuration."""
    p = cfg.process
    if p.f is None:
        return MapTrajectory(p.grid, p.F.on_grid(p.grid), {"engine": "jump_free", "h": p.grid.h})
    kind = cfg.engine["kind"]
    try:
        if kind == "volterra":
            return solve_volterra_map(p)
        if kind == "closed_form":
            return assemble(p)
        if kind == "master_equation":
            return master_equation_map(p)
        return simulate_monte_carlo(p, cfg.engine["n_traj"], cfg.engine["seed"],
                                    cfg.engine["stride"], workers)
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        raise EngineError(f"{kind} engine failed: {exc}") from exc


def _map_columns(d2: int) -> list[str]:
    sep = "" if d2 <= 10 else "_"
    return [f"L{i}{sep}{j}" for i in range(d2) for j in range(d2)]


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    traj = run_engine(cfg)
    n, d2, _ = traj.maps.shape
    header = ["t"] + _map_columns(d2)
    data = [traj.times[:, None], traj.maps.reshape(n, d2 * d2)]
    if cfg.initial_state is not None:
        states = traj.states(cfg.initial_state)
        d = states.shape[1]
        for a in range(d):
            for b in range(d):
                header += [f"rho{a}{b}_re", f"rho{a}{b}_im"]
        data.append(np.stack([states.real, states.imag], axis=-1).reshape(n, -1))
    table = np.concatenate(data, axis=1)
    out = Path(args.out)
    write_csv(out, header, ([fmt(x) for x in row] for row in table))
    extra = {}
    if traj.stderr is not None:
        extra["max_stderr"] = float(traj.stderr.max())
    write_metadata(out, "simulate", started, config=cfg.echo(), process=cfg.process.describe(),
                   engine=_engine_info(cfg), seeds=_seeds(cfg), output_grid=traj.grid.describe(), **extra)
    return EXIT_OK


def cmd_witness(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    traj = run_engine(cfg)
    eps = cfg.witness["eps_growth"]
    report = witness.pair_search(traj, cfg.witness["n_random"], cfg.witness["seed"], eps)
    rows = []
    for label, series in report.D_values.items():
        inc = report.growth[label].increments
        for i, (t, D) in enumerate(zip(traj.times, series)):
            dd = inc[i] if i < len(inc) else float("nan")
            rows.append([label, fmt(t), fmt(D), fmt(dd), int(i < len(inc) and inc[i] > eps)])
    out = Path(args.out)
    write_csv(out, ["pair", "t", "D", "dD_forward", "growing"], rows)
    funcs = witness.witness_functions(traj, eps)
    summary = {
        "detected": report.detected,
        "nm_measure": report.nm_measure,
        "best_pair": report.best_pair,
        "intervals": {k: [list(iv) for iv in v] for k, v in report.growth_intervals.items()},
        "witness_functions": {"method": funcs.method, "detected": funcs.detected,
                              "nm_measure": {k: g.nm_measure for k, g in funcs.growth.items()}},
    }
    summary_path = out.with_name(out.name + ".summary.json")
    write_json(summary_path, summary)
    write_metadata(out, "witness", started, config=cfg.echo(), process=cfg.process.describe(),
                   engine=_engine_info(cfg), seeds=_seeds(cfg), summary=summary_path.name)
    return EXIT_OK


def _surface_args(args):
    checks = [("tmax", args.tmax > 0), ("tsteps", args.tsteps >= 2), ("ratio-min", args.ratio_min > 0),
              ("ratio-max", args.ratio_max >= args.ratio_min), ("ratio-steps", args.ratio_steps >= 1),
              ("gamma-ratio", args.gamma_ratio > 0), ("cells-per-unit", args.cells_per_unit > 0)]
    for name, ok in checks:
        if not ok:
            raise ConfigError(f"argument '--{name}' out of range")


def cmd_surface(args) -> int:
    started = time.perf_counter()
    _surface_args(args)
    t_grid = witness.default_t_grid(args.tmax, args.tsteps)
    ratios = (np.array([args.ratio_min]) if args.ratio_steps == 1
              else np.geomspace(args.ratio_min, args.ratio_max, args.ratio_steps))
    data = witness.sweep_surface(args.example, t_grid, ratios, gamma_ratio=args.gamma_ratio,
                                 workers=worker_count(), cells_per_unit=args.cells_per_unit)
    names = sorted(data.layers)
    rows = []
    for r, ratio in enumerate(data.ratios):
        for n, lt in enumerate(data.lambda_t):
            for name in names:
                rows.append([fmt(lt), fmt(ratio), name, fmt(data.layers[name][r, n])])
    out = Path(args.out)
    write_csv(out, ["lambda_t", "ratio", "layer", "value"], rows)
    summary = {name: [{"ratio": float(ratio), "detected": g.detected, "nm_measure": g.nm_measure,
                       "first_growth_start": g.first_start if g.detected else None}
                      for ratio, g in zip(data.ratios, data.growth[name])] for name in names}
    summary_path = out.with_name(out.name + ".summary.json")
    write_json(summary_path, summary)
    write_metadata(out, "surface", started, params=data.params,
                   arguments={"tmax": args.tmax, "tsteps": args.tsteps, "ratio_min": args.ratio_min,
                              "ratio_max": args.ratio_max, "ratio_steps": args.ratio_steps,
                              "gamma_ratio": args.gamma_ratio, "cells_per_unit": args.cells_per_unit},
                   tolerances={"eps_growth": witness.EPS_GROWTH}, summary=summary_path.name)
    return EXIT_OK


def cmd_validate(args) -> int:
    report = run_validation(args.level)
    text = json.dumps(report, indent=2)
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pwdyn", description="Renewal-driven open-system dynamics")
    ap.add_argument("--version", action="version", version=f"pwdyn {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="tabulate Lambda(t) as CSV")
    s.add_argument("--config", required=True, help="JSON run configuration")
    s.add_argument("--out", required=True, help="CSV output path")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("witness", help="trace-distance growth witness")
    w.add_argument("--config", required=True)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_witness)

    sf = sub.add_parser("surface", help="witness layers over (lambda t, Gamma/lambda)")
    sf.add_argument("--example", required=True, choices=sorted(witness.SURFACE_LAYERS))
    sf.add_argument("--tmax", type=float, default=15.0, help="largest lambda t (default 15)")
    sf.add_argument("--tsteps", type=int, default=150, help="number of lambda t nodes (default 150)")
    sf.add_argument("--ratio-min", type=float, default=0.25)
    sf.add_argument("--ratio-max", type=float, default=25.0)
    sf.add_argument("--ratio-steps", type=int, default=40, help="log-spaced Gamma/lambda nodes")
    sf.add_argument("--gamma-ratio", type=float, default=3.0, help="gamma/lambda of the damping example")
    sf.add_argument("--cells-per-unit", type=float, default=50.0,
                    help="internal quadrature cells per unit of max(Gamma, lambda) t")
    sf.add_argument("--out", required=True)
    sf.set_defaults(func=cmd_surface)

    v = sub.add_parser("validate", help="run the oracle self-checks")
    v.add_argument("--level", choices=("quick", "full"), default="quick")
    v.add_argument("--report", help="also write the JSON report here")
    v.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EngineError as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
