"""Monte Carlo average of transfer matrices over sampled jump histories.

A history with jumps t_1 < ... < t_n up to t carries the exclusive density
f(t - t_n) ... f(t_2 - t_1) g(t_1) and the map F(t - t_n) E ... E F(t_1).
Read backward from t, the gaps t - t_n, t_n - t_{n-1}, ... are i.i.d. draws
from f and the oldest stretch [0, t_1] is the unfinished one.  So with partial
sums S_k of i.i.d. waits,

    Lambda_sample(t) = F(w_1) E F(w_2) E ... F(w_n) E F(t - S_n),  n = #{S_k <= t},

which is accumulated by right-multiplication as t increases.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from pwdyn.engines.process import MapTrajectory, ProcessSpec
from pwdyn.quadrature import Grid
from pwdyn.renewal import sample_jump_times

CHUNK = 10_000


def worker_count() -> int:
    """Worker cap from PWD_THREADS; affects speed only."""
    try:
        return max(1, int(os.environ.get("PWD_THREADS", "1")))
    except ValueError:
        return 1


def _chunk_moments(p: ProcessSpec, times: np.ndarray, n: int, seed: np.random.SeedSequence):
    rng = np.random.default_rng(seed)
    jumps = sample_jump_times(p.f, float(times[-1]), n, rng)
    E = p.E.transfer()
    d2 = E.shape[0]
    prefix = np.broadcast_to(np.eye(d2), (n, d2, d2)).copy()
    count = np.zeros(n, dtype=int)
    last = np.zeros(n)
    padded = np.concatenate([jumps, np.full((n, 1), np.inf)], axis=1)
    total = np.empty((len(times), d2, d2))
    total_sq = np.empty_like(total)
    rows = np.arange(n)
    for i, t in enumerate(times):
        while True:
            nxt = padded[rows, count]
            hit = np.nonzero(nxt <= t)[0]
            if hit.size == 0:
                break
            prefix[hit] = prefix[hit] @ p.F.at(nxt[hit] - last[hit]) @ E
            last[hit] = nxt[hit]
            count[hit] += 1
        sample = prefix @ p.F.at(t - last)
        total[i] = sample.sum(axis=0)
        total_sq[i] = (sample * sample).sum(axis=0)
    return total, total_sq


def simulate_monte_carlo(p: ProcessSpec, n_traj: int, seed: int = 0, stride: int = 1,
                         workers: int | None = None) -> MapTrajectory:
    """Sample ``n_traj`` renewal histories and average the composed maps.

    Trajectories are split into fixed chunks with spawned seeds and reduced in
    chunk order, so the result is bit-identical for any number of workers.
    Evaluation nodes are every ``stride``-th node of the process grid.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    if stride < 1 or p.grid.steps % stride:
        raise ValueError("stride must divide the number of grid steps")
    grid = Grid(p.grid.h * stride, p.grid.steps // stride)
    times = grid.times
    sizes = [CHUNK] * (n_traj // CHUNK) + ([n_traj % CHUNK] if n_traj % CHUNK else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    workers = worker_count() if workers is None else workers
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda a: _chunk_moments(p, times, *a), zip(sizes, seeds)))
    total = np.zeros_like(parts[0][0])
    total_sq = np.zeros_like(parts[0][1])
    for s, sq in parts:
        total += s
        total_sq += sq
    mean = total / n_traj
    if n_traj > 1:
        var = np.maximum(total_sq - n_traj * mean * mean, 0.0) / (n_traj - 1)
    else:
        var = np.zeros_like(mean)
    stderr = np.sqrt(var / n_traj)
    prov = {"engine": "monte_carlo", "n_traj": n_traj, "seed": seed, "chunk": CHUNK,
            "h": grid.h, "stride": stride}
    return MapTrajectory(grid, mean, prov, stderr)
