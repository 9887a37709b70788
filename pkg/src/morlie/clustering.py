"""Split a particle snapshot set into clusters that each move by one affine flow."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .fitting import SnapshotSet

MAX_RETRIES = 10
MAX_GROW = 20
DEFAULT_WINDOW = 200


@dataclass(frozen=True)
class WindowVelocities:
    """Secant velocities over windows of `window` steps, per (traj, window, particle)."""

    positions: np.ndarray  # (J, W, N, 3) window-start positions
    velocities: np.ndarray  # (J, W, N, 3)
    speed_ref: float  # median particle speed
    window: int

    @property
    def n_particles(self) -> int:
        return self.positions.shape[2]


def window_velocities(S: SnapshotSet, window: int = 1) -> WindowVelocities:
    """(x_{k+w} - x_k) / (t_{k+w} - t_k) at k = 0, w, 2w, ...

    window = 1 gives the forward-difference velocities. Trajectories must
    share their snapshot count.
    """
    if S.chart_tag != "pointcloud3d":
        raise ValueError("clustering needs pointcloud3d snapshots")
    counts = {t.size for t in S.times}
    if len(counts) != 1:
        raise ValueError("clustering needs equal snapshot counts per trajectory")
    K = counts.pop()
    if K < 2:
        raise ValueError("clustering needs at least 2 snapshots per trajectory")
    w = int(min(max(window, 1), K - 1))
    starts = np.arange(0, K - w, w)
    pos, vel = [], []
    for t, x in zip(S.times, S.states):
        p = x.reshape(K, -1, 3)
        dt = (t[starts + w] - t[starts])[:, None, None]
        pos.append(p[starts])
        vel.append((p[starts + w] - p[starts]) / dt)
    pos, vel = np.array(pos), np.array(vel)
    speed = float(np.median(np.linalg.norm(vel, axis=-1)))
    return WindowVelocities(pos, vel, speed, w)


def fit_window_generators(wv: WindowVelocities, particles, rank_tol: float = 1e-8):
    """Least-squares affine rates (n_windows, 3, 4) with v = M p + c, shared across
    trajectories; None if the particles do not determine an affine map."""
    idx = np.asarray(sorted(particles), int)
    p = wv.positions[:, :, idx]  # (J, W, n, 3)
    v = wv.velocities[:, :, idx]
    n_win = p.shape[1]
    out = np.empty((n_win, 3, 4))
    for k in range(n_win):
        a = np.concatenate([p[:, k].reshape(-1, 3), np.ones((p.shape[0] * idx.size, 1))], axis=1)
        s = np.linalg.svd(a, compute_uv=False)
        if s.size < 4 or s[-1] <= rank_tol * s[0]:
            return None
        sol, *_ = np.linalg.lstsq(a, v[:, k].reshape(-1, 3), rcond=None)
        out[k] = sol.T
    return out


def generator_residuals(wv: WindowVelocities, gen_traj) -> np.ndarray:
    """Max over trajectories and windows of |v - X(p)| / median speed, per particle.

    gen_traj holds one affine rate per window as (n_win, 3, 4) or (n_win, 4, 4).
    """
    g = np.asarray(gen_traj, float)[:, :3, :]
    pred = np.einsum("wij,kwnj->kwni", g[:, :, :3], wv.positions)
    pred = pred + g[None, :, None, :, 3]
    res = np.linalg.norm(wv.velocities - pred, axis=-1).max(axis=(0, 1))
    return res / max(wv.speed_ref, 1e-300)


def filter_by_generator(S: SnapshotSet | WindowVelocities, gen_traj, residual_tol: float = 0.15,
                        window: int = 1, particles=None) -> set[int]:
    """Particles whose worst relative velocity residual against gen_traj is below residual_tol."""
    wv = S if isinstance(S, WindowVelocities) else window_velocities(S, window)
    res = generator_residuals(wv, gen_traj)
    cand = range(wv.n_particles) if particles is None else particles
    return {int(i) for i in cand if res[i] < residual_tol}


def cluster_search(S: SnapshotSet, n_neighbors: int = 8, residual_tol: float = 0.15, rng_seed: int = 0,
                   window: int = DEFAULT_WINDOW):
    """Greedy cluster discovery; returns (n_G, assignment array of cluster ids).

    Seeds are drawn uniformly from unassigned particles; a seed and its nearest
    unassigned neighbours in the first frame of trajectory 0 define an affine
    rate per window, the cluster grows to every unassigned particle the rate
    explains, and the rate is refitted on the grown set until it is stable.
    """
    if n_neighbors < 4:
        raise ValueError("n_neighbors must be >= 4 to determine an affine generator")
    wv = window_velocities(S, window)
    n = wv.n_particles
    p0 = S.states[0][0].reshape(n, 3)
    rng = np.random.default_rng(rng_seed)
    assignment = np.full(n, -1, int)
    n_g = 0
    while (free := np.flatnonzero(assignment < 0)).size:
        members: set[int] = set()
        seed = None
        for _ in range(MAX_RETRIES):
            seed = int(rng.choice(free))
            k = min(n_neighbors + 1, free.size)
            _, nn = cKDTree(p0[free]).query(p0[seed], k=k)
            group = {int(i) for i in free[np.atleast_1d(nn)]}
            gen = fit_window_generators(wv, group)
            if gen is None:
                continue
            members = _grow(wv, gen, residual_tol, free)
            break
        if not members:
            members = {seed}
        assignment[sorted(members)] = n_g
        n_g += 1
    return n_g, assignment


def _grow(wv: WindowVelocities, gen, residual_tol: float, free) -> set[int]:
    members = filter_by_generator(wv, gen, residual_tol, particles=free)
    for _ in range(MAX_GROW):
        if len(members) < 4:
            break
        refit = fit_window_generators(wv, members)
        if refit is None:
            break
        grown = filter_by_generator(wv, refit, residual_tol, particles=free)
        if grown == members:
            break
        members = grown
    return members


def cluster_generators(S: SnapshotSet, assignment, window: int = DEFAULT_WINDOW) -> list:
    """Refitted affine rates per cluster, in cluster order."""
    wv = window_velocities(S, window)
    assignment = np.asarray(assignment)
    return [fit_window_generators(wv, np.flatnonzero(assignment == c)) for c in range(assignment.max() + 1)]


def refine_assignment(S: SnapshotSet, assignment, residual_tol: float = 0.15, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Reassign every particle to the earliest cluster whose refitted rate explains it."""
    wv = window_velocities(S, window)
    assignment = np.asarray(assignment)
    out = assignment.copy()
    claimed = np.zeros(out.size, bool)
    for c, gen in enumerate(cluster_generators(S, assignment, window)):
        if gen is None:
            continue
        for i in filter_by_generator(wv, gen, residual_tol):
            if not claimed[i]:
                out[i] = c
                claimed[i] = True
    return out


def accuracy(assignment, truth) -> float:
    """Fraction of particles correctly assigned under the best cluster-label matching."""
    a, t = np.asarray(assignment), np.asarray(truth)
    conf = np.zeros((a.max() + 1, t.max() + 1))
    np.add.at(conf, (a, t), 1)
    r, c = linear_sum_assignment(-conf)
    return float(conf[r, c].sum() / a.size)
