"""Distances, trajectory errors, the POD baseline and empirical group widths."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .actions import ActionSpec, StatePoint, act, embed_blocks, embed_tangent, generator, state_distance
from .fitting import SnapshotSet
from .lie_core import DomainError, expm, logm
from .lm import LMConfig, lm_minimize
from .rom import RomModel, Trajectory, _step, integrate_rom


def _points(x) -> np.ndarray:
    c = x.coords if isinstance(x, StatePoint) else np.asarray(x, float)
    return c.reshape(-1, 3)


def cloud_distance(P, Q, mode: str = "mean") -> float:
    """Mean or max over particles of |p_i - q_i|."""
    p, q = _points(P), _points(Q)
    if p.shape != q.shape:
        raise ValueError(f"particle counts differ: {len(p)} vs {len(q)}")
    d = np.linalg.norm(p - q, axis=1)
    if mode == "mean":
        return float(d.mean()) if d.size else 0.0
    if mode == "max":
        return float(d.max(initial=0.0))
    raise ValueError(f"unknown distance mode {mode!r}")


def distance(chart: str, x, y, mode: str = "mean", meta=None) -> float:
    """Chart distance; point clouds honour `mode`, other charts use their metric distance."""
    if chart == "pointcloud3d":
        return cloud_distance(x, y, mode)
    return state_distance(chart, np.asarray(x, float), np.asarray(y, float), meta)


# -- trajectory errors ------------------------------------------------------------------

def _model_group_step(model: RomModel, t: float, h: float, method: str) -> np.ndarray:
    spec = model.action
    if not isinstance(model.rho, tuple):
        return spec.exp(_step(model.rho.matrix, t, h, method))
    b = spec.block
    g = np.zeros((spec.ambient_dim,) * 2)
    for f, r in enumerate(model.rho):
        g[b * f:b * f + b, b * f:b * f + b] = expm(_step(r.matrix, t, h, method))
    return g


def _fields(model: RomModel):
    return model.rho if isinstance(model.rho, tuple) else (model.rho,)


def trajectory_errors(fom: Trajectory, rom_model: RomModel, mode: str = "full", method: str = "rkmk4",
                      dist_mode: str = "mean"):
    """Error curve (times, errors) of the ROM against a data trajectory.

    full: one reconstruction from the model's x0 compared at every time.
    step_ahead: the ROM re-seeded at each data state and advanced by one step,
    compared with the next data state (times are the arrival times).
    """
    t = fom.times
    if fom.chart_tag != rom_model.action.chart:
        raise ValueError("trajectory chart does not match the ROM action")
    for r in _fields(rom_model):
        try:
            r.check_domain(t)
        except ValueError as err:
            raise ValueError(f"time grids not aligned: {err}") from None
    chart, meta = fom.chart_tag, fom.meta
    if mode == "full":
        rom = integrate_rom(rom_model, t, method)
        err = np.array([distance(chart, a, b, dist_mode, meta) for a, b in zip(rom.states, fom.states)])
        return t, err
    if mode == "step_ahead":
        spec = rom_model.action
        err = np.empty(t.size - 1)
        for k in range(t.size - 1):
            g = _model_group_step(rom_model, float(t[k]), float(t[k + 1] - t[k]), method)
            pred = act(spec, g, fom.states[k], meta)
            err[k] = distance(chart, pred, fom.states[k + 1], dist_mode, meta)
        return t[1:], err
    raise ValueError(f"unknown error mode {mode!r}")


# -- POD ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class PODResult:
    singular_values: np.ndarray
    modes: np.ndarray  # (D, r) left singular vectors
    mean: np.ndarray | None

    @property
    def rank(self) -> int:
        s = self.singular_values
        if s.size == 0 or s[0] == 0:
            return 0
        return int(np.sum(s > s[0] * max(self.modes.shape) * np.finfo(float).eps))

    def n_modes(self, a: float = 0.99, energy: str = "linear") -> int:
        """Smallest k whose leading singular values reach the energy fraction a.

        energy = "squared" uses sum s_i^2 (captured snapshot energy),
        "linear" uses sum s_i.
        """
        s = self.singular_values
        e = s ** 2 if energy == "squared" else s
        if e.sum() == 0:
            return 0
        cum = np.cumsum(e) / e.sum()
        return int(min(np.searchsorted(cum, a - 1e-15) + 1, s.size))


def pod_svd(S: SnapshotSet, center: bool = False, include_time: bool = False) -> PODResult:
    """SVD of the snapshot matrix (one column per snapshot)."""
    m = S.matrix(include_time)
    mean = m.mean(axis=1) if center else None
    if center:
        m = m - mean[:, None]
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    return PODResult(s, u, mean)


def pod_reconstruct_error(S: SnapshotSet, n_modes: int, center: bool = False, pod: PODResult | None = None):
    """(sup, mean) distance between each snapshot and its projection on the leading modes."""
    pod = pod or pod_svd(S, center)
    if n_modes < 0 or n_modes > pod.rank:
        raise ValueError(f"n_modes must lie in [0, rank={pod.rank}]")
    m = S.matrix()
    base = pod.mean[:, None] if pod.mean is not None else 0.0
    u = pod.modes[:, :n_modes]
    proj = base + u @ (u.T @ (m - base))
    d = np.array([distance(S.chart_tag, a, b, "mean", S.meta) for a, b in zip(m.T, proj.T)])
    return float(d.max()), float(d.mean())


def subspace_projection_error(S: SnapshotSet, basis: np.ndarray):
    """(sup, mean) distance to the projection onto span(basis columns)."""
    m = S.matrix()
    q, _ = np.linalg.qr(basis)
    proj = q @ (q.T @ m)
    d = np.array([distance(S.chart_tag, a, b, "mean", S.meta) for a, b in zip(m.T, proj.T)])
    return float(d.max()), float(d.mean())


# -- empirical group width ------------------------------------------------------------

@dataclass(frozen=True)
class WidthResult:
    width: float  # sup over the window of the best orbit distance found (an upper bound)
    distances: np.ndarray
    flagged: np.ndarray  # LM did not converge for these snapshots
    argmax: int


def _affine_fit(src: np.ndarray, dst: np.ndarray) -> np.ndarray | None:
    a = np.hstack([src, np.ones((len(src), 1))])
    sol, _, rank, _ = np.linalg.lstsq(a, dst, rcond=None)
    if rank < 4:
        return None
    g = np.eye(4)
    g[:3, :] = sol.T
    return g


def _project_to_group(spec: ActionSpec, g: np.ndarray) -> np.ndarray | None:
    try:
        lg = logm(g)
    except (DomainError, ValueError):
        return None
    c = spec.group_basis.coordinates(lg[None])[0]
    return spec.exp(spec.group_basis.combine(c))


def _starts(spec: ActionSpec, x: np.ndarray, anchor: np.ndarray, meta) -> list:
    starts = [spec.identity()]
    if spec.kind == "affine_cloud":
        g = _affine_fit(anchor.reshape(-1, 3), x.reshape(-1, 3))
        g = None if g is None else _project_to_group(spec, g)
        if g is not None:
            starts.append(g)
    elif spec.kind == "clustered_affine":
        n = spec.ambient_dim
        g = np.eye(n)
        ok = True
        for f in range(spec.n_factors):
            idx = spec.cluster_assignment == f
            b = _affine_fit(anchor.reshape(-1, 3)[idx], x.reshape(-1, 3)[idx])
            if b is None:
                ok = False
                break
            g[4 * f:4 * f + 4, 4 * f:4 * f + 4] = b
        g = _project_to_group(spec, g) if ok else None
        if g is not None:
            starts.append(g)
    elif spec.kind == "so2_polar":
        starts.append(spec.exp(spec.group_basis.elements[0] * (x[1] - anchor[1]) / spec.group_basis.elements[0][0, 1]))
    else:
        n = x.size
        length = (meta or {}).get("length", 2 * np.pi)
        corr = np.fft.irfft(np.fft.rfft(x) * np.conj(np.fft.rfft(anchor)), n=n)
        s = int(np.argmax(corr)) * length / n
        e = spec.group_basis.elements[0]
        starts.append(spec.exp(e * s / e[0, 1]))
    return starts


def orbit_distance(spec: ActionSpec, x: np.ndarray, anchor: np.ndarray, meta=None,
                   lm_cfg: LMConfig = LMConfig(), extra_starts=()):
    """inf over g of dist(x, Phi(g, anchor)) by LM from several starts: (distance, g, converged)."""
    y_blocks, w = embed_blocks(spec.chart, x, meta)
    if spec.dim == 0:
        return state_distance(spec.chart, x, anchor, meta), spec.identity(), True
    els = spec.group_basis.elements

    def residual(g):
        b, _ = embed_blocks(spec.chart, act(spec, g, anchor, meta), meta)
        return y_blocks - b

    def jacobian(g):
        pred = act(spec, g, anchor, meta)
        cols = generator(spec, els, pred, meta)
        return -np.moveaxis(embed_tangent(spec.chart, pred, cols), 0, -1)

    def retract(g, d):
        return spec.exp(np.tensordot(d, els, axes=1)) @ g

    best = None
    for g0 in list(_starts(spec, x, anchor, meta)) + list(extra_starts):
        res = lm_minimize(residual, jacobian, np.asarray(g0, float), w, lm_cfg, retract=retract,
                          abs_tol=1e-15 * max(1.0, np.abs(x).max(initial=0.0)))
        if best is None or res.cost < best[0]:
            best = (res.cost, res.x, res.converged)
    return best


def estimate_group_width(S: SnapshotSet, spec: ActionSpec, anchor: StatePoint | None = None,
                         horizon: float | None = None, lm_cfg: LMConfig = LMConfig(),
                         extra_starts=()) -> WidthResult:
    """sup over snapshots in the window of the orbit distance to the anchor.

    anchor None uses each trajectory's own first state; horizon None uses the
    full time range, otherwise snapshots with t - t_0 <= horizon.
    """
    if S.chart_tag != spec.chart:
        raise ValueError("snapshot chart does not match the action")
    t0 = S.time_range()[0]
    dists, flags = [], []
    for j in range(S.n_traj):
        a = S.states[j][0] if anchor is None else anchor.coords
        for k, t in enumerate(S.times[j]):
            if horizon is not None and t - t0 > horizon:
                break
            d, _, ok = orbit_distance(spec, S.states[j][k], a, S.meta, lm_cfg, extra_starts)
            dists.append(d)
            flags.append(not ok)
    dists = np.array(dists)
    i = int(np.argmax(dists)) if dists.size else 0
    return WidthResult(float(dists.max(initial=0.0)), dists, np.array(flags, bool), i)
