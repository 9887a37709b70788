"""Fitting reduced vector fields from known dynamics or snapshot data."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, NamedTuple, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .actions import (
    ActionSpec,
    StatePoint,
    act,
    embed_blocks,
    embed_tangent,
    generator,
    state_distance,
    whiten_scale,
)
from .lie_core import AlgebraBasis, dexp
from .lm import LMConfig, lm_minimize


# -- data containers ----------------------------------------------------------------

@dataclass(frozen=True)
class SnapshotSet:
    """Snapshots grouped per trajectory.

    `states[j]` is a (K_j, D) array of flat chart coordinates at `times[j]`;
    `params[j]` is the parameter vector of trajectory j.
    """

    chart_tag: str
    times: tuple
    states: tuple
    params: tuple = ()
    traj_ids: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        times = tuple(np.asarray(t, dtype=float) for t in self.times)
        states = tuple(np.atleast_2d(np.asarray(s, dtype=float)) for s in self.states)
        if len(times) != len(states):
            raise ValueError("one time array per trajectory expected")
        if not times:
            raise ValueError("empty snapshot set")
        width = states[0].shape[1]
        for j, (t, s) in enumerate(zip(times, states)):
            if s.shape != (t.size, width):
                raise ValueError(f"trajectory {j}: states shape {s.shape} does not match times/width")
            if np.any(np.diff(t) <= 0):
                raise ValueError(f"trajectory {j}: times must strictly increase")
            if not (np.all(np.isfinite(t)) and np.all(np.isfinite(s))):
                raise ValueError(f"trajectory {j}: non-finite values")
        params = tuple(np.atleast_1d(np.asarray(p, dtype=float)) for p in self.params) or tuple(
            np.zeros(0) for _ in times
        )
        ids = tuple(int(i) for i in self.traj_ids) or tuple(range(len(times)))
        if len(params) != len(times) or len(ids) != len(times):
            raise ValueError("params / traj_ids must have one entry per trajectory")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "traj_ids", ids)
        # validates the chart
        StatePoint(states[0][0], self.chart_tag, self.meta)

    @property
    def n_traj(self) -> int:
        return len(self.times)

    @property
    def width(self) -> int:
        return self.states[0].shape[1]

    @property
    def n_snapshots(self) -> int:
        return sum(t.size for t in self.times)

    def state(self, j: int, k: int) -> StatePoint:
        return StatePoint(self.states[j][k], self.chart_tag, self.meta)

    def records(self) -> Iterator[tuple]:
        """(traj_id, step, time, StatePoint, param) for every snapshot."""
        for j in range(self.n_traj):
            for k, t in enumerate(self.times[j]):
                yield self.traj_ids[j], k, float(t), self.state(j, k), self.params[j]

    def matrix(self, include_time: bool = False) -> np.ndarray:
        """Snapshot matrix with one column per (trajectory, step)."""
        cols = np.concatenate(self.states, axis=0).T
        if include_time:
            cols = np.vstack([cols, np.concatenate(self.times)[None]])
        return cols

    def time_range(self) -> tuple[float, float]:
        return min(float(t[0]) for t in self.times), max(float(t[-1]) for t in self.times)

    def subset(self, trajectories: Sequence[int]) -> "SnapshotSet":
        idx = list(trajectories)
        return SnapshotSet(
            self.chart_tag,
            tuple(self.times[j] for j in idx),
            tuple(self.states[j] for j in idx),
            tuple(self.params[j] for j in idx),
            tuple(self.traj_ids[j] for j in idx),
            self.meta,
        )

    def equals(self, other: "SnapshotSet") -> bool:
        return (
            self.chart_tag == other.chart_tag
            and self.traj_ids == other.traj_ids
            and all(np.array_equal(a, b) for a, b in zip(self.times, other.times))
            and all(np.array_equal(a, b) for a, b in zip(self.states, other.states))
            and all(np.array_equal(a, b) for a, b in zip(self.params, other.params))
        )


@dataclass(frozen=True)
class ReducedSnapshotMatrix:
    """Per-transition algebra coefficients rho*_{j,k} in a fitting basis."""

    coeffs: np.ndarray
    traj_ids: np.ndarray
    steps: np.ndarray
    times: np.ndarray
    basis: AlgebraBasis
    t_end: float
    costs: np.ndarray | None = None
    converged: np.ndarray | None = None
    rank_deficient: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.coeffs, float).reshape(-1, self.basis.dim)
        if not np.all(np.isfinite(c)):
            raise ValueError("reduced snapshot matrix has non-finite entries")
        object.__setattr__(self, "coeffs", c)
        for name in ("traj_ids", "steps"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=int))
        object.__setattr__(self, "times", np.asarray(self.times, float))
        if not (len(self.traj_ids) == len(self.steps) == len(self.times) == len(c)):
            raise ValueError("one tag per column expected")

    @property
    def n_columns(self) -> int:
        return len(self.coeffs)

    def ambient(self) -> np.ndarray:
        return self.basis.combine(self.coeffs)

    @property
    def all_converged(self) -> bool:
        return self.converged is None or bool(np.all(self.converged))

    def rebase(self, basis: AlgebraBasis) -> "ReducedSnapshotMatrix":
        """Express the columns in another (sub)basis by orthogonal projection."""
        return ReducedSnapshotMatrix(
            basis.coordinates(self.ambient()), self.traj_ids, self.steps, self.times,
            basis, self.t_end, self.costs, self.converged, self.rank_deficient,
        )


@dataclass(frozen=True)
class ReducedVectorField:
    """Time-parameterized reduced vector field rho_theta(t).

    theta is a piecewise-cubic Hermite interpolant per basis channel: values
    and slopes at the knots.
    """

    basis: AlgebraBasis
    knots: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    rmse: float = 0.0

    def __post_init__(self):
        k = np.asarray(self.knots, float)
        v = np.asarray(self.values, float).reshape(k.size, self.basis.dim)
        s = np.asarray(self.slopes, float).reshape(k.size, self.basis.dim)
        if k.size < 2 or np.any(np.diff(k) <= 0):
            raise ValueError("knots must be increasing with at least two entries")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "slopes", s)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    @cached_property
    def _spline(self):
        return CubicHermiteSpline(self.knots, self.values, self.slopes, axis=0)

    def check_domain(self, t, tol: float = 1e-9) -> None:
        t = np.asarray(t, float)
        lo, hi = self.domain
        pad = tol * max(1.0, hi - lo)
        if np.any(t < lo - pad) or np.any(t > hi + pad):
            raise ValueError(f"time outside reduced vector field domain [{lo}, {hi}]")

    def __call__(self, t) -> np.ndarray:
        self.check_domain(t)
        return self._spline(t)

    def matrix(self, t) -> np.ndarray:
        return self.basis.combine(self(t))

    @classmethod
    def constant(cls, basis: AlgebraBasis, coeffs, domain=(0.0, 1.0)) -> "ReducedVectorField":
        c = np.broadcast_to(np.asarray(coeffs, float), (2, basis.dim))
        return cls(basis, np.asarray(domain, float), c, np.zeros_like(c))

    @classmethod
    def from_samples(cls, basis: AlgebraBasis, times, coeffs) -> "ReducedVectorField":
        """Interpolating cubic spline through (times, coeffs)."""
        cs = CubicSpline(np.asarray(times, float), np.asarray(coeffs, float), axis=0)
        return cls(basis, cs.x, cs(cs.x), cs(cs.x, 1))


class Projection(NamedTuple):
    rho: np.ndarray
    residual: np.ndarray
    rank_deficient: bool


# -- projection (intrusive / velocity-based) ------------------------------------------

def _project(spec: ActionSpec, coords: np.ndarray, v: np.ndarray, meta=None, rcond: float = 1e-10) -> Projection:
    x_mat = generator(spec, spec.group_basis.elements, coords, meta).T
    w = whiten_scale(spec.chart, coords)
    a = w[:, None] * x_mat
    rho, _, rank, sv = np.linalg.lstsq(a, w * v, rcond=rcond)
    return Projection(rho, v - x_mat @ rho, bool(rank < spec.dim))


def project_vector_field(spec: ActionSpec, x: StatePoint, v) -> Projection:
    """Metric least-squares coordinates of v in the induced distribution at x."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size != x.coords.size:
        raise ValueError("tangent vector must have the shape of the state")
    if x.chart_tag != spec.chart:
        raise ValueError(f"{spec.kind} acts on {spec.chart}, got {x.chart_tag}")
    return _project(spec, x.coords, v, x.meta)


def finite_difference_velocities(S: SnapshotSet, j: int) -> np.ndarray:
    """Forward differences (x_{k+1} - x_k) / dt_k for trajectory j."""
    return np.diff(S.states[j], axis=0) / np.diff(S.times[j])[:, None]


def _transitions(S: SnapshotSet):
    for j in range(S.n_traj):
        if S.times[j].size < 2:
            warnings.warn(f"trajectory {S.traj_ids[j]} has a single snapshot; skipped")
            continue
        yield j


def fit_velocity_based(spec: ActionSpec, S: SnapshotSet) -> ReducedSnapshotMatrix:
    cols, ids, steps, times, rank_def = [], [], [], [], []
    for j in _transitions(S):
        vel = finite_difference_velocities(S, j)
        for k, v in enumerate(vel):
            p = _project(spec, S.states[j][k], v, S.meta)
            cols.append(p.rho)
            rank_def.append(p.rank_deficient)
            ids.append(S.traj_ids[j])
            steps.append(k)
            times.append(S.times[j][k])
    return ReducedSnapshotMatrix(
        np.array(cols).reshape(-1, spec.dim), ids, steps, times, spec.group_basis,
        S.time_range()[1], rank_deficient=np.array(rank_def, bool),
    )


# -- velocity-free one-step fits --------------------------------------------------------

class OneStepProblem:
    """dist(y, Phi(exp(A dt), x)) as a function of algebra coordinates of A."""

    def __init__(self, spec: ActionSpec, x: np.ndarray, y: np.ndarray, dt: float, meta=None):
        self.spec, self.x, self.dt, self.meta = spec, x, dt, meta
        self.y_blocks, self.weight = embed_blocks(spec.chart, y, meta)
        self.elements = spec.group_basis.elements

    def predict(self, c: np.ndarray) -> np.ndarray:
        m = np.tensordot(c, self.elements, axes=1) * self.dt
        return act(self.spec, self.spec.exp(m), self.x, self.meta)

    def residual(self, c: np.ndarray) -> np.ndarray:
        blocks, _ = embed_blocks(self.spec.chart, self.predict(c), self.meta)
        return self.y_blocks - blocks

    def jacobian(self, c: np.ndarray) -> np.ndarray:
        m = np.tensordot(c, self.elements, axes=1) * self.dt
        pred = act(self.spec, self.spec.exp(m), self.x, self.meta)
        w = dexp(m, self.elements * self.dt)
        cols = generator(self.spec, w, pred, self.meta)  # (p, D)
        jb = embed_tangent(self.spec.chart, pred, cols)  # (p, B, d)
        return -np.moveaxis(jb, 0, -1)

    def cost(self, c: np.ndarray) -> float:
        return float(self.weight * np.linalg.norm(self.residual(c), axis=-1).sum())


def fit_velocity_free(
    spec: ActionSpec,
    S: SnapshotSet,
    lm_cfg: LMConfig = LMConfig(),
    init: ReducedSnapshotMatrix | None = None,
) -> ReducedSnapshotMatrix:
    """Per-transition minimizers of the one-step distance by Levenberg-Marquardt.

    Each step starts from the better of the previous step's solution and the
    velocity-based estimate for that step; the first step uses the latter.
    """
    if init is None:
        init = fit_velocity_based(spec, S)
    lookup = {(int(i), int(k)): c for i, k, c in zip(init.traj_ids, init.steps, init.coeffs)}
    cols, ids, steps, times, costs, conv = [], [], [], [], [], []
    for j in _transitions(S):
        tid = S.traj_ids[j]
        t, xs = S.times[j], S.states[j]
        prev = None
        for k in range(t.size - 1):
            prob = OneStepProblem(spec, xs[k], xs[k + 1], float(t[k + 1] - t[k]), S.meta)
            start = lookup[(tid, k)]
            if prev is not None and prob.cost(prev) < prob.cost(start):
                start = prev
            scale = np.abs(xs[k + 1]).max(initial=1.0)
            res = lm_minimize(prob.residual, prob.jacobian, start, prob.weight, lm_cfg,
                              abs_tol=1e-15 * scale)
            prev = res.x
            cols.append(res.x)
            costs.append(res.cost)
            conv.append(res.converged)
            ids.append(tid)
            steps.append(k)
            times.append(t[k])
    return ReducedSnapshotMatrix(
        np.array(cols).reshape(-1, spec.dim), ids, steps, times, spec.group_basis,
        S.time_range()[1], costs=np.array(costs), converged=np.array(conv, bool),
    )


def one_step_costs(spec: ActionSpec, S: SnapshotSet, Sg: ReducedSnapshotMatrix) -> np.ndarray:
    """Velocity-free one-step distance for every column of Sg."""
    index = {tid: j for j, tid in enumerate(S.traj_ids)}
    out = np.empty(Sg.n_columns)
    for n, (tid, k, c) in enumerate(zip(Sg.traj_ids, Sg.steps, Sg.ambient())):
        j = index[int(tid)]
        dt = S.times[j][k + 1] - S.times[j][k]
        pred = act(spec, spec.exp(c * dt), S.states[j][k], S.meta)
        out[n] = state_distance(spec.chart, S.states[j][k + 1], pred, S.meta)
    return out


# -- rho_theta ---------------------------------------------------------------------------

def average_over_trajectories(Sg: ReducedSnapshotMatrix, time_tol: float = 1e-9):
    """Mean coefficients per time step across trajectories.

    Trajectories on a shared time grid are averaged step by step; otherwise
    coefficients are averaged in time bins of the median step width.
    """
    steps = np.unique(Sg.steps)
    t_by_step = [Sg.times[Sg.steps == k] for k in steps]
    span = max(1.0, float(np.ptp(Sg.times)) if Sg.n_columns else 1.0)
    aligned = all(np.ptp(t) <= time_tol * span for t in t_by_step)
    if aligned:
        t = np.array([tt.mean() for tt in t_by_step])
        c = np.array([Sg.coeffs[Sg.steps == k].mean(axis=0) for k in steps])
        return t, c
    order = np.argsort(Sg.times)
    ts = Sg.times[order]
    dt = float(np.median(np.diff(np.unique(ts)))) if ts.size > 1 else 1.0
    bins = np.floor((ts - ts[0]) / dt + 1e-9).astype(int)
    ub = np.unique(bins)
    t = np.array([ts[bins == b].mean() for b in ub])
    c = np.array([Sg.coeffs[order][bins == b].mean(axis=0) for b in ub])
    return t, c


def fit_rho_theta(Sg: ReducedSnapshotMatrix, n_segments: int = 100, stride: int = 10) -> ReducedVectorField:
    """Least-squares cubic-spline fit of the trajectory-averaged columns of Sg.

    Knots are uniform over [first column time, Sg.t_end]; the averaged series
    is subsampled with `stride` (the last entry is always kept so the fit
    reaches the end of the data). The spline uses not-a-knot end conditions,
    so cubic polynomials are reproduced exactly.
    """
    if Sg.n_columns == 0:
        raise ValueError("fit_rho_theta: empty reduced snapshot matrix")
    if n_segments < 1 or stride < 1:
        raise ValueError("n_segments and stride must be positive")
    t, c = average_over_trajectories(Sg)
    idx = np.arange(0, t.size, stride)
    if idx[-1] != t.size - 1:
        idx = np.append(idx, t.size - 1)
    t, c = t[idx], c[idx]
    if t.size < n_segments + 1:
        raise ValueError(
            f"fit_rho_theta: {t.size} time points cannot determine {n_segments} segments"
        )
    t_end = max(float(Sg.t_end), float(t[-1]))
    knots = np.linspace(float(t[0]), t_end, n_segments + 1)
    design = CubicSpline(knots, np.eye(knots.size), axis=0)(t)
    values = np.linalg.lstsq(design, c, rcond=None)[0]
    rmse = float(np.sqrt(np.mean((design @ values - c) ** 2))) if c.size else 0.0
    slopes = CubicSpline(knots, values, axis=0)(knots, 1)
    return ReducedVectorField(Sg.basis, knots, values, slopes, rmse)


# -- cost evaluation ------------------------------------------------------------------------

def _rho_at(rho, j_id: int, k: int, t: float, spec: ActionSpec, cache: dict) -> np.ndarray:
    if isinstance(rho, ReducedVectorField):
        return rho.matrix(t)
    if "lookup" not in cache:
        cache["lookup"] = {(int(i), int(s)): m for i, s, m in zip(rho.traj_ids, rho.steps, rho.ambient())}
    try:
        return cache["lookup"][(j_id, k)]
    except KeyError:
        raise ValueError(f"no reduced snapshot for trajectory {j_id} step {k}") from None


def evaluate_cost(spec: ActionSpec, S: SnapshotSet, rho, mode: str = "velocity_free") -> float:
    """Summed cost over all transitions.

    velocity_based: metric norm of (finite-difference velocity - X_rho(x)).
    velocity_free: dist(x_{k+1}, Phi(exp(rho dt), x_k)).
    `rho` is a ReducedVectorField or a ReducedSnapshotMatrix (per transition).
    """
    if mode not in ("velocity_based", "velocity_free"):
        raise ValueError(f"unknown cost mode {mode!r}")
    if isinstance(rho, ReducedVectorField):
        lo, hi = S.time_range()
        rho.check_domain([lo, hi])
    cache: dict = {}
    total = 0.0
    for j in _transitions(S):
        t, xs = S.times[j], S.states[j]
        for k in range(t.size - 1):
            a = _rho_at(rho, S.traj_ids[j], k, float(t[k]), spec, cache)
            dt = float(t[k + 1] - t[k])
            if mode == "velocity_free":
                pred = act(spec, spec.exp(a * dt), xs[k], S.meta)
                total += state_distance(spec.chart, xs[k + 1], pred, S.meta)
            else:
                v = (xs[k + 1] - xs[k]) / dt
                r = v - generator(spec, a, xs[k], S.meta)
                total += float(np.linalg.norm(whiten_scale(spec.chart, xs[k]) * r))
    return total
