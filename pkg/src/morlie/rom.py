"""Reduced dynamics on the group, reconstruction, and reference full-order models."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .actions import ActionSpec, StatePoint, act, generator, group_matrix, whiten_scale
from .fitting import ReducedVectorField
from .lie_core import dexpinv, expm

DEFAULT_A = 100.0
DEFAULT_B = 40.0


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    chart_tag: str
    provenance: str
    group_path: np.ndarray | None = None
    meta: dict | None = None

    def __post_init__(self):
        t = np.asarray(self.times, float)
        s = np.atleast_2d(np.asarray(self.states, float))
        if s.shape[0] != t.size:
            raise ValueError("one state per time expected")
        if self.group_path is not None and len(self.group_path) != t.size:
            raise ValueError("one group element per time expected")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must increase")
        if not np.all(np.isfinite(s)):
            raise ValueError("trajectory has non-finite states")
        if self.provenance not in ("fom", "rom", "reconstruction"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)

    def state(self, k: int) -> StatePoint:
        return StatePoint(self.states[k], self.chart_tag, self.meta or {})


@dataclass(frozen=True)
class RomModel:
    """(G, Phi, rho_theta, x0). `rho` is one field over the full basis or one per factor."""

    action: ActionSpec
    rho: ReducedVectorField | tuple
    x0: StatePoint

    def __post_init__(self):
        if self.x0.chart_tag != self.action.chart:
            raise ValueError("x0 chart does not match the action")
        if isinstance(self.rho, tuple):
            if len(self.rho) != self.action.n_factors:
                raise ValueError("one reduced vector field per product factor expected")
            dims = sum(r.basis.dim for r in self.rho)
            if any(r.basis.ambient_dim != self.action.block for r in self.rho):
                raise ValueError("factor fields must live in the factor algebra")
        else:
            dims = self.rho.basis.dim
            if self.rho.basis.ambient_dim != self.action.ambient_dim:
                raise ValueError("reduced vector field ambient dimension mismatch")
        if dims != self.action.dim:
            raise ValueError("rho basis dimension does not match the action's group")

    @property
    def group_dim(self) -> int:
        return self.action.dim


# -- group integrators ---------------------------------------------------------------

def _step(rho: Callable[[float], np.ndarray], t: float, h: float, method: str) -> np.ndarray:
    if method == "lie_euler":
        return h * rho(t)
    if method != "rkmk4":
        raise ValueError(f"unknown integrator {method!r}")
    a_mid = rho(t + 0.5 * h)
    k1 = h * rho(t)
    k2 = dexpinv(0.5 * k1, h * a_mid)
    k3 = dexpinv(0.5 * k2, h * a_mid)
    k4 = dexpinv(k3, h * rho(t + h))
    return (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


def integrate_group(
    rho: Callable[[float], np.ndarray],
    t_grid,
    method: str = "rkmk4",
    exp: Callable[[np.ndarray], np.ndarray] | None = None,
    g0: np.ndarray | None = None,
) -> np.ndarray:
    """Solve g' = rho(t) g (right-trivialized) on t_grid; returns (K, n, n)."""
    exp = exp or expm
    t = np.asarray(t_grid, float)
    n = rho(float(t[0])).shape[0]
    g = np.eye(n) if g0 is None else np.array(g0, float)
    path = np.empty((t.size, n, n))
    path[0] = g
    for k in range(t.size - 1):
        omega = _step(rho, float(t[k]), float(t[k + 1] - t[k]), method)
        g = exp(omega) @ g
        path[k + 1] = g
    return path


def reconstruct(action: ActionSpec, group_path, x0: StatePoint) -> Trajectory:
    """States Phi(g_k, x0) along a group path (times default to indices)."""
    if isinstance(group_path, tuple):
        times, path = group_path
    else:
        path = np.asarray(group_path, float)
        times = np.arange(len(path), dtype=float)
    path = np.array([group_matrix(action, g) for g in path])
    states = np.array([act(action, g, x0.coords, x0.meta) for g in path])
    if len(path) and np.array_equal(path[0], np.eye(action.ambient_dim)):
        states[0] = x0.coords  # the initial state is reproduced exactly
    return Trajectory(times, states, x0.chart_tag, "reconstruction", path, x0.meta)


def integrate_rom(model: RomModel, t_grid, method: str = "rkmk4") -> Trajectory:
    t = np.asarray(t_grid, float)
    spec = model.action
    if isinstance(model.rho, tuple):
        for r in model.rho:
            r.check_domain(t)
        blocks = [integrate_group(r.matrix, t, method) for r in model.rho]
        n = spec.ambient_dim
        path = np.zeros((t.size, n, n))
        for f, b in enumerate(blocks):
            path[:, 4 * f:4 * f + 4, 4 * f:4 * f + 4] = b
    else:
        model.rho.check_domain(t)
        path = integrate_group(model.rho.matrix, t, method, spec.exp)
    traj = reconstruct(spec, (t, path), model.x0)
    return Trajectory(t, traj.states, traj.chart_tag, "rom", path, model.x0.meta)


def one_step_ahead(spec: ActionSpec, rho: ReducedVectorField, x: np.ndarray, t: float, h: float,
                   method: str = "rkmk4", meta=None) -> np.ndarray:
    """Reconstruction after one step h of the ROM re-seeded at state x."""
    omega = _step(rho.matrix, t, h, method)
    return act(spec, spec.exp(omega), x, meta)


# -- approximated dynamics on the chart -------------------------------------------------

def approximated_field(spec: ActionSpec, rho: ReducedVectorField, meta=None):
    return lambda t, x: generator(spec, rho.matrix(t), x, meta)


def rk4_path(f: Callable[[float, np.ndarray], np.ndarray], x0: np.ndarray, t_grid, substeps: int = 1) -> np.ndarray:
    t = np.asarray(t_grid, float)
    out = np.empty((t.size, np.size(x0)))
    x = np.array(x0, float)
    out[0] = x
    for k in range(t.size - 1):
        x = _rk4_interval(f, x, float(t[k]), float(t[k + 1]), substeps)
        out[k + 1] = x
    return out


def _rk4_interval(f, x, t0, t1, n):
    h = (t1 - t0) / n
    for i in range(n):
        t = t0 + (t1 - t0) * i / n
        k1 = f(t, x)
        k2 = f(t + h / 2, x + h / 2 * k1)
        k3 = f(t + h / 2, x + h / 2 * k2)
        k4 = f(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def integrate_chart(spec: ActionSpec, rho: ReducedVectorField, x0: StatePoint, t_grid) -> Trajectory:
    """Classic RK4 on x' = X_{rho(t)}(x), the approximated dynamics on the chart."""
    states = rk4_path(approximated_field(spec, rho, x0.meta), x0.coords, t_grid)
    return Trajectory(t_grid, states, x0.chart_tag, "reconstruction", None, x0.meta)


def consistency_residual(spec: ActionSpec, traj: Trajectory, rho: ReducedVectorField) -> float:
    """Max metric norm of (central-difference velocity - X_rho(x)) along a reconstruction."""
    t, xs = traj.times, traj.states
    worst = 0.0
    for k in range(1, t.size - 1):
        v = (xs[k + 1] - xs[k - 1]) / (t[k + 1] - t[k - 1])
        r = v - generator(spec, rho.matrix(t[k]), xs[k], traj.meta)
        worst = max(worst, float(np.linalg.norm(whiten_scale(spec.chart, xs[k]) * r)))
    return worst


# -- reference full-order models ---------------------------------------------------------

def radial_oscillator_field(mu: float, a: float = DEFAULT_A, b: float = DEFAULT_B, decoupled: bool = False):
    def f(t, q):
        dq1 = 0.0 if decoupled else q[0] / a * np.sin(b * q[1])
        return np.array([dq1, mu])
    return f


def _adaptive_rk4(f, x0, t_grid, rtol: float = 1e-10, max_doublings: int = 20, domain=None):
    t = np.asarray(t_grid, float)
    out = np.empty((t.size, np.size(x0)))
    x = np.array(x0, float)
    out[0] = x
    for k in range(t.size - 1):
        n = 1
        coarse = _rk4_interval(f, x, t[k], t[k + 1], n)
        for _ in range(max_doublings):
            fine = _rk4_interval(f, x, t[k], t[k + 1], 2 * n)
            n *= 2
            if np.max(np.abs(fine - coarse)) <= rtol * max(1.0, np.max(np.abs(fine))):
                break
            coarse = fine
        x = fine
        if domain is not None:
            domain(x)
        out[k + 1] = x
    return out


def integrate_reference_fom(field: str, params, x0, t_grid, a: float = DEFAULT_A, b: float = DEFAULT_B,
                            decoupled: bool = False, length: float = 2 * np.pi) -> Trajectory:
    """Reference FOM trajectories.

    radial_oscillator: params = (mu,), x0 = (q1, q2); RK4 with step halving.
    linear_transport_grid: params = (mu1, mu2), x0 = grid size; closed form
    u(x, t) = sin(mu2 (x - mu1 t)).
    """
    t = np.asarray(t_grid, float)
    params = np.atleast_1d(np.asarray(params, float))
    if field == "radial_oscillator":
        q0 = np.asarray(x0.coords if isinstance(x0, StatePoint) else x0, float)
        if q0[0] <= 0:
            raise ValueError("radial oscillator requires q1 > 0")

        def check(q):
            if q[0] <= 0:
                raise ValueError("polar chart breakdown: q1 <= 0 reached")

        states = _adaptive_rk4(radial_oscillator_field(params[0], a, b, decoupled), q0, t, domain=check)
        return Trajectory(t, states, "polar2d", "fom")
    if field == "linear_transport_grid":
        n = int(x0.coords.size if isinstance(x0, StatePoint) else x0)
        mu1, mu2 = params[:2]
        x = np.arange(n) * length / n
        states = np.sin(mu2 * (x[None, :] - mu1 * t[:, None]))
        return Trajectory(t, states, "grid1d", "fom", None, {"length": length})
    raise ValueError(f"unknown vector field {field!r}")

