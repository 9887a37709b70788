"""Deterministic synthetic benchmarks: rigid and sheering point clouds,
the radial oscillator and linear transport on a periodic grid."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

from .fitting import SnapshotSet
from .lie_core import hat_se3, so3_generators
from .rom import DEFAULT_A, DEFAULT_B, integrate_group, integrate_reference_fom

FAMILIES = ("rigid", "sheering", "radial", "transport")

_FAMILY_DEFAULTS = {
    "rigid": dict(n_steps=999, T=5.0),
    "sheering": dict(n_steps=999, T=5.0),
    "radial": dict(n_steps=1000, T=10.0),
    "transport": dict(n_steps=100, T=5.0),
}


@dataclass(frozen=True)
class BenchmarkConfig:
    family: str = "rigid"
    n_traj: int = 9
    n_particles: int = 99
    n_steps: int | None = None
    T: float | None = None
    sigma: float = 0.01
    rng_seed: int = 0
    # generator splines
    n_knots: int = 5
    rot_amp: float = 0.5
    trans_amp: float = 0.3
    shear_amp: float = 0.2
    twist: tuple | None = None  # constant body twist (omega, v) overriding the spline
    # sheering clouds
    cluster_sizes: tuple = (100, 100)
    cluster_offset: float = 3.0
    shear: bool = True
    # radial oscillator
    mu_values: tuple = (0.5, 1.0, 2.0)
    q0: tuple = (1.0, 0.1)
    a: float = DEFAULT_A
    b: float = DEFAULT_B
    decoupled: bool = False
    # linear transport
    mu1_values: tuple = (-1.0, 0.5, 2.0)
    mu2_values: tuple = (1, 2, 3)
    grid_size: int = 256
    length: float = 2 * np.pi

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown benchmark family {self.family!r}")
        d = _FAMILY_DEFAULTS[self.family]
        if self.n_steps is None:
            object.__setattr__(self, "n_steps", d["n_steps"])
        if self.T is None:
            object.__setattr__(self, "T", d["T"])
        if min(self.n_traj, self.n_particles, self.n_steps) < 1:
            raise ValueError("n_traj, n_particles and n_steps must be >= 1")
        if self.T <= 0 or self.sigma < 0:
            raise ValueError("T must be positive and sigma non-negative")

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_steps + 1)

    def with_(self, **kw) -> "BenchmarkConfig":
        return replace(self, **kw)


@dataclass
class Truth:
    times: np.ndarray
    group_path: np.ndarray  # (K, n, n) spatial group element mapping the initial state
    spatial_twist: np.ndarray  # (K, n, n) rho(t) with g' = rho g
    assignment: np.ndarray | None = None
    initial: list = field(default_factory=list)  # noiseless initial clouds per trajectory

    def relative_transforms(self) -> np.ndarray:
        g = self.group_path
        return g[1:] @ np.linalg.inv(g[:-1])


def _streams(seed: int, n: int):
    ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(n)]


def _spline(rng, t_end: float, n_knots: int, amps: np.ndarray) -> CubicSpline:
    knots = np.linspace(0.0, t_end, max(n_knots, 2))
    values = rng.uniform(-1.0, 1.0, size=(knots.size, amps.size)) * amps
    return CubicSpline(knots, values, axis=0)


def _observe(rng, clean: np.ndarray, sigma: float) -> np.ndarray:
    if sigma == 0:
        return clean
    return clean + rng.normal(0.0, sigma, size=clean.shape)


def gen_rigid_cloud(cfg: BenchmarkConfig = BenchmarkConfig()):
    """Rigidly moving clouds: p_k = H(t_k) p_0 + noise, with H' = H T(t), H(0) = I.

    All trajectories share the body twist T(t); each has its own initial cloud
    drawn uniformly in the unit box.
    """
    t = cfg.times()
    rngs = _streams(cfg.rng_seed, cfg.n_traj + 1)
    if cfg.twist is not None:
        tw = np.asarray(cfg.twist, float)
        body = lambda s: hat_se3(tw)
    else:
        amps = np.array([cfg.rot_amp] * 3 + [cfg.trans_amp] * 3)
        sp = _spline(rngs[0], cfg.T, cfg.n_knots, amps)
        body = lambda s: hat_se3(sp(s))
    # H^{-1} solves (H^{-1})' = -T H^{-1}, a right-trivialized equation
    inv_path = integrate_group(lambda s: -body(s), t, "rkmk4")
    path = np.linalg.inv(inv_path)
    twist = np.array([h @ body(s) @ ih for h, s, ih in zip(path, t, inv_path)])
    states, initial = [], []
    for j in range(cfg.n_traj):
        rng = rngs[j + 1]
        p0 = rng.uniform(0.0, 1.0, size=(cfg.n_particles, 3))
        clean = np.einsum("kij,nj->kni", path[:, :3, :3], p0) + path[:, None, :3, 3]
        states.append(_observe(rng, clean, cfg.sigma).reshape(t.size, -1))
        initial.append(p0)
    S = SnapshotSet("pointcloud3d", (t,) * cfg.n_traj, tuple(states))
    return S, Truth(t, path, twist, None, initial)


def _aff_generator(v: np.ndarray) -> np.ndarray:
    """aff(3) matrix from (omega[3], shear[6], translation[3])."""
    out = np.zeros((4, 4))
    lin = np.tensordot(v[:3], so3_generators(), axes=1)
    s = np.zeros((3, 3))
    s[np.triu_indices(3)] = v[3:9]
    lin = lin + (s + s.T) / 2.0
    out[:3, :3] = lin
    out[:3, 3] = v[9:12]
    return out


def gen_sheering_clouds(cfg: BenchmarkConfig = BenchmarkConfig(family="sheering")):
    """Clusters of particles, each moved by its own affine flow g' = A_c(t) g.

    Cluster c starts uniformly in a unit box shifted by c * cluster_offset
    along x. Particle ids are ordered cluster by cluster.
    """
    t = cfg.times()
    n_g = len(cfg.cluster_sizes)
    rngs = _streams(cfg.rng_seed, cfg.n_traj + n_g)
    shear_amp = cfg.shear_amp if cfg.shear else 0.0
    amps = np.array([cfg.rot_amp] * 3 + [shear_amp] * 6 + [cfg.trans_amp] * 3)
    paths, twists = [], []
    for c in range(n_g):
        sp = _spline(rngs[c], cfg.T, cfg.n_knots, amps)
        gen = lambda s, sp=sp: _aff_generator(sp(s))
        paths.append(integrate_group(gen, t, "rkmk4"))
        twists.append(np.array([gen(s) for s in t]))
    assignment = np.repeat(np.arange(n_g), cfg.cluster_sizes)
    n = 4 * n_g
    path = np.zeros((t.size, n, n))
    twist = np.zeros((t.size, n, n))
    for c in range(n_g):
        path[:, 4 * c:4 * c + 4, 4 * c:4 * c + 4] = paths[c]
        twist[:, 4 * c:4 * c + 4, 4 * c:4 * c + 4] = twists[c]
    states, initial = [], []
    for j in range(cfg.n_traj):
        rng = rngs[n_g + j]
        p0 = rng.uniform(0.0, 1.0, size=(assignment.size, 3))
        p0[:, 0] += assignment * cfg.cluster_offset
        clean = np.empty((t.size, assignment.size, 3))
        for c in range(n_g):
            idx = assignment == c
            g = paths[c]
            clean[:, idx] = np.einsum("kij,nj->kni", g[:, :3, :3], p0[idx]) + g[:, None, :3, 3]
        states.append(_observe(rng, clean, cfg.sigma).reshape(t.size, -1))
        initial.append(p0)
    S = SnapshotSet("pointcloud3d", (t,) * cfg.n_traj, tuple(states))
    return S, Truth(t, path, twist, assignment, initial)


def gen_radial_oscillator(cfg: BenchmarkConfig = BenchmarkConfig(family="radial")) -> SnapshotSet:
    """Radial oscillator trajectories, one per mu value, from a common (q1, q2)."""
    if cfg.q0[0] <= 0:
        raise ValueError("radial oscillator requires q1_0 > 0")
    t = cfg.times()
    states = [
        integrate_reference_fom("radial_oscillator", [mu], cfg.q0, t, cfg.a, cfg.b, cfg.decoupled).states
        for mu in cfg.mu_values
    ]
    return SnapshotSet("polar2d", (t,) * len(states), tuple(states),
                       tuple(np.array([mu]) for mu in cfg.mu_values))


def gen_linear_transport(cfg: BenchmarkConfig = BenchmarkConfig(family="transport")) -> SnapshotSet:
    """Sampled closed-form solutions sin(mu2 (x - mu1 t)) on a periodic grid."""
    n = cfg.grid_size
    if n < 2 or n & (n - 1):
        raise ValueError("grid size must be a power of two")
    mu2s = np.asarray(cfg.mu2_values, float)
    if np.any(mu2s != np.round(mu2s)) or not np.isclose(cfg.length, 2 * np.pi):
        raise ValueError("mu2 must be an integer on the 2*pi-periodic grid")
    t = cfg.times()
    states, params = [], []
    for mu1 in cfg.mu1_values:
        for mu2 in mu2s:
            traj = integrate_reference_fom("linear_transport_grid", [mu1, mu2], n, t, length=cfg.length)
            states.append(traj.states)
            params.append(np.array([mu1, mu2]))
    return SnapshotSet("grid1d", (t,) * len(states), tuple(states), tuple(params),
                       meta={"length": float(cfg.length)})


def generate(cfg: BenchmarkConfig):
    """Dispatch on cfg.family; returns (SnapshotSet, Truth or None)."""
    if cfg.family == "rigid":
        return gen_rigid_cloud(cfg)
    if cfg.family == "sheering":
        return gen_sheering_clouds(cfg)
    if cfg.family == "radial":
        return gen_radial_oscillator(cfg), None
    return gen_linear_transport(cfg), None
