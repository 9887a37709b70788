"""Group actions on state manifolds and their infinitesimal generators.

Four action kinds are supported:

* ``affine_cloud``: Aff(3) (or a subgroup) acting on every particle of a 3D
  point cloud by p -> A p + b.  Group elements are 4x4 homogeneous matrices.
* ``clustered_affine``: a product of affine groups, one factor per particle
  cluster, stored block-diagonally as (4 n_G) x (4 n_G) matrices.
* ``grid_translation``: the additive group R shifting a periodic function
  sampled on a uniform grid, u -> u(. + g), evaluated spectrally.
* ``so2_polar``: rotations acting on polar coordinates, (q1, q2) -> (q1, q2 + a).

The one-parameter groups (grid shifts, polar rotations) are represented by the
unipotent 2x2 matrices [[1, s], [0, 1]], so composition is addition of s.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag

from .lie_core import (
    AlgebraBasis,
    AlgebraElement,
    GroupElement,
    aff3_basis,
    exp_blocks,
    translation_generator,
)

KINDS = ("affine_cloud", "clustered_affine", "grid_translation", "so2_polar")
CHARTS = ("pointcloud3d", "polar2d", "grid1d")


@dataclass(frozen=True)
class StatePoint:
    coords: np.ndarray
    chart_tag: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).ravel()
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        if self.chart_tag not in CHARTS:
            raise ValueError(f"unknown chart {self.chart_tag!r}")
        if self.chart_tag == "pointcloud3d" and c.size % 3:
            raise ValueError("pointcloud coords length must be a multiple of 3")
        if self.chart_tag == "polar2d":
            if c.size != 2:
                raise ValueError("polar2d state must be (q1, q2)")
            if not c[0] > 0:
                raise ValueError("polar2d state requires q1 > 0")

    @property
    def n_particles(self) -> int:
        return self.coords.size // 3

    @property
    def points(self) -> np.ndarray:
        return self.coords.reshape(-1, 3)

    def with_coords(self, coords) -> "StatePoint":
        return StatePoint(coords, self.chart_tag, self.meta)


def cloud(points) -> StatePoint:
    return StatePoint(np.asarray(points, float).ravel(), "pointcloud3d")


def grid_state(u, length: float = 2 * np.pi) -> StatePoint:
    return StatePoint(u, "grid1d", {"length": float(length)})


def polar_state(q1: float, q2: float) -> StatePoint:
    return StatePoint([q1, q2], "polar2d")


@dataclass(frozen=True)
class ActionSpec:
    kind: str
    group_basis: AlgebraBasis
    cluster_assignment: np.ndarray | None = None
    ambient_dim: int = 4

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")
        if self.group_basis.dim and self.group_basis.ambient_dim != self.ambient_dim:
            raise ValueError("basis ambient dimension does not match the action")
        if self.kind == "clustered_affine":
            if self.cluster_assignment is None:
                raise ValueError("clustered_affine needs a cluster assignment")
            a = np.asarray(self.cluster_assignment, dtype=int)
            n_g = self.ambient_dim // 4
            if self.ambient_dim % 4 or a.min(initial=0) < 0 or a.max(initial=-1) >= n_g:
                raise ValueError("cluster assignment out of range")
            if set(np.unique(a)) != set(range(n_g)):
                raise ValueError("cluster assignment must be onto every cluster")
            a.setflags(write=False)
            object.__setattr__(self, "cluster_assignment", a)

    @property
    def dim(self) -> int:
        return self.group_basis.dim

    @property
    def n_factors(self) -> int:
        return self.ambient_dim // 4 if self.kind == "clustered_affine" else 1

    @property
    def block(self) -> int:
        return 4 if self.kind == "clustered_affine" else self.ambient_dim

    @property
    def chart(self) -> str:
        return {
            "affine_cloud": "pointcloud3d",
            "clustered_affine": "pointcloud3d",
            "grid_translation": "grid1d",
            "so2_polar": "polar2d",
        }[self.kind]

    def exp(self, a: np.ndarray) -> np.ndarray:
        """Group matrix exp(a), block-wise for product groups."""
        return exp_blocks(np.asarray(a, float), self.block)

    def identity(self) -> np.ndarray:
        return np.eye(self.ambient_dim)

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "ambient_dim": self.ambient_dim,
            "dim": self.dim,
            "labels": list(self.group_basis.labels or []),
        }
        if self.cluster_assignment is not None:
            out["cluster_assignment"] = [int(c) for c in self.cluster_assignment]
        return out


# -- constructors -------------------------------------------------------------

def affine_cloud_action(basis: AlgebraBasis | None = None) -> ActionSpec:
    return ActionSpec("affine_cloud", basis if basis is not None else aff3_basis())


def clustered_affine_action(assignment, bases: Sequence[AlgebraBasis] | None = None) -> ActionSpec:
    assignment = np.asarray(assignment, dtype=int)
    n_g = int(assignment.max()) + 1
    if bases is None:
        bases = [aff3_basis()] * n_g
    return _block_product(bases, assignment)


def grid_translation_action() -> ActionSpec:
    return ActionSpec(
        "grid_translation",
        AlgebraBasis(translation_generator(2)[None], ("shift",)),
        ambient_dim=2,
    )


def so2_polar_action() -> ActionSpec:
    return ActionSpec(
        "so2_polar",
        AlgebraBasis(translation_generator(2)[None], ("angle",)),
        ambient_dim=2,
    )


def scalar_element(s: float) -> np.ndarray:
    """Matrix form of a shift / rotation angle s for the one-parameter kinds."""
    return np.array([[1.0, float(s)], [0.0, 1.0]])


def _block_product(bases: Sequence[AlgebraBasis], assignment: np.ndarray) -> ActionSpec:
    n_g = len(bases)
    els, labels = [], []
    for f, b in enumerate(bases):
        for i, e in enumerate(b.elements):
            m = np.zeros((4 * n_g, 4 * n_g))
            m[4 * f:4 * f + 4, 4 * f:4 * f + 4] = e
            els.append(m)
            labels.append(f"{f}:{b.labels[i] if b.labels else i}")
    basis = AlgebraBasis(np.array(els).reshape(-1, 4 * n_g, 4 * n_g), tuple(labels))
    return ActionSpec("clustered_affine", basis, assignment, ambient_dim=4 * n_g)


def product_commuting(specs: Sequence[ActionSpec], particle_blocks: Sequence[Sequence[int]]) -> ActionSpec:
    """Product of affine actions on disjoint particle subsets.

    Factors whose group is trivial (empty basis) are dropped. Overlapping
    particle blocks are rejected because commutativity is then not guaranteed.
    """
    if len(specs) != len(particle_blocks):
        raise ValueError("one particle block per factor expected")
    seen: set[int] = set()
    for blk in particle_blocks:
        blk = set(int(i) for i in blk)
        if seen & blk:
            raise ValueError("product_commuting: particle blocks overlap")
        seen |= blk
    kept = [(s, list(b)) for s, b in zip(specs, particle_blocks) if s.dim > 0]
    if len(kept) == 1 and len(kept[0][1]) == len(seen):
        return kept[0][0]
    bases = []
    for s, _ in kept:
        if s.kind != "affine_cloud":
            raise ValueError("product_commuting supports affine_cloud factors")
        bases.append(s.group_basis)
    covered = sorted(i for _, blk in kept for i in blk)
    n = len(covered)
    if covered != list(range(n)):
        raise ValueError("non-trivial factors must cover particles 0..N-1")
    assignment = np.empty(n, dtype=int)
    for f, (_, blk) in enumerate(kept):
        assignment[blk] = f
    return _block_product(bases, assignment)


# -- group element normalization ----------------------------------------------

def group_matrix(spec: ActionSpec, g) -> np.ndarray:
    if isinstance(g, (GroupElement, AlgebraElement)):
        g = g.matrix
    if isinstance(g, (tuple, list)) and spec.kind == "clustered_affine":
        g = block_diag(*[group_matrix(affine_cloud_action(), x) for x in g])
    if np.isscalar(g) and spec.kind in ("grid_translation", "so2_polar"):
        g = scalar_element(g)
    m = np.asarray(g, dtype=float)
    if m.shape != (spec.ambient_dim, spec.ambient_dim):
        raise ValueError(f"group element shape {m.shape} incompatible with {spec.kind}")
    return m


def algebra_matrix(spec: ActionSpec, a) -> np.ndarray:
    if isinstance(a, AlgebraElement):
        a = a.matrix
    if isinstance(a, (tuple, list)) and spec.kind == "clustered_affine":
        a = block_diag(*[np.asarray(x.matrix if isinstance(x, AlgebraElement) else x, float) for x in a])
    if np.isscalar(a) and spec.kind in ("grid_translation", "so2_polar"):
        a = translation_generator(2) * float(a)
    m = np.asarray(a, dtype=float)
    if m.shape != (spec.ambient_dim, spec.ambient_dim):
        raise ValueError(f"algebra element shape {m.shape} incompatible with {spec.kind}")
    return m


def _check_state(spec: ActionSpec, x: StatePoint) -> None:
    if x.chart_tag != spec.chart:
        raise ValueError(f"{spec.kind} acts on {spec.chart}, got {x.chart_tag}")
    if spec.kind == "clustered_affine" and x.n_particles != len(spec.cluster_assignment):
        raise ValueError("particle count does not match the cluster assignment")


# -- spectral helpers -----------------------------------------------------------

def _wavenumbers(n: int, length: float) -> np.ndarray:
    k = 2 * np.pi / length * np.arange(n // 2 + 1)
    if n % 2 == 0:
        k[-1] = 0.0  # Nyquist mode is left invariant
    return k


def spectral_shift(u: np.ndarray, s: float, length: float = 2 * np.pi) -> np.ndarray:
    """u(x + s) for a periodic function sampled on a uniform grid."""
    u = np.asarray(u, float)
    k = _wavenumbers(u.size, length)
    return np.fft.irfft(np.fft.rfft(u) * np.exp(1j * k * s), n=u.size)


def spectral_derivative(u: np.ndarray, length: float = 2 * np.pi) -> np.ndarray:
    u = np.asarray(u, float)
    k = _wavenumbers(u.size, length)
    return np.fft.irfft(np.fft.rfft(u) * (1j * k), n=u.size)


# -- actions on raw coordinates ---------------------------------------------------

def act(spec: ActionSpec, g: np.ndarray, coords: np.ndarray, meta: dict | None = None) -> np.ndarray:
    """Phi(g, x) on raw coordinate arrays (no validation)."""
    if spec.kind == "affine_cloud":
        p = coords.reshape(-1, 3)
        return (p @ g[:3, :3].T + g[:3, 3]).ravel()
    if spec.kind == "clustered_affine":
        p = coords.reshape(-1, 3)
        out = np.empty_like(p)
        for f in range(spec.n_factors):
            idx = spec.cluster_assignment == f
            b = g[4 * f:4 * f + 4, 4 * f:4 * f + 4]
            out[idx] = p[idx] @ b[:3, :3].T + b[:3, 3]
        return out.ravel()
    s = g[0, 1]
    if spec.kind == "so2_polar":
        return np.array([coords[0], coords[1] + s])
    return spectral_shift(coords, s, (meta or {}).get("length", 2 * np.pi))


def generator(spec: ActionSpec, a: np.ndarray, coords: np.ndarray, meta: dict | None = None) -> np.ndarray:
    """X_a(x) on raw arrays; `a` may be a (k, n, n) stack giving (k, D) output."""
    a = np.asarray(a, float)
    stacked = a.ndim == 3
    a3 = a if stacked else a[None]
    if spec.kind == "affine_cloud":
        p = coords.reshape(-1, 3)
        out = np.einsum("kij,nj->kni", a3[:, :3, :3], p) + a3[:, None, :3, 3]
        out = out.reshape(len(a3), -1)
    elif spec.kind == "clustered_affine":
        p = coords.reshape(-1, 3)
        out = np.empty((len(a3),) + p.shape)
        for f in range(spec.n_factors):
            idx = spec.cluster_assignment == f
            b = a3[:, 4 * f:4 * f + 4, 4 * f:4 * f + 4]
            out[:, idx] = np.einsum("kij,nj->kni", b[:, :3, :3], p[idx]) + b[:, None, :3, 3]
        out = out.reshape(len(a3), -1)
    elif spec.kind == "so2_polar":
        out = np.stack([np.zeros(len(a3)), a3[:, 0, 1]], axis=1)
    else:
        du = spectral_derivative(coords, (meta or {}).get("length", 2 * np.pi))
        out = a3[:, 0, 1][:, None] * du[None]
    return out if stacked else out[0]


# -- public operations ------------------------------------------------------------

def apply_action(spec: ActionSpec, g, x: StatePoint) -> StatePoint:
    _check_state(spec, x)
    return x.with_coords(act(spec, group_matrix(spec, g), x.coords, x.meta))


def infinitesimal_generator(spec: ActionSpec, a, x: StatePoint) -> np.ndarray:
    _check_state(spec, x)
    return generator(spec, algebra_matrix(spec, a), x.coords, x.meta)


def generator_matrix_at(spec: ActionSpec, x: StatePoint) -> np.ndarray:
    """dim(M) x dim(g) matrix whose columns span the induced distribution at x."""
    _check_state(spec, x)
    if spec.dim == 0:
        return np.zeros((x.coords.size, 0))
    return generator(spec, spec.group_basis.elements, x.coords, x.meta).T


# -- chart metrics ------------------------------------------------------------------

def embed_blocks(chart: str, coords: np.ndarray, meta: dict | None = None):
    """Blocks (B, d) and weight w such that dist(x, y) = w * sum_b |x_b - y_b|."""
    if chart == "pointcloud3d":
        p = coords.reshape(-1, 3)
        return p, 1.0 / len(p)
    if chart == "polar2d":
        q1, q2 = coords[..., 0], coords[..., 1]
        return np.stack([q1 * np.cos(q2), q1 * np.sin(q2)], -1).reshape(-1, 2), 1.0
    return coords.reshape(1, -1), 1.0 / np.sqrt(coords.size)


def embed_tangent(chart: str, coords: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Push tangent vector(s) v (last axis = coords) into the embedding blocks."""
    if chart == "pointcloud3d":
        return v.reshape(v.shape[:-1] + (-1, 3))
    if chart == "polar2d":
        q1, q2 = coords
        jac = np.array([[np.cos(q2), -q1 * np.sin(q2)], [np.sin(q2), q1 * np.cos(q2)]])
        return (v @ jac.T)[..., None, :]
    return v[..., None, :]


def state_distance(chart: str, x: np.ndarray, y: np.ndarray, meta: dict | None = None) -> float:
    bx, w = embed_blocks(chart, np.asarray(x, float), meta)
    by, _ = embed_blocks(chart, np.asarray(y, float), meta)
    return float(w * np.linalg.norm(bx - by, axis=-1).sum())


def whiten_scale(chart: str, coords: np.ndarray) -> np.ndarray:
    """Diagonal w with <v, u>_x = sum (w v)(w u) for the chart's tangent metric.

    Point clouds use the particle-averaged Euclidean product, polar coordinates
    dq1^2 + q1^2 dq2^2, grids the grid-averaged L2 product.
    """
    n = coords.size
    if chart == "polar2d":
        return np.array([1.0, coords[0]])
    if chart == "pointcloud3d":
        return np.full(n, 1.0 / np.sqrt(n // 3))
    return np.full(n, 1.0 / np.sqrt(n))
