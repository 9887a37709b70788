"""Matrix Lie algebra and Lie group primitives.

Every group in this package is an embedded matrix subgroup of GL(n); algebra
elements are n x n real matrices and the inner product on the algebra is the
Frobenius inner product of the ambient matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

CLOSURE_TOL = 1e-8


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a map (e.g. log)."""


def _as_matrix(a) -> np.ndarray:
    m = a.matrix if isinstance(a, (AlgebraElement, GroupElement)) else a
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class AlgebraElement:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"algebra element must be square, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("algebra element has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def ambient_dim(self) -> int:
        return self.matrix.shape[0]

    def __add__(self, other):
        return AlgebraElement(self.matrix + _as_matrix(other))

    def __sub__(self, other):
        return AlgebraElement(self.matrix - _as_matrix(other))

    def __mul__(self, s: float):
        return AlgebraElement(self.matrix * s)

    __rmul__ = __mul__

    def __neg__(self):
        return AlgebraElement(-self.matrix)


@dataclass(frozen=True)
class GroupElement:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"group element must be square, got {m.shape}")
        scale = max(1.0, float(np.abs(m).max(initial=0.0))) ** m.shape[0]
        if not np.all(np.isfinite(m)) or abs(np.linalg.det(m)) <= 1e-12 * scale:
            raise ValueError("group element must be finite and invertible")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def ambient_dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.matrix @ _as_matrix(other))

    def inverse(self) -> "GroupElement":
        return GroupElement(np.linalg.inv(self.matrix))

    @classmethod
    def identity(cls, n: int) -> "GroupElement":
        return cls(np.eye(n))


@dataclass(frozen=True)
class AlgebraBasis:
    """Ordered basis of a matrix Lie algebra, stored as a (k, n, n) stack."""

    elements: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        e = np.array(self.elements, dtype=float)
        if e.ndim == 2:
            raise ValueError("basis elements must be a (k, n, n) stack")
        if e.size == 0:
            e = e.reshape(0, *(e.shape[1:] if e.ndim == 3 else (0, 0)))
        e.setflags(write=False)
        object.__setattr__(self, "elements", e)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(e):
                raise ValueError("one label per basis element expected")
            object.__setattr__(self, "labels", labels)
        if len(e) > 1:
            s = np.linalg.svd(_normalized_rows(e), compute_uv=False)
            if s[-1] <= 1e-10:
                raise ValueError("basis elements are linearly dependent")

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.elements.shape[1]

    def __len__(self) -> int:
        return self.dim

    def __getitem__(self, i: int) -> AlgebraElement:
        return AlgebraElement(self.elements[i])

    def is_orthonormal(self, tol: float = 1e-10) -> bool:
        g = gram(self.elements)
        return bool(np.allclose(g, np.eye(self.dim), atol=tol))

    def combine(self, coeffs) -> np.ndarray:
        """Ambient matrix (or stack of matrices) for coefficient vector(s)."""
        return np.tensordot(np.asarray(coeffs, dtype=float), self.elements, axes=(-1, 0))

    def coordinates(self, matrices) -> np.ndarray:
        """Least-squares coordinates of ambient matrices in this basis."""
        m = np.asarray(matrices, dtype=float)
        flat = m.reshape(-1, self.ambient_dim**2)
        B = self.elements.reshape(self.dim, -1)
        if self.is_orthonormal():
            c = flat @ B.T
        else:
            c = np.linalg.lstsq(B.T, flat.T, rcond=None)[0].T
        return c.reshape(m.shape[:-2] + (self.dim,))


@dataclass(frozen=True)
class Subalgebra:
    basis: AlgebraBasis
    parent_dim: int
    closure_residual: float
    closed: bool = True
    rounds: int = 0
    energy_fraction: float | None = None
    kept_directions: np.ndarray | None = field(default=None, repr=False)
    match: str | None = None

    @property
    def dim(self) -> int:
        return self.basis.dim


def _normalized_rows(stack: np.ndarray) -> np.ndarray:
    flat = stack.reshape(len(stack), -1)
    norms = np.linalg.norm(flat, axis=1, keepdims=True)
    return flat / np.where(norms > 0, norms, 1.0)


def inner(a, b) -> float:
    """Frobenius inner product of two algebra elements."""
    return float(np.sum(_as_matrix(a) * _as_matrix(b)))


def gram(stack: np.ndarray) -> np.ndarray:
    flat = np.asarray(stack, dtype=float).reshape(len(stack), -1)
    return flat @ flat.T


# -- exponential and logarithm ---------------------------------------------

def expm(m: np.ndarray) -> np.ndarray:
    return scipy.linalg.expm(m)


def exp_map(a) -> GroupElement:
    m = _as_matrix(a)
    if not np.all(np.isfinite(m)):
        raise ValueError("exp_map: non-finite input")
    return GroupElement(expm(m))


def _check_log_domain(m: np.ndarray) -> None:
    ev = np.linalg.eigvals(m)
    scale = max(1.0, float(np.abs(ev).max()))
    bad = ev[(np.abs(ev.imag) <= 1e-12 * scale) & (ev.real <= 0)]
    if bad.size:
        raise DomainError(
            f"log_map: eigenvalue {bad[0].real:.6g} on the closed negative real axis"
        )


def logm(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    _check_log_domain(m)
    out = scipy.linalg.logm(m)
    return np.real_if_close(out, tol=1e6).real if np.iscomplexobj(out) else out


def log_map(g) -> AlgebraElement:
    return AlgebraElement(logm(_as_matrix(g)))


def exp_blocks(m: np.ndarray, block: int) -> np.ndarray:
    """Exponential of a block-diagonal matrix, one diagonal block at a time."""
    n = m.shape[0]
    if block >= n:
        return expm(m)
    out = np.zeros_like(m)
    for s in range(0, n, block):
        out[s:s + block, s:s + block] = expm(m[s:s + block, s:s + block])
    return out


# -- brackets and derivative of exp -----------------------------------------

def bracket(a, b):
    """Matrix commutator ab - ba.

    Accepts AlgebraElement or raw arrays; raw arrays may be stacks, in which
    case the commutator broadcasts over leading axes.
    """
    if isinstance(a, AlgebraElement) or isinstance(b, AlgebraElement):
        ma, mb = _as_matrix(a), _as_matrix(b)
        if ma.shape != mb.shape:
            raise ValueError(f"bracket: dimension mismatch {ma.shape} vs {mb.shape}")
        return AlgebraElement(ma @ mb - mb @ ma)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-2:] != b.shape[-2:]:
        raise ValueError(f"bracket: dimension mismatch {a.shape} vs {b.shape}")
    return a @ b - b @ a


def dexp(m: np.ndarray, e: np.ndarray, tol: float = 1e-17) -> np.ndarray:
    """Right-trivialized derivative of exp.

    Returns W with d/ds exp(m + s e)|_{s=0} = W exp(m), i.e.
    W = sum_k ad_m^k(e) / (k+1)!. `e` may be a (k, n, n) stack.
    """
    m = np.asarray(m, dtype=float)
    e = np.asarray(e, dtype=float)
    nm = np.linalg.norm(m)
    if nm > 1.0:
        return _dexp_block(m, e)
    term = e.copy()
    out = e.copy()
    k = 1
    while True:
        term = (m @ term - term @ m) / (k + 1)
        out = out + term
        k += 1
        if np.abs(term).max(initial=0.0) <= tol * max(1.0, np.abs(out).max(initial=0.0)) or k > 40:
            return out


def _dexp_block(m: np.ndarray, e: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    stack = e.reshape(-1, n, n)
    inv_exp = expm(-m)
    out = np.empty_like(stack)
    big = np.zeros((2 * n, 2 * n))
    big[:n, :n] = m
    big[n:, n:] = m
    for i, ei in enumerate(stack):
        big[:n, n:] = ei
        out[i] = expm(big)[:n, n:] @ inv_exp
    return out.reshape(e.shape)


def dexpinv(omega: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Inverse of dexp truncated after the second-order bracket term."""
    c1 = omega @ a - a @ omega
    c2 = omega @ c1 - c1 @ omega
    return a - 0.5 * c1 + c2 / 12.0


# -- bases --------------------------------------------------------------------

def basis_orthonormalize(raw: Sequence, rank_tol: float = 1e-10) -> AlgebraBasis:
    """Orthonormal (Frobenius) basis of the span of `raw`.

    Modified Gram-Schmidt with one re-orthogonalization pass; a candidate whose
    residual after projection is below rank_tol * (largest input norm) is dropped.
    """
    mats = [_as_matrix(r) for r in raw]
    if not mats:
        raise ValueError("basis_orthonormalize: empty input")
    n = mats[0].shape[0]
    if any(m.shape != (n, n) for m in mats):
        raise ValueError("basis_orthonormalize: mismatched dimensions")
    scale = max(float(np.linalg.norm(m)) for m in mats)
    kept: list[np.ndarray] = []
    if scale == 0.0:
        return AlgebraBasis(np.zeros((0, n, n)))
    for m in mats:
        v = m.copy()
        for _ in range(2):
            for q in kept:
                v = v - np.sum(q * v) * q
        nv = np.linalg.norm(v)
        if nv > rank_tol * scale:
            kept.append(v / nv)
    return AlgebraBasis(np.array(kept))


def out_of_span(stack: np.ndarray, basis: AlgebraBasis) -> np.ndarray:
    """Components of each matrix in `stack` orthogonal to span(basis)."""
    stack = np.asarray(stack, dtype=float)
    if basis.dim == 0:
        return stack
    return stack - basis.combine(basis.coordinates(stack))


def unit(n: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((n, n))
    e[i, j] = 1.0
    return e


def so3_generators() -> np.ndarray:
    """L_x, L_y, L_z as 3x3 matrices with [L_x, L_y] = L_z."""
    lx = np.array([[0, 0, 0], [0, 0, -1], [0, 1, 0]], float)
    ly = np.array([[0, 0, 1], [0, 0, 0], [-1, 0, 0]], float)
    lz = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 0]], float)
    return np.array([lx, ly, lz])


def aff3_basis() -> AlgebraBasis:
    """Standard orthonormal basis of aff(3) embedded in 4x4 matrices.

    Ordering: the nine linear-part units E_ij (row-major) then three translations.
    """
    els, labels = [], []
    for i in range(3):
        for j in range(3):
            els.append(unit(4, i, j))
            labels.append(f"A{i}{j}")
    for i in range(3):
        els.append(unit(4, i, 3))
        labels.append(f"b{i}")
    return AlgebraBasis(np.array(els), tuple(labels))


def _embed3(m3: np.ndarray) -> np.ndarray:
    out = np.zeros((4, 4))
    out[:3, :3] = m3
    return out


def se3_basis() -> AlgebraBasis:
    """Orthonormal basis of se(3) in 4x4 form: three rotations, three translations."""
    rot = [_embed3(l) / np.sqrt(2.0) for l in so3_generators()]
    trans = [unit(4, i, 3) for i in range(3)]
    return AlgebraBasis(np.array(rot + trans), ("wx", "wy", "wz", "vx", "vy", "vz"))


def hat_se3(twist) -> np.ndarray:
    """4x4 se(3) matrix from (omega, v)."""
    w = np.asarray(twist[:3], float)
    v = np.asarray(twist[3:], float)
    out = np.zeros((4, 4))
    out[:3, :3] = np.tensordot(w, so3_generators(), axes=1)
    out[:3, 3] = v
    return out


def translation_generator(n: int = 2) -> np.ndarray:
    """Nilpotent generator of the 1-parameter translation group as n x n matrix."""
    return unit(n, 0, n - 1)


def block_diag_embed(blocks: Sequence[np.ndarray]) -> np.ndarray:
    return scipy.linalg.block_diag(*blocks)


def product_basis(basis: AlgebraBasis, n_factors: int) -> AlgebraBasis:
    """Basis of the product algebra g x ... x g in block-diagonal form."""
    n = basis.ambient_dim
    els, labels = [], []
    for f in range(n_factors):
        for i, e in enumerate(basis.elements):
            m = np.zeros((n * n_factors, n * n_factors))
            m[f * n:(f + 1) * n, f * n:(f + 1) * n] = e
            els.append(m)
            lab = basis.labels[i] if basis.labels else str(i)
            labels.append(f"{f}:{lab}")
    return AlgebraBasis(np.array(els), tuple(labels))


# -- structure checks ------------------------------------------------------

def is_se3(g, tol: float = 1e-9) -> bool:
    m = _as_matrix(g)
    if m.shape != (4, 4):
        return False
    r = m[:3, :3]
    return bool(
        np.allclose(m[3], [0, 0, 0, 1], atol=tol)
        and np.linalg.norm(r.T @ r - np.eye(3)) < tol
        and np.linalg.det(r) > 0
    )


def is_aff3(g, tol: float = 1e-12) -> bool:
    m = _as_matrix(g)
    return m.shape == (4, 4) and bool(np.allclose(m[3], [0, 0, 0, 1], atol=tol))
