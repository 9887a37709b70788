"""Minimal subalgebras containing the dominant directions of a reduced snapshot matrix."""
from __future__ import annotations

import numpy as np
from scipy.linalg import subspace_angles

from .fitting import ReducedSnapshotMatrix
from .lie_core import (
    CLOSURE_TOL,
    AlgebraBasis,
    Subalgebra,
    aff3_basis,
    basis_orthonormalize,
    out_of_span,
    se3_basis,
    so3_generators,
    unit,
)

MAX_ROUNDS = 16
MATCH_ANGLE = 1e-6


def _pairwise_brackets(els: np.ndarray) -> np.ndarray:
    i, j = np.triu_indices(len(els), k=1)
    if i.size == 0:
        return np.zeros((0,) + els.shape[1:])
    a, b = els[i], els[j]
    return a @ b - b @ a


def closure_residual(basis: AlgebraBasis) -> float:
    """Largest out-of-span norm of [e_i, e_j] relative to |e_i| |e_j|."""
    els = basis.elements
    if len(els) < 2:
        return 0.0
    br = _pairwise_brackets(els)
    i, j = np.triu_indices(len(els), k=1)
    norms = np.linalg.norm(els.reshape(len(els), -1), axis=1)
    res = np.linalg.norm(out_of_span(br, basis).reshape(len(br), -1), axis=1)
    return float(np.max(res / (norms[i] * norms[j])))


def bracket_closure(basis: AlgebraBasis, closure_tol: float = CLOSURE_TOL,
                    max_rounds: int = MAX_ROUNDS, parent_dim: int | None = None) -> Subalgebra:
    """Extend `basis` by brackets until its span is closed under the bracket.

    Each round brackets all pairs and adds the out-of-span parts larger than
    closure_tol; the round in which nothing is added ends the loop.
    """
    n = basis.ambient_dim
    parent_dim = parent_dim or n * n
    h = basis if basis.is_orthonormal() else basis_orthonormalize(list(basis.elements))
    dims = [h.dim]
    rounds = 0
    closed = False
    resid = closure_residual(h)
    while rounds < max_rounds:
        rounds += 1
        resid = closure_residual(h)
        if resid <= closure_tol:
            closed = True
            break
        br = out_of_span(_pairwise_brackets(h.elements), h)
        norms = np.linalg.norm(br.reshape(len(br), -1), axis=1)
        new = br[norms > closure_tol]
        h = basis_orthonormalize(list(h.elements) + list(new), rank_tol=closure_tol)
        dims.append(h.dim)
    if not closed:
        resid = closure_residual(h)
        closed = resid <= closure_tol
    return Subalgebra(h, parent_dim, resid, closed, rounds)


def _energy_rank(s: np.ndarray, a: float) -> int:
    total = s.sum()
    if total == 0:
        return 0
    cum = np.cumsum(s) / total
    return int(min(np.searchsorted(cum, a, side="right") + 1, s.size))


def subalgebra_search(Sg: ReducedSnapshotMatrix, energy_fraction: float = 0.99,
                      closure_tol: float = CLOSURE_TOL, max_rounds: int = MAX_ROUNDS) -> Subalgebra:
    """SVD of the reduced snapshot matrix, then bracket closure of the kept directions.

    Keeps the smallest k with sum_{i<=k} s_i > a * sum_i s_i.
    """
    if not 0 < energy_fraction < 1:
        raise ValueError("energy fraction must lie in (0, 1)")
    basis = Sg.basis
    coeffs = Sg.coeffs
    if not basis.is_orthonormal():
        ortho = basis_orthonormalize(list(basis.elements))
        coeffs = ortho.coordinates(Sg.ambient())
        basis = ortho
    u, s, _ = np.linalg.svd(coeffs.T, full_matrices=False)
    k = _energy_rank(s, energy_fraction)
    n = basis.ambient_dim
    if k == 0:
        kept = np.zeros((0, n, n))
        sub = Subalgebra(AlgebraBasis(kept), basis.dim, 0.0, True, 0)
        captured = 0.0
    else:
        kept = basis.combine(u[:, :k].T)
        sub = bracket_closure(AlgebraBasis(kept), closure_tol, max_rounds, basis.dim)
        captured = float(s[:k].sum() / s.sum())
    return Subalgebra(sub.basis, basis.dim, sub.closure_residual, sub.closed, sub.rounds,
                      captured, kept, match_library(sub.basis))


# -- library of known subalgebras of aff(3) ---------------------------------------------

def _embed(m3):
    out = np.zeros((4, 4))
    out[:3, :3] = m3
    return out


def library() -> dict[str, np.ndarray]:
    trans = [unit(4, i, 3) for i in range(3)]
    so3 = [_embed(l) for l in so3_generators()]
    diag = [unit(4, i, i) for i in range(3)]
    sl3 = [unit(4, i, j) for i in range(3) for j in range(3) if i != j]
    sl3 += [unit(4, 0, 0) - unit(4, 1, 1), unit(4, 1, 1) - unit(4, 2, 2)]
    return {
        "so(3)": np.array(so3),
        "translations": np.array(trans),
        "se(3)": se3_basis().elements,
        "scalings+translations": np.array(diag + trans),
        "sl(3)+translations": np.array(sl3 + trans),
        "aff(3)": aff3_basis().elements,
    }


def match_library(basis: AlgebraBasis, angle_tol: float = MATCH_ANGLE) -> str | None:
    """Name of the library subalgebra whose span equals basis' span, if any."""
    if basis.dim == 0 or basis.ambient_dim != 4:
        return None
    a = basis.elements.reshape(basis.dim, -1).T
    for name, els in library().items():
        if len(els) != basis.dim:
            continue
        if np.max(subspace_angles(a, els.reshape(len(els), -1).T)) < angle_tol:
            return name
    return None
