import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import sg_from_coeffs
from morlie.lie_core import AlgebraBasis, aff3_basis, bracket, out_of_span, se3_basis, so3_generators, unit
from morlie.subalgebra import bracket_closure, closure_residual, library, match_library, subalgebra_search

seeds = st.integers(0, 2**31 - 1)


def embed(m3):
    out = np.zeros((4, 4))
    out[:3, :3] = m3
    return out


def test_so3_pair_closes_to_so3():
    lx, ly, lz = (embed(m) for m in so3_generators())
    sub = bracket_closure(AlgebraBasis(np.array([lx, ly]) / np.sqrt(2)))
    assert sub.basis.dim == 3 and sub.closed
    assert np.linalg.norm(out_of_span(lz[None], sub.basis)) < 1e-12
    assert match_library(sub.basis) == "so(3)"


def test_closed_basis_is_fixed_point():
    sub = bracket_closure(se3_basis())
    assert sub.basis.dim == 6 and sub.rounds == 1 and sub.closed
    np.testing.assert_allclose(sub.basis.elements, se3_basis().elements)


def test_single_translation_unchanged():
    sub = bracket_closure(AlgebraBasis(unit(4, 0, 3)[None]))
    assert sub.basis.dim == 1 and sub.closed and sub.closure_residual == 0.0


@given(seeds)
def test_closure_dimension_monotone_and_bounded(seed):
    rng = np.random.default_rng(seed)
    els = rng.normal(size=(2, 4, 4))
    els[:, 3] = 0
    start = AlgebraBasis(els)
    dims = [bracket_closure(start, max_rounds=r).basis.dim for r in range(1, 6)]
    assert dims == sorted(dims) and dims[-1] <= 12 and dims[0] >= 2
    final = bracket_closure(start)
    assert final.closed and final.closure_residual <= 1e-8


def test_max_rounds_exceeded_is_flagged():
    rng = np.random.default_rng(0)
    els = rng.normal(size=(2, 4, 4))
    els[:, 3] = 0
    sub = bracket_closure(AlgebraBasis(els), max_rounds=1)
    assert not sub.closed and sub.rounds == 1


def test_proportional_columns_give_line():
    a = np.random.default_rng(2).normal(size=12)
    coeffs = np.outer(np.linspace(-1, 2, 30), a)
    sub = subalgebra_search(sg_from_coeffs(coeffs, aff3_basis()))
    assert sub.basis.dim == 1 and sub.closed
    np.testing.assert_allclose(np.abs(sub.basis.elements[0].ravel() @ aff3_basis().combine(a).ravel()),
                               np.linalg.norm(a), rtol=1e-10)


def test_random_columns_reach_full_aff3():
    coeffs = np.random.default_rng(5).normal(size=(200, 12))
    gram_rank = np.linalg.matrix_rank(coeffs.T @ coeffs)
    assert gram_rank == 12
    sub = subalgebra_search(sg_from_coeffs(coeffs, aff3_basis()), 0.99)
    assert sub.basis.dim == 12 and sub.match == "aff(3)"


def test_se3_motion_in_aff3_coordinates_gives_se3():
    rng = np.random.default_rng(11)
    tw = se3_basis().combine(rng.normal(size=(300, 6)))
    coeffs = aff3_basis().coordinates(tw) + 1e-12 * rng.normal(size=(300, 12))
    sub = subalgebra_search(sg_from_coeffs(coeffs, aff3_basis()), 0.99)
    assert sub.basis.dim == 6 and sub.match == "se(3)"


@given(seeds)
def test_search_invariants(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 5))
    directions = rng.normal(size=(k, 12))
    coeffs = rng.normal(size=(60, k)) @ directions + 1e-3 * rng.normal(size=(60, 12))
    sub = subalgebra_search(sg_from_coeffs(coeffs, aff3_basis()), 0.9)
    # energy accounting against an independent SVD
    s = np.linalg.svd(coeffs, compute_uv=False)
    n_kept = len(sub.kept_directions)
    assert np.sum(s[:n_kept]) > 0.9 * s.sum()
    assert n_kept == 1 or np.sum(s[: n_kept - 1]) <= 0.9 * s.sum()
    assert sub.energy_fraction == pytest.approx(s[:n_kept].sum() / s.sum(), rel=1e-12)
    # containment and closure
    assert np.abs(out_of_span(sub.kept_directions, sub.basis)).max() <= 1e-10
    assert closure_residual(sub.basis) <= 1e-8
    assert sub.basis.dim >= n_kept


def test_zero_matrix_gives_empty_subalgebra():
    sub = subalgebra_search(sg_from_coeffs(np.zeros((5, 12)), aff3_basis()))
    assert sub.basis.dim == 0 and sub.closed


def test_library_entries_are_subalgebras():
    for name, els in library().items():
        b = AlgebraBasis(els)
        assert closure_residual(b) <= 1e-12, name
        assert match_library(b) == name


def test_match_rejects_rotated_subspace():
    lx, ly, _ = (embed(m) for m in so3_generators())
    assert match_library(AlgebraBasis(np.array([lx, ly]))) is None
    assert bracket(lx, ly).shape == (4, 4)
