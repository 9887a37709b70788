import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from morlie.lie_core import (
    AlgebraBasis,
    AlgebraElement,
    DomainError,
    GroupElement,
    aff3_basis,
    basis_orthonormalize,
    bracket,
    dexp,
    dexpinv,
    exp_map,
    expm,
    hat_se3,
    is_aff3,
    is_se3,
    log_map,
    so3_generators,
    se3_basis,
    unit,
)

from conftest import random_aff3, random_se3

finite = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)
mat4 = arrays(np.float64, (4, 4), elements=finite)


def taylor_exp(m, terms=60):
    out, term = np.eye(len(m)), np.eye(len(m))
    for k in range(1, terms):
        term = term @ m / k
        out = out + term
    return out


# -- exp / log ---------------------------------------------------------------------

def test_exp_of_zero_is_identity():
    assert np.array_equal(exp_map(np.zeros((4, 4))).matrix, np.eye(4))


def test_exp_quarter_turn_matches_power_series():
    a = np.array([[0.0, -np.pi / 2], [np.pi / 2, 0.0]])
    oracle = taylor_exp(a)
    np.testing.assert_allclose(oracle, [[0, -1], [1, 0]], atol=1e-14)
    np.testing.assert_allclose(exp_map(a).matrix, oracle, atol=1e-12)


def test_exp_of_translation_generator_is_pure_translation():
    b = np.array([0.3, -1.2, 2.0])
    a = sum(bi * unit(4, i, 3) for i, bi in enumerate(b))
    g = exp_map(a).matrix
    np.testing.assert_array_equal(g[:3, :3], np.eye(3))
    np.testing.assert_allclose(g[:3, 3], b, atol=1e-15)


def test_exp_rejects_non_finite():
    with pytest.raises(ValueError):
        exp_map(np.full((4, 4), np.nan))


def test_log_identity_is_zero():
    np.testing.assert_allclose(log_map(np.eye(4)).matrix, 0.0, atol=1e-15)


def test_log_of_large_rotation_recovers_angle():
    theta = np.pi - 0.1
    c, s = np.cos(theta), np.sin(theta)
    g = np.eye(4)
    g[:2, :2] = [[c, -s], [s, c]]
    a = log_map(g).matrix
    np.testing.assert_allclose(a, hat_se3([0, 0, theta, 0, 0, 0]), atol=1e-9)


def test_log_domain_error_names_eigenvalue():
    g = np.diag([-2.0, 1.0, 1.0, 1.0])
    with pytest.raises(DomainError, match="-2"):
        log_map(g)


@given(mat4)
def test_exp_log_roundtrip(m):
    n = np.linalg.norm(m)
    a = m * (0.5 / n) if n > 0.5 else m
    a[3] = 0.0
    back = log_map(exp_map(a)).matrix
    assert np.linalg.norm(back - a) <= 1e-9


@given(mat4)
def test_exp_times_exp_of_negative_is_identity(m):
    np.testing.assert_allclose(exp_map(m).matrix @ exp_map(-m).matrix, np.eye(4), atol=1e-10)


@given(arrays(np.float64, 6, elements=finite))
def test_exp_preserves_se3(tw):
    assert is_se3(exp_map(hat_se3(tw * 3)).matrix)


@given(mat4)
def test_exp_preserves_aff3(m):
    m = m.copy()
    m[3] = 0
    assert is_aff3(exp_map(m).matrix)


def test_group_element_rejects_singular():
    with pytest.raises(ValueError):
        GroupElement(np.zeros((3, 3)))


# -- brackets ------------------------------------------------------------------

def test_bracket_self_is_zero(rng):
    a = random_aff3(rng)
    np.testing.assert_array_equal(bracket(AlgebraElement(a), AlgebraElement(a)).matrix, 0.0)


def test_so3_commutator():
    lx, ly, lz = so3_generators()
    np.testing.assert_array_equal(lx @ ly - ly @ lx, lz)
    np.testing.assert_array_equal(bracket(lx, ly), lz)


def test_translations_commute():
    np.testing.assert_array_equal(bracket(unit(4, 0, 3), unit(4, 1, 3)), 0.0)


def test_bracket_dimension_mismatch():
    with pytest.raises(ValueError):
        bracket(AlgebraElement(np.zeros((3, 3))), AlgebraElement(np.zeros((4, 4))))


@given(st.integers(0, 2**31 - 1))
def test_bracket_bilinear_antisymmetric(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_aff3(rng) for _ in range(3))
    x, y = rng.normal(size=2)
    np.testing.assert_allclose(bracket(x * a + y * b, c), x * bracket(a, c) + y * bracket(b, c), atol=1e-12)
    np.testing.assert_allclose(bracket(a, b), -bracket(b, a), atol=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_jacobi_identity(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_aff3(rng) for _ in range(3))
    j = bracket(a, bracket(b, c)) + bracket(b, bracket(c, a)) + bracket(c, bracket(a, b))
    assert np.abs(j).max() <= 1e-10


# -- dexp ----------------------------------------------------------------------

@pytest.mark.parametrize("scale", [0.05, 2.0])
def test_dexp_matches_finite_difference(rng, scale):
    m, e = random_aff3(rng, scale), random_aff3(rng)
    h = 1e-6
    fd = (expm(m + h * e) - expm(m - h * e)) / (2 * h)
    np.testing.assert_allclose(dexp(m, e) @ expm(m), fd, atol=1e-7 * max(1, np.abs(fd).max()))


def test_dexpinv_inverts_dexp_to_third_order(rng):
    m, e = random_aff3(rng, 1e-2), random_aff3(rng)
    err = np.abs(dexpinv(m, dexp(m, e)) - e).max()
    assert err < 1e-5


# -- bases ---------------------------------------------------------------------

def test_orthonormalize_dependent_pair(rng):
    a = random_aff3(rng)
    b = basis_orthonormalize([a, 2 * a])
    assert b.dim == 1
    np.testing.assert_allclose(b.elements[0], a / np.linalg.norm(a), atol=1e-14)


def test_orthonormalize_keeps_orthonormal_basis():
    e = aff3_basis().elements[:2]
    b = basis_orthonormalize(list(e))
    np.testing.assert_allclose(np.abs(b.elements), np.abs(e), atol=1e-15)


def test_orthonormalize_random_aff3(rng):
    raw = [random_aff3(rng) for _ in range(12)]
    b = basis_orthonormalize(raw)
    assert b.dim == 12
    g = b.elements.reshape(12, -1) @ b.elements.reshape(12, -1).T
    assert np.abs(g - np.eye(12)).max() < 1e-10


def test_orthonormalize_all_zero_gives_empty_basis():
    assert basis_orthonormalize([np.zeros((4, 4))] * 3).dim == 0


def test_basis_rejects_dependent_elements(rng):
    a = random_aff3(rng)
    with pytest.raises(ValueError):
        AlgebraBasis(np.array([a, 3 * a]))


def test_standard_bases_are_orthonormal():
    assert aff3_basis().is_orthonormal()
    assert se3_basis().is_orthonormal()
    for e in se3_basis().elements:
        np.testing.assert_allclose(e[:3, :3], -e[:3, :3].T, atol=1e-12)
        np.testing.assert_array_equal(e[3], 0.0)


def test_coordinates_roundtrip(rng):
    b = se3_basis()
    c = rng.normal(size=(5, 6))
    np.testing.assert_allclose(b.coordinates(b.combine(c)), c, atol=1e-13)
    assert np.allclose(b.combine(c)[0], random_se3(np.random.default_rng(0)) * 0 + b.combine(c)[0])
