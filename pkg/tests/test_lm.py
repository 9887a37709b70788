import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from morlie.lm import LMConfig, block_cost, lm_minimize


def affine_problem(rng, n_blocks=20, d=3, p=4, noise=0.0):
    a = rng.normal(size=(n_blocks, d, p))
    x_true = rng.normal(size=p)
    b = np.einsum("bdp,p->bd", a, x_true) + noise * rng.normal(size=(n_blocks, d))
    return (lambda x: np.einsum("bdp,p->bd", a, x) - b), (lambda x: a), x_true


def test_zero_residual_affine_recovers_solution(rng):
    res, jac, x_true = affine_problem(rng)
    out = lm_minimize(res, jac, np.zeros(4), 1 / 20)
    assert out.converged
    np.testing.assert_allclose(out.x, x_true, atol=1e-8)
    assert out.cost < 1e-10


def test_cost_at_start_zero_returns_immediately():
    out = lm_minimize(lambda x: np.zeros((2, 3)), lambda x: np.zeros((2, 3, 1)), np.ones(1), 1.0)
    assert out.converged and out.iterations == 0 and out.cost == 0.0


@given(st.integers(0, 2**31 - 1))
def test_history_non_increasing_and_below_start(seed):
    rng = np.random.default_rng(seed)
    res, jac, _ = affine_problem(rng, noise=0.5)
    x0 = rng.normal(size=4) * 3
    out = lm_minimize(res, jac, x0, 1 / 20)
    h = np.array(out.history)
    assert np.all(np.diff(h) <= 0)
    assert out.cost == h[-1] <= block_cost(res(x0), 1 / 20)


def test_noisy_minimum_beats_random_perturbations(rng):
    res, jac, _ = affine_problem(rng, noise=0.3)
    out = lm_minimize(res, jac, np.zeros(4), 1 / 20)
    for _ in range(100):
        d = rng.normal(size=4)
        d *= 1e-3 / np.linalg.norm(d)
        assert block_cost(res(out.x + d), 1 / 20) >= out.cost - 1e-12


def test_iteration_cap_flags_non_convergence(rng):
    res, jac, _ = affine_problem(rng, noise=0.3)
    out = lm_minimize(res, jac, np.full(4, 10.0), 1 / 20, LMConfig(max_iters=1, rel_tol=0.0))
    assert not out.converged and out.iterations == 1


def test_multiplicative_retraction():
    # minimize |x - 3| over x > 0 with updates x -> x * exp(d)
    out = lm_minimize(
        lambda x: (x - 3.0).reshape(1, 1),
        lambda x: x.reshape(1, 1, 1),
        np.array([0.5]),
        1.0,
        retract=lambda x, d: x * np.exp(d),
    )
    assert out.converged and abs(out.x[0] - 3.0) < 1e-8
