import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from morlie.datagen import BenchmarkConfig, generate
from morlie.lie_core import expm, hat_se3, is_aff3, is_se3
from morlie.rom import integrate_group


def test_defaults():
    cfg = BenchmarkConfig()
    assert (cfg.n_traj, cfg.n_particles, cfg.n_steps, cfg.T, cfg.sigma) == (9, 99, 999, 5.0, 0.01)
    S, truth = generate(cfg)
    assert S.n_traj == 9 and S.width == 3 * 99 and S.times[0].size == 1000
    assert all(is_se3(g) for g in truth.group_path[::100])
    p = truth.initial[0]
    assert p.min() >= 0 and p.max() <= 1


def test_determinism():
    cfg = BenchmarkConfig("sheering", n_steps=50)
    a, ta = generate(cfg)
    b, tb = generate(cfg)
    assert a.equals(b)
    np.testing.assert_array_equal(ta.group_path, tb.group_path)
    assert not a.equals(generate(cfg.with_(rng_seed=1))[0])


def test_zero_twist_and_noise_is_static():
    S, _ = generate(BenchmarkConfig(n_traj=2, n_particles=5, n_steps=20, sigma=0.0, twist=(0,) * 6))
    for x in S.states:
        assert np.array_equal(x, np.tile(x[0], (len(x), 1)))


def test_constant_twist_relative_transforms():
    tw = (0.3, -0.2, 0.5, 0.1, 0.4, -0.3)
    cfg = BenchmarkConfig(n_traj=1, n_particles=5, n_steps=100, T=0.5, sigma=0.0, twist=tw)
    _, truth = generate(cfg)
    dt = 0.5 / 100
    # spatial and body twists agree for a constant body twist: H(t) = exp(T t)
    step = expm(hat_se3(tw) * dt)
    for rel in truth.relative_transforms():
        np.testing.assert_allclose(rel, step, atol=1e-10)


def test_twist_spline_uses_all_channels():
    _, truth = generate(BenchmarkConfig(n_traj=1, n_particles=4, n_steps=100, sigma=0.0))
    tw = truth.spatial_twist
    assert np.all(np.abs(tw[:, :3, :]).max(axis=0)[np.triu_indices(3, 1)] > 0)
    assert np.all(np.abs(tw[:, :3, 3]).max(axis=0) > 0)
    assert np.ptp(tw, axis=0).max() > 0.1  # not constant


def test_noise_statistics():
    sigma = 0.01
    cfg = BenchmarkConfig(n_traj=1, n_particles=99, n_steps=199, sigma=sigma)
    noisy, truth = generate(cfg)
    clean, _ = generate(cfg.with_(sigma=0.0))
    eta = noisy.states[0] - clean.states[0]
    assert eta.size // 3 >= 1e4
    assert np.std(eta) == pytest.approx(sigma, rel=0.05)


def test_sheering_defaults_and_truth():
    S, truth = generate(BenchmarkConfig("sheering", n_steps=200, sigma=0.0))
    assert S.width == 3 * 200
    assert np.bincount(truth.assignment).tolist() == [100, 100]
    t = truth.times
    for c in range(2):
        blk = truth.group_path[:, 4 * c:4 * c + 4, 4 * c:4 * c + 4]
        assert all(is_aff3(g) for g in blk)
        # cluster-wise transforms from an independent finer integration of the generator
        gen = truth.spatial_twist[:, 4 * c:4 * c + 4, 4 * c:4 * c + 4]
        sp = CubicSpline(t, gen, axis=0)
        fine = integrate_group(sp, np.linspace(0, t[-1], 2 * t.size - 1))[::2]
        np.testing.assert_allclose(fine[-1], blk[-1], atol=1e-8)
    # state = per-cluster transform of the initial cloud
    p0 = truth.initial[0]
    g = truth.group_path[-1]
    end = S.states[0][-1].reshape(-1, 3)
    for c in range(2):
        b = g[4 * c:4 * c + 4, 4 * c:4 * c + 4]
        idx = truth.assignment == c
        np.testing.assert_allclose(end[idx], p0[idx] @ b[:3, :3].T + b[:3, 3], atol=1e-12)


def test_single_cluster_without_shear_is_rigid():
    _, truth = generate(BenchmarkConfig("sheering", n_steps=50, cluster_sizes=(30,), shear=False, sigma=0.0))
    assert all(is_se3(g, tol=1e-9) for g in truth.group_path)


def test_radial_and_transport_shapes():
    S, truth = generate(BenchmarkConfig("radial"))
    assert truth is None and S.chart_tag == "polar2d" and S.n_traj == 3
    np.testing.assert_array_equal([p[0] for p in S.params], [0.5, 1.0, 2.0])
    T, _ = generate(BenchmarkConfig("transport"))
    assert T.n_traj == 9 and T.width == 256


def test_transport_rejects_non_integer_wavenumber():
    with pytest.raises(ValueError):
        generate(BenchmarkConfig("transport", mu2_values=(1.5,)))
    with pytest.raises(ValueError):
        generate(BenchmarkConfig("transport", grid_size=100))


def test_invalid_configs():
    for kw in ({"family": "liver"}, {"n_traj": 0}, {"T": -1.0}, {"sigma": -0.1}):
        with pytest.raises(ValueError):
            BenchmarkConfig(**kw)
