import numpy as np
import pytest

from ahom.env import ConductanceLaw, Environment
from ahom.walk import WalkConfig, extrapolated_estimator, naive_estimator, simulate_batch, \
    simulate_vsrw, walk_stats
from oracles import harmonic_mean

LAW = ConductanceLaw.two_point(1, 9)


def test_zero_horizon():
    s = simulate_vsrw(Environment(LAW, 2, 1), None, 0.0)
    assert s.displacement_t == 0 and s.displacement_2t == 0 and s.jumps == 0


def test_displacement_bounded_by_jumps():
    for seed in range(20):
        s = simulate_vsrw(Environment(LAW, 2, seed), None, 5.0)
        assert abs(s.displacement_t) <= abs(s.displacement_2t) + s.jumps
        assert abs(s.displacement_2t) <= s.jumps


def test_fixed_seed_reproducible():
    env = Environment(LAW, 2, 3)
    assert simulate_vsrw(env, None, 10.0) == simulate_vsrw(env, None, 10.0)
    cfg = WalkConfig(1, 10.0, seed_base=4)
    assert naive_estimator(cfg, LAW) == naive_estimator(cfg, LAW)


def test_trajectories_independent_of_batch_size():
    a, ja = simulate_batch(LAW, 2, None, [5.0, 10.0], 50, seed_base=2)
    b, jb = simulate_batch(LAW, 2, None, [5.0, 10.0], 20, seed_base=2, offset=30)
    assert np.array_equal(a[30:], b) and np.array_equal(ja[30:], jb)


def test_constant_law_variance():
    cfg = WalkConfig(10 ** 4, 100.0, seed_base=1)
    est = naive_estimator(cfg, ConductanceLaw.constant(2.0))
    assert abs(est - 4.0) < 0.05 * 4.0


def test_extrapolation_identity():
    cfg = WalkConfig(500, 20.0, seed_base=5)
    disp, _ = simulate_batch(LAW, 2, None, [20.0, 40.0], 500, seed_base=5)
    block_t = np.mean(disp[:, 0] ** 2) / 20.0
    block_2t = np.mean(disp[:, 1] ** 2) / 40.0
    assert np.isclose(extrapolated_estimator(cfg, LAW), 2 * block_2t - block_t)


def test_independent_blocks_option():
    s = walk_stats(WalkConfig(2000, 10.0, reuse_path=False, seed_base=1),
                   ConductanceLaw.constant(1.5))
    assert abs(s.a_hat - 1.5) < 4 * s.se_extrapolated / 2


def test_one_dimensional_harmonic_mean():
    # in d = 1 the homogenized coefficient is the harmonic mean of the law
    target = harmonic_mean([1.0, 9.0], [0.5, 0.5])
    assert np.isclose(target, 1.8)
    s = walk_stats(WalkConfig(20000, 1000.0, seed_base=7), LAW, dim=1)
    assert abs(s.naive_2t / 2 - target) < 4 * s.se_naive_2t / 2 + 0.03


def test_two_point_rough_value():
    s = walk_stats(WalkConfig(5000, 50.0, seed_base=11), LAW)
    assert abs(s.a_hat - 3.0) < 4 * s.se_extrapolated / 2 + 0.05
    assert np.isfinite(s.kurtosis_t) and s.kurtosis_t < 50


def test_config_validation():
    with pytest.raises(ValueError):
        WalkConfig(0, 10.0)
    with pytest.raises(ValueError):
        WalkConfig(10, 1.0)
