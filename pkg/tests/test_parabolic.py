import numpy as np
import pytest

from ahom.env import ConductanceLaw, Environment, edge
from ahom.lattice import materialize_torus
from ahom.parabolic import make_parabolic_plan, run_parabolic, spectral_identity_check, \
    torus_dense_value, torus_parabolic_sum
from oracles import mean_zero_solve, spectral_tail, torus_generator

LAW = ConductanceLaw.two_point(1, 9)


@pytest.fixture(scope="module")
def torus12():
    env = Environment(LAW, 2, 31)
    return env, materialize_torus(env, 12)


def test_blocks_tile_steps():
    plan = make_parabolic_plan(2, 6)
    ks = [k for _, lo, hi, _ in plan.blocks() for k in range(lo, hi + 1)]
    assert ks == list(range(plan.steps))
    assert plan.radii[0] == 64 and np.isclose(plan.radii[5], 2 ** 3.5)
    assert plan.domain_radius == 64 + int(8 * 3 * 5)


def test_constant_law():
    rep = run_parabolic(Environment(ConductanceLaw.constant(2.0), 2), None,
                        make_parabolic_plan(2, 4))
    assert rep.sigma2_stat == 0 and rep.estimate == 2.0


def test_half_factor_is_exact_scaling():
    env = Environment(LAW, 2, 4)
    on = run_parabolic(env, None, make_parabolic_plan(2, 5, True))
    off = run_parabolic(env, None, make_parabolic_plan(2, 5, False))
    assert np.isclose(off.sigma2_stat, 2 * on.sigma2_stat, rtol=1e-14)


def test_reasonable_estimate():
    rep = run_parabolic(Environment(LAW, 2, 1), None, make_parabolic_plan(2, 6))
    assert abs(rep.estimate - 3.0) < 0.3
    assert rep.work_units == 63 * (2 * rep.params["domain_radius"] + 1) ** 2


def test_first_term(torus12):
    _, t = torus12
    pi = t.pi().ravel()
    g = t.div_a_xi(None).ravel() / pi
    P = np.eye(pi.size) - t.laplacian() / (2 * pi[:, None])
    expect = 0.5 * (np.mean(pi * g * g) + np.mean(pi * g * (P @ g)))
    assert np.isclose(torus_parabolic_sum(t, None, 0)[0], expect)


def test_dense_value_against_oracle(torus12):
    env, t = torus12
    L, sites = torus_generator(lambda s, i: edge(env, s, i), 2, 12)
    pi = np.diag(L).copy()
    f = np.array([edge(env, s, 0) - edge(env, ((s[0] - 1) % 12, s[1]), 0) for s in sites])
    g = f / pi
    L1 = L / pi[:, None]
    x = mean_zero_solve(L1, pi, g)
    assert np.isclose(torus_dense_value(t, None), np.mean(pi * g * x), rtol=1e-9)


def test_residual_decreasing(torus12):
    _, t = torus12
    assert spectral_identity_check(t, None, 512) <= spectral_identity_check(t, None, 64)


def test_residual_matches_spectral_tail(torus12):
    _, t = torus12
    pi = t.pi().ravel()
    g = t.div_a_xi(None).ravel() / pi
    P = np.eye(pi.size) - t.laplacian() / (2 * pi[:, None])
    s = np.sqrt(pi / pi.size)
    S = s[:, None] * P / s[None, :]
    p, V = np.linalg.eigh(0.5 * (S + S.T))
    c = V.T @ (s * g)
    keep = p < 1 - 1e-12
    tail = spectral_tail(p[keep], c[keep] ** 2, 256)
    assert np.isclose(spectral_identity_check(t, None, 256), tail, rtol=1e-6, atol=1e-14)


def test_contraction_in_sup_norm(torus12):
    _, t = torus12
    pi = t.pi().ravel()
    P = np.eye(pi.size) - t.laplacian() / (2 * pi[:, None])
    u = np.random.default_rng(0).standard_normal(pi.size)
    assert np.abs(P @ u).max() <= np.abs(u).max()
    assert np.all(P >= -1e-15)
