import numpy as np
import pytest

from ahom.cg import SolveParams
from ahom.classical import corrector_energy, make_classical_plan, replicate_mse, run_classical
from ahom.env import ConductanceLaw, Environment, edge
from ahom.lattice import BoxSpec, GridFn, div_a_xi, materialize
from oracles import box_sites, dense_box_operator, divergence_oracle, energy_oracle

LAW = ConductanceLaw.two_point(1, 9)


def test_plan_defaults():
    p = make_classical_plan(2, 6)
    assert p.samples == 64 and p.mu == 2.0 ** -6 and p.box_radius == 8.0
    assert p.layer == 120 and p.solve_radius == 128
    p3 = make_classical_plan(3, 6)
    assert p3.box_radius == 4.0 and p3.mu == 1 / 16


def test_constant_law():
    rep = run_classical(ConductanceLaw.constant(3.0), 2, 0, None, make_classical_plan(2, 3))
    assert rep.estimate == 3.0 and rep.method == "classical"
    assert np.all(rep.extras["energies"] == 3.0)


def test_energy_matches_dense_oracle_9x9():
    env = Environment(LAW, 2, 17)
    box = BoxSpec(2, 4)
    field = materialize(env, box)
    mu = 0.25
    xi = np.array([1.0, 0.0])
    from ahom.cg import cg_solve
    phi = cg_solve(field, SolveParams(mu, 1e-12), div_a_xi(field, xi, box))
    got = corrector_energy(field, xi, phi, 3)

    a = lambda s, i: edge(env, s, i)
    A, sites = dense_box_operator(a, 2, 4, mu)
    sol = np.linalg.solve(A, divergence_oracle(a, 2, sites, xi))
    expect = energy_oracle(a, 2, dict(zip(sites, sol)), 3, xi)
    assert abs(got - expect) < 1e-8


def test_sign_convention_is_weak_form_of_corrector_equation():
    # mu phi - div a (xi + grad phi) = 0  <=>  (mu + L) phi = div a xi
    env = Environment(LAW, 2, 3)
    box = BoxSpec(2, 5)
    field = materialize(env, box)
    xi = np.array([0.0, 1.0])
    from ahom.cg import cg_solve
    phi = cg_solve(field, SolveParams(0.5, 1e-13), div_a_xi(field, xi, box)).values
    p = np.pad(phi, 1)
    a = field.cond
    flux0 = a[0][:-1, 1:-1] * (p[1:, 1:-1] - p[:-1, 1:-1])
    flux1 = a[1][1:-1, :-1] * (xi[1] + p[1:-1, 1:] - p[1:-1, :-1])
    div = (flux0[1:] - flux0[:-1]) + (flux1[:, 1:] - flux1[:, :-1])
    assert np.allclose(0.5 * phi - div, 0, atol=1e-10)


def test_energy_envelope_and_samples_independent():
    plan = make_classical_plan(2, 4)
    rep = run_classical(LAW, 2, 5, None, plan)
    e = rep.extras["energies"]
    assert e.size == 16 and np.all((e >= 0.5) & (e <= 18))
    assert np.unique(e).size == e.size
    other = run_classical(LAW, 2, 6, None, plan).extras["energies"]
    assert not np.any(np.isin(e, other))


def test_replicate_mse_matches_brute_force():
    rng = np.random.default_rng(0)
    truth, bias, sd, m = 3.0, 0.05, 0.4, 16
    e = truth + bias + sd * rng.standard_normal((4000, m))
    direct = np.mean((e.mean(axis=1) - truth) ** 2)
    pooled = replicate_mse(e[:3], truth)
    assert np.isclose(direct, bias ** 2 + sd ** 2 / m, rtol=0.1)
    assert np.isclose(pooled, bias ** 2 + sd ** 2 / m, rtol=0.5)


def test_replicate_mse_needs_two_samples():
    with pytest.raises(ValueError):
        replicate_mse(np.ones((3, 1)), 1.0)
