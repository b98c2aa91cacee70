import numpy as np
import pytest

from ahom.cg import ConvergenceError, SolveParams, WorkCounter, cg_solve, iteration_bound
from ahom.env import ConductanceLaw, Environment, edge
from ahom.lattice import BoxSpec, GridFn, apply_operator, div_a_xi, materialize
from oracles import dense_box_operator

LAW = ConductanceLaw.two_point(1, 9)


def setup(radius=4, seed=0, dim=2):
    env = Environment(LAW, dim, seed)
    box = BoxSpec(dim, radius)
    return env, box, materialize(env, box)


def test_zero_rhs():
    _, box, f = setup()
    p = SolveParams(0.5)
    u = cg_solve(f, p, GridFn.zeros(box))
    assert np.all(u.values == 0)
    assert p.work_counter.units == box.volume     # the initial residual only


@pytest.mark.parametrize("dim", [2, 3])
def test_round_trip(dim):
    rng = np.random.default_rng(dim)
    _, box, f = setup(radius=5 if dim == 2 else 3, dim=dim)
    mu = 0.1
    u_star = GridFn(box, rng.standard_normal(box.shape))
    b = apply_operator(f, mu, u_star)
    u = cg_solve(f, SolveParams(mu, rel_tol=1e-10), b)
    e = u.values - u_star.values
    Ae = apply_operator(f, mu, GridFn(box, e)).values
    A_us = apply_operator(f, mu, u_star).values
    assert np.sqrt(np.sum(e * Ae)) <= 10 * 1e-10 * np.sqrt(np.sum(u_star.values * A_us)) * 10


def test_matches_dense_solve_9x9():
    env, box, f = setup(radius=4, seed=12)
    rng = np.random.default_rng(5)
    b = GridFn(box, rng.standard_normal(box.shape))
    A, _ = dense_box_operator(lambda s, i: edge(env, s, i), 2, 4, 0.25)
    exact = np.linalg.solve(A, b.values.ravel())
    u = cg_solve(f, SolveParams(0.25, rel_tol=1e-12), b)
    assert np.max(np.abs(u.values.ravel() - exact)) < 1e-8


def test_work_counter_and_residual():
    _, box, f = setup(radius=6)
    rng = np.random.default_rng(1)
    b = GridFn(box, rng.standard_normal(box.shape))
    counter = WorkCounter()
    hist = np.zeros(500)
    u = cg_solve(f, SolveParams(0.2, 1e-10, None, counter), b, residual_history=hist)
    iters = int(np.count_nonzero(hist)) - 1
    assert counter.units == (iters + 1) * box.volume
    r = b.values - apply_operator(f, 0.2, u).values
    assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(b.values) * 1.01


def test_nonconvergence_raises_with_residual():
    _, box, f = setup(radius=8)
    b = GridFn(box, np.ones(box.shape))
    with pytest.raises(ConvergenceError) as info:
        cg_solve(f, SolveParams(1e-3, 1e-12, max_iters=3), b)
    assert info.value.residual > 0 and info.value.iterations == 3
    assert info.value.solution is not None


def test_energy_error_monotone():
    env, box, f = setup(radius=3, seed=4)
    mu = 0.05
    A, _ = dense_box_operator(lambda s, i: edge(env, s, i), 2, 3, mu)
    rng = np.random.default_rng(2)
    b = GridFn(box, rng.standard_normal(box.shape))
    exact = np.linalg.solve(A, b.values.ravel())
    errs = []
    for m in range(1, 40):
        try:
            u = cg_solve(f, SolveParams(mu, 1e-14, max_iters=m), b)
        except ConvergenceError as exc:
            u = exc.solution
        e = u.values.ravel() - exact
        errs.append(e @ A @ e)
    errs = np.array(errs)
    assert np.all(np.diff(errs) <= 1e-12 * errs[0])


def test_initial_guess_independent():
    _, box, f = setup(radius=6, seed=3)
    rng = np.random.default_rng(3)
    b = GridFn(box, rng.standard_normal(box.shape))
    p = SolveParams(0.1, 1e-11)
    u0 = cg_solve(f, p, b)
    u1 = cg_solve(f, p, b, x0=GridFn(box, rng.standard_normal(box.shape)))
    assert np.allclose(u0.values, u1.values, atol=1e-8)


def test_deterministic():
    _, box, f = setup(radius=10, seed=9)
    b = GridFn(box, np.random.default_rng(0).standard_normal(box.shape))
    u0 = cg_solve(f, SolveParams(0.01), b)
    u1 = cg_solve(f, SolveParams(0.01), b)
    assert np.array_equal(u0.values, u1.values)


def test_iteration_growth_like_sqrt_condition():
    # the box must be wide compared with mu^-1/2 or its own Dirichlet gap
    # caps the condition number
    env, box, f = setup(radius=256, seed=2)
    # the right-hand side the estimators actually solve with
    b = div_a_xi(f, None, box)
    iters = []
    for k in range(11):
        counter = WorkCounter()
        cg_solve(f, SolveParams(2.0 ** -k, 1e-10, None, counter), b)
        iters.append(counter.units // box.volume - 1)
    slope = np.polyfit(np.arange(11), np.log2(iters), 1)[0]
    assert 0.35 <= slope <= 0.65


def test_iteration_bound_covers_observed():
    # the default cap must not be the binding constraint at high contrast
    assert iteration_bound(2.0 ** -10, 36.0, 1e-10) > 20 * np.sqrt(2 * 2 ** 10) + 1000


def test_params_validation():
    with pytest.raises(ValueError):
        SolveParams(0.0)
    with pytest.raises(ValueError):
        SolveParams(1.0, rel_tol=1.5)
    with pytest.raises(ValueError):
        SolveParams(1.0, max_iters=0)
