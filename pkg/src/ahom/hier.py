"""Hierarchical resolvent cascade for xi . ahom xi.

Starting from v_{-1} = div(a xi), each level solves

    (2^-k + L) v_k = 2^-k v_{k-1}

and contributes ``2^k * avg_{B_{r_k}} (v_{k-1} v_k + v_k^2)`` to sigma2_hat.
The averaging radius r_k = 2^(n - (1/2 - eps) k) shrinks geometrically while
the conditioning and the boundary layer grow, which keeps the total cost near
n 2^(dn).  The estimate is ``E[xi . a xi] - sigma2_hat``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import check_eps, check_int, check_unit_vector
from .cg import ConvergenceError, SolveParams, WorkCounter, cg_solve
from .env import mean_conductance
from .lattice import BoxSpec, box_average, div_a_xi, materialize
from .report import EstimateReport

__all__ = [
    "boundary_layer",
    "LevelPlan",
    "HierPlan",
    "HierReport",
    "make_plan",
    "run_hier",
    "hier_partial_terms",
    "torus_cascade",
    "level_averages",
]


def boundary_layer(mu):
    """Padding 5 (1 v mu^-1/2)(1 v log2(mu^-1/2)) around a region where the
    solution of (mu + L) u = b must be accurate."""
    s = mu ** -0.5
    return 5.0 * max(1.0, s) * max(1.0, math.log2(s) if s > 1 else 1.0)


@dataclass(frozen=True)
class LevelPlan:
    k: int
    mu: float
    avg_radius: float
    accuracy_radius: int
    layer: int
    solve_radius: int


@dataclass(frozen=True)
class HierPlan:
    dim: int
    n: int
    eps: float
    nesting: str
    levels: tuple

    @property
    def field_radius(self):
        return max(lv.solve_radius for lv in self.levels)

    def truncate(self, n):
        """Keep levels 0..n with this plan's radii (for cumulative refinement)."""
        if not 0 <= n <= self.n:
            raise ValueError(f"cannot truncate a depth-{self.n} plan to {n}")
        return replace(self, n=n, levels=self.levels[: n + 1])


def make_plan(d, n, eps=0.0, nesting="layer"):
    """Radii, layers and masses of the cascade.

    ``nesting="layer"`` solves level k on B_{floor(r_k) + layer_k}.
    ``nesting="nested"`` additionally grows the accuracy radii downwards,
    q_k = max(ceil(r_k), q_{k+1} + layer_{k+1}), so that every right-hand side
    is itself accurate on the whole next solve box.
    """
    d = check_int(d, "d", 2)
    n = check_int(n, "n", 0)
    eps = check_eps(eps, d)
    if nesting not in ("layer", "nested"):
        raise ValueError(f"unknown nesting {nesting!r}")
    r = [2.0 ** (n - (0.5 - eps) * k) for k in range(n + 1)]
    layers = [int(math.ceil(boundary_layer(2.0 ** -k))) for k in range(n + 1)]
    if nesting == "layer":
        q = [int(math.floor(rk)) for rk in r]
    else:
        q = [0] * (n + 1)
        q[n] = int(math.ceil(r[n]))
        for k in range(n - 1, -1, -1):
            q[k] = max(int(math.ceil(r[k])), q[k + 1] + layers[k + 1])
    levels = tuple(
        LevelPlan(k, 2.0 ** -k, r[k], q[k], layers[k], q[k] + layers[k]) for k in range(n + 1))
    return HierPlan(d, n, eps, nesting, levels)


@dataclass
class HierReport:
    sigma2_hat: float
    mean_axia: float
    a_hat: float
    terms: np.ndarray
    work_units: int
    seed: int
    n: int
    eps: float
    law: str
    wall_seconds: float = 0.0
    iterations: list = field(default_factory=list)

    def to_estimate(self, plan=None):
        """The generic :class:`EstimateReport` view of this run."""
        params = {"n": self.n, "eps": self.eps, "law": self.law}
        if plan is not None:
            params["nesting"] = plan.nesting
        return EstimateReport(
            method="hier", seed=self.seed, estimate=self.a_hat, sigma2_stat=self.sigma2_hat,
            work_units=self.work_units, wall_seconds=self.wall_seconds, params=params,
            extras={"terms": self.terms, "mean_axia": self.mean_axia,
                    "iterations": self.iterations})


def run_hier(env, xi, plan, solver=None, mean_budget=None):
    """Run the cascade on one environment.

    ``solver`` is a template: its tolerance, iteration cap and work counter are
    reused at every level with mu = 2^-k.  Solver failure re-raises
    :class:`ConvergenceError` with ``level`` set.
    """
    if plan.dim != env.dim:
        raise ValueError(f"plan is for d={plan.dim}, environment has d={env.dim}")
    xi = check_unit_vector(xi, env.dim)
    solver = SolveParams(1.0) if solver is None else solver
    counter = WorkCounter()
    t0 = time.perf_counter()

    terms = np.zeros(plan.n + 1)
    iterations = []
    for lv, v_prev, v, iters in _cascade(env, xi, plan, solver, counter):
        iterations.append(iters)
        cross = box_average(v_prev, v, radius=lv.avg_radius)
        square = box_average(v, v, radius=lv.avg_radius)
        terms[lv.k] = (cross + square) / lv.mu
    solver.work_counter.add(counter.units)

    if mean_budget is None:
        mean_budget = max(1, int(math.ceil(4.0 ** plan.n * env.law.variance)))
    # E[xi . a xi] = sum_i xi_i^2 E[a] for i.i.d. diagonal coefficients
    mean_axia = float(np.sum(xi ** 2)) * mean_conductance(env, mean_budget)
    sigma2 = float(np.sum(terms))
    return HierReport(
        sigma2_hat=sigma2,
        mean_axia=mean_axia,
        a_hat=mean_axia - sigma2,
        terms=terms,
        work_units=counter.units,
        seed=env.seed,
        n=plan.n,
        eps=plan.eps,
        law=str(env.law),
        wall_seconds=time.perf_counter() - t0,
        iterations=iterations,
    )


def _cascade(env, xi, plan, solver, counter):
    """Yield (level, v_{k-1}, v_k, iterations) for k = 0..n."""
    field = materialize(env, BoxSpec(env.dim, plan.field_radius))
    v_prev = div_a_xi(field, xi, BoxSpec(env.dim, plan.levels[0].solve_radius))
    for lv in plan.levels:
        box = BoxSpec(env.dim, lv.solve_radius)
        params = SolveParams(lv.mu, solver.rel_tol, solver.max_iters, counter)
        before = counter.units
        rhs = v_prev.on(box)
        rhs.values *= lv.mu
        try:
            v = cg_solve(field, params, rhs)
        except ConvergenceError as exc:
            raise ConvergenceError(f"level {lv.k}: {exc}", exc.residual, exc.iterations,
                                   exc.solution, lv.k) from exc
        yield lv, v_prev, v, (counter.units - before) // box.volume - 1
        v_prev = v


def level_averages(env, xi, k, radii, solver=None):
    """2^k avg_{B_r}(v_{k-1} v_k + v_k^2) for every r in ``radii``.

    Levels 0..k are solved on nested boxes around B_max(radii), each padded
    by the boundary layers of all the levels that still follow, so every
    average only sees accurately solved values.
    """
    xi = check_unit_vector(xi, env.dim)
    k = check_int(k, "k", 0)
    radii = [float(r) for r in radii]
    q = int(math.floor(max(radii)))
    layers = [int(math.ceil(boundary_layer(2.0 ** -j))) for j in range(k + 1)]
    levels = tuple(
        LevelPlan(j, 2.0 ** -j, max(radii), q + sum(layers[j + 1:]), layers[j],
                  q + sum(layers[j:])) for j in range(k + 1))
    plan = HierPlan(env.dim, k, 0.0, "nested", levels)
    solver = SolveParams(1.0) if solver is None else solver
    counter = WorkCounter()
    out = None
    for lv, v_prev, v, _ in _cascade(env, xi, plan, solver, counter):
        if lv.k == k:
            out = np.array([(box_average(v_prev, v, radius=r) + box_average(v, v, radius=r))
                            / lv.mu for r in radii])
    solver.work_counter.add(counter.units)
    return out


def hier_partial_terms(report):
    """Per-level contributions 2^k avg(v_{k-1} v_k + v_k^2); they sum to sigma2_hat."""
    return np.array(report.terms, copy=True)


def torus_cascade(torus, xi, n):
    """The same cascade on a periodic field, with exact dense resolvents.

    Returns ``(partial_sums, remainder, exact)`` where ``exact`` is
    <f, L^-1 f> for f = div(a xi) under the uniform measure on the torus.
    """
    from .chain import ChainSpec, Schedule, pgk_decomposition

    L = torus.laplacian()
    f = torus.div_a_xi(xi).ravel()
    spec = ChainSpec("continuous", L, np.full(f.size, 1.0 / f.size), f)
    dec = pgk_decomposition(spec, Schedule("geometric", n))
    return np.cumsum(dec.terms), dec.remainder, dec.exact
