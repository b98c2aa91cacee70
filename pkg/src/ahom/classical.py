"""Classical corrector baseline: energies of massive correctors on independent boxes.

Each of the 2^n samples draws its own environment, solves

    (mu_n + L) phi = div(a xi)      (mu_n = 2^-n)

on a box padded by the boundary layer, and averages the energy density
(xi + grad phi) . a (xi + grad phi) over the inner box.  The mean over the
samples estimates xi . ahom xi directly.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ._hash import derived_seed
from ._validation import check_int, check_unit_vector
from .cg import ConvergenceError, SolveParams, WorkCounter, cg_solve
from .env import Environment
from .hier import boundary_layer
from .lattice import BoxSpec, GridFn, div_a_xi, materialize
from .report import EstimateReport

__all__ = ["ClassicalPlan", "make_classical_plan", "corrector_energy", "run_classical",
           "replicate_mse"]


@dataclass(frozen=True)
class ClassicalPlan:
    dim: int
    n: int
    samples: int
    mu: float
    box_radius: float
    layer: int

    @property
    def solve_radius(self):
        return int(math.floor(self.box_radius)) + self.layer


def make_classical_plan(d, n, samples=None, box_radius=None):
    """Defaults: 2^n samples, boxes of radius 2^(n/d) and mass radius^-2.

    In d = 2 this is mu_n = 2^-n on B_{2^(n/2)}.
    """
    d = check_int(d, "d", 1)
    n = check_int(n, "n", 0)
    samples = 2 ** n if samples is None else check_int(samples, "samples", 1)
    box_radius = 2.0 ** (n / d) if box_radius is None else float(box_radius)
    if box_radius < 1:
        raise ValueError("box_radius must be >= 1")
    mu = box_radius ** -2.0
    layer = int(math.ceil(boundary_layer(mu)))
    return ClassicalPlan(d, n, samples, mu, box_radius, layer)


def corrector_energy(field, xi, phi, radius):
    """Average of sum_i a_i(x) (xi_i + phi(x + e_i) - phi(x))^2 over B_radius."""
    rho = int(math.floor(radius))
    if rho + 1 > phi.box.radius:
        raise ValueError("phi must extend one site beyond the averaging box")
    d = phi.box.dim
    off = phi.box.radius - rho
    core = (slice(off, off + 2 * rho + 1),) * d
    here = phi.values[core]
    coff = field.box.radius - rho + 1
    total = np.zeros_like(here)
    for i in range(d):
        fwd = list(core)
        fwd[i] = slice(off + 1, off + 2 * rho + 2)
        a = field.cond[(i,) + (slice(coff, coff + 2 * rho + 1),) * d]
        total += a * (xi[i] + phi.values[tuple(fwd)] - here) ** 2
    return float(np.sum(total) / total.size)


def _one_sample(env, xi, plan, params):
    box = BoxSpec(env.dim, plan.solve_radius)
    field = materialize(env, box)
    phi = cg_solve(field, params, div_a_xi(field, xi, box))
    return corrector_energy(field, xi, phi, plan.box_radius)


def run_classical(law, dim, seed_base, xi, plan, solver=None):
    """Average corrector energy over ``plan.samples`` independent environments.

    Sample i uses the environment seeded by a hash of (seed_base, i).  The
    per-sample energies are returned in ``extras["energies"]``.
    """
    if plan.dim != dim:
        raise ValueError(f"plan is for d={plan.dim}, got d={dim}")
    xi = check_unit_vector(xi, dim)
    solver = SolveParams(plan.mu) if solver is None else solver
    counter = WorkCounter()
    params = SolveParams(plan.mu, solver.rel_tol, solver.max_iters, counter)
    t0 = time.perf_counter()
    energies = np.empty(plan.samples)
    for i in range(plan.samples):
        env = Environment(law, dim, derived_seed(seed_base, i))
        try:
            energies[i] = _one_sample(env, xi, plan, params)
        except ConvergenceError as exc:
            raise ConvergenceError(f"sample {i}: {exc}", exc.residual, exc.iterations,
                                   exc.solution, i) from exc
    solver.work_counter.add(counter.units)
    estimate = float(np.sum(energies) / energies.size)
    return EstimateReport(
        method="classical",
        seed=int(seed_base),
        estimate=estimate,
        sigma2_stat=estimate,
        work_units=counter.units,
        wall_seconds=time.perf_counter() - t0,
        params={"n": plan.n, "samples": plan.samples, "mu": plan.mu,
                "box_radius": plan.box_radius, "solve_radius": plan.solve_radius},
        extras={"energies": energies},
    )


def replicate_mse(energies, truth):
    """Mean squared error of a 2^n-sample average, from pooled samples.

    ``energies`` has shape (replicates, samples).  The squared bias is taken
    from the grand mean (minus its own variance) and the variance from the
    pooled per-sample spread, which is far less noisy than the spread of a
    handful of replicate means.
    """
    e = np.asarray(energies, dtype=np.float64)
    if e.ndim != 2 or e.shape[1] < 2:
        raise ValueError("need a (replicates, samples >= 2) array")
    R, m = e.shape
    s2 = float(np.var(e - e.mean(axis=1, keepdims=True), ddof=0) * m / (m - 1))
    bias2 = (float(e.mean()) - truth) ** 2 - s2 / (R * m)
    return max(bias2, 0.0) + s2 / m
