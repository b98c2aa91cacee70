"""Unpreconditioned conjugate gradient for (mu + L) u = b on a box."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .lattice import GridFn

__all__ = ["WorkCounter", "SolveParams", "ConvergenceError", "cg_solve", "default_max_iters"]


class WorkCounter:
    """Running tally of stencil applications times sites."""

    def __init__(self, units=0):
        self.units = int(units)

    def add(self, units):
        self.units += int(units)

    def __repr__(self):
        return f"WorkCounter({self.units})"


class ConvergenceError(RuntimeError):
    """CG ran out of iterations.  Carries the last iterate and its residual."""

    def __init__(self, message, residual=None, iterations=None, solution=None, level=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.solution = solution
        self.level = level


def default_max_iters(mu):
    # condition number ~ 1/mu, so sqrt(kappa) iterations with headroom
    return int(20 * math.sqrt(2.0 / mu)) + 1000


def iteration_bound(mu, pi_max, rel_tol):
    """Classical CG bound for the residual to drop by ``rel_tol``.

    kappa <= (mu + 2 pi_max) / mu by Gershgorin; the extra sqrt(kappa) inside
    the log converts the energy-norm bound into a residual bound.
    """
    kappa = (mu + 2.0 * pi_max) / mu
    return int(math.ceil(0.5 * math.sqrt(kappa) * math.log(2.0 * math.sqrt(kappa) / rel_tol)))


@dataclass
class SolveParams:
    mu: float
    rel_tol: float = 1e-10
    max_iters: int | None = None
    work_counter: WorkCounter = field(default_factory=WorkCounter)

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not 0 < self.rel_tol < 1:
            raise ValueError(f"rel_tol must lie in (0, 1), got {self.rel_tol}")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def with_mu(self, mu):
        """Same tolerance, cap and counter; different mass."""
        return SolveParams(mu, self.rel_tol, self.max_iters, self.work_counter)


def cg_solve(field, params, b, x0=None, residual_history=None):
    """Solve (mu + L) u = b on ``b.box`` with zero exterior values.

    The work counter grows by (iterations + 1) * box volume.  Raises
    :class:`ConvergenceError` if ``max_iters`` is exhausted first.  When
    ``params.max_iters`` is None the cap is the larger of
    ``20 sqrt(2/mu) + 1000`` and the CG bound for this field's contrast.
    """
    f = field.sub(b.box.radius)
    flat, strides, rows, m = f.kernel_args()
    diag = f.diagonal(params.mu)
    max_iters = params.max_iters
    if max_iters is None:
        pi_max = float(diag.max()) - params.mu
        max_iters = max(default_max_iters(params.mu),
                        iteration_bound(params.mu, pi_max, params.rel_tol) + 100)
    rhs = b.padded()
    x = np.zeros_like(rhs) if x0 is None else x0.on(b.box).padded()
    hist = np.zeros(0) if residual_history is None else residual_history
    if f.box.dim == 2:
        sh = (m + 2, m + 2)
        iters, res, ok = _kernels.cg_2d(
            flat[0].reshape(sh), flat[1].reshape(sh), diag.reshape(sh), rhs.reshape(sh),
            x.reshape(sh), float(params.rel_tol), int(max_iters), hist)
    else:
        iters, res, ok = _kernels.cg(flat, strides, rows, m, diag, rhs, x,
                                     float(params.rel_tol), int(max_iters), hist)
    params.work_counter.add((iters + 1) * b.box.volume)
    u = GridFn.from_padded(b.box, x)
    if not ok:
        raise ConvergenceError(
            f"CG did not reach rel_tol={params.rel_tol:g} in {iters} iterations "
            f"(residual {res:.3e})", residual=res, iterations=iters, solution=u)
    return u
