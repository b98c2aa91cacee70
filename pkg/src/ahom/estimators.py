"""scikit-learn style wrappers around the estimation routines.

The "samples" an estimator sees are random seeds: ``fit(seeds)`` runs the
method once per seed and stores the per-seed reports, ``transform(seeds)``
returns the per-seed estimates as a column.  Hyperparameters live in the
constructor, so ``get_params`` / ``set_params`` / ``clone`` work as usual and
a configured estimator can be shipped to a worker process.

>>> est = HierarchicalEstimator(n=4).fit([0, 1, 2])
>>> est.estimates_.shape
(3,)
"""
from __future__ import annotations

import math
import time

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_int, check_seeds
from .cg import SolveParams
from .classical import make_classical_plan, run_classical
from .env import Environment, parse_law
from .hier import make_plan, run_hier
from .parabolic import make_parabolic_plan, run_parabolic
from .report import EstimateReport
from .walk import WalkConfig, walk_stats

__all__ = ["HierarchicalEstimator", "ClassicalEstimator", "ParabolicEstimator",
           "WalkEstimator"]


class _SeedEstimator(TransformerMixin, BaseEstimator):
    """Shared fit/transform over seeds; subclasses implement ``_run_one``."""

    def _run_one(self, seed):
        raise NotImplementedError

    def _validate(self):
        parse_law(self.law)
        check_int(self.d, "d", 1)

    def fit(self, X, y=None):
        """Run the method on every seed in ``X``.

        ``y`` may carry the true value; it is only used to fill ``errors_``.
        """
        self._validate()
        seeds = check_seeds(X)
        self.reports_ = [self._run_one(int(s)) for s in seeds]
        self.seeds_ = seeds
        self.estimates_ = np.array([r.estimate for r in self.reports_])
        self.sigma2_stats_ = np.array([r.sigma2_stat for r in self.reports_])
        self.work_units_ = np.array([r.work_units for r in self.reports_], dtype=np.int64)
        self.a_hat_ = float(np.mean(self.estimates_))
        m = self.estimates_.size
        self.stderr_ = float(np.std(self.estimates_, ddof=1) / math.sqrt(m)) if m > 1 else np.nan
        if y is not None:
            self.errors_ = self.estimates_ - float(np.mean(y))
        return self

    def transform(self, X):
        """Per-seed estimates, reusing fitted runs where the seed matches."""
        check_is_fitted(self, "reports_")
        seeds = check_seeds(X)
        known = {int(s): r for s, r in zip(self.seeds_, self.reports_)}
        out = [known[int(s)].estimate if int(s) in known else self._run_one(int(s)).estimate
               for s in seeds]
        return np.asarray(out).reshape(-1, 1)

    def score(self, X, y):
        """Negative root mean square error of the per-seed estimates against ``y``."""
        est = self.transform(X).ravel()
        truth = np.broadcast_to(np.asarray(y, dtype=np.float64), est.shape)
        return -float(np.sqrt(np.mean((est - truth) ** 2)))


class HierarchicalEstimator(_SeedEstimator):
    """Hierarchical resolvent cascade at depth ``n``."""

    def __init__(self, n=6, d=2, law="bernoulli:1,9", eps=0.0, xi=None, nesting="layer",
                 rel_tol=1e-10, max_iters=None):
        self.n = n
        self.d = d
        self.law = law
        self.eps = eps
        self.xi = xi
        self.nesting = nesting
        self.rel_tol = rel_tol
        self.max_iters = max_iters

    def _validate(self):
        super()._validate()
        self.plan_ = make_plan(self.d, self.n, self.eps, self.nesting)

    def _run_one(self, seed):
        env = Environment(parse_law(self.law), self.d, seed)
        solver = SolveParams(1.0, self.rel_tol, self.max_iters)
        return run_hier(env, self.xi, self.plan_, solver).to_estimate(self.plan_)


class ClassicalEstimator(_SeedEstimator):
    """Corrector energies on 2^n independent boxes; each seed is one macro-replicate."""

    def __init__(self, n=6, d=2, law="bernoulli:1,9", xi=None, samples=None,
                 rel_tol=1e-10, max_iters=None):
        self.n = n
        self.d = d
        self.law = law
        self.xi = xi
        self.samples = samples
        self.rel_tol = rel_tol
        self.max_iters = max_iters

    def _validate(self):
        super()._validate()
        self.plan_ = make_classical_plan(self.d, self.n, self.samples)

    def _run_one(self, seed):
        solver = SolveParams(self.plan_.mu, self.rel_tol, self.max_iters)
        return run_classical(parse_law(self.law), self.d, seed, self.xi, self.plan_, solver)


class ParabolicEstimator(_SeedEstimator):
    """Explicit parabolic iteration for 2^L - 1 steps."""

    def __init__(self, L=6, d=2, law="bernoulli:1,9", xi=None, half_factor=True):
        self.L = L
        self.d = d
        self.law = law
        self.xi = xi
        self.half_factor = half_factor

    def _validate(self):
        super()._validate()
        self.plan_ = make_parabolic_plan(self.d, self.L, self.half_factor)

    def _run_one(self, seed):
        env = Environment(parse_law(self.law), self.d, seed)
        return run_parabolic(env, self.xi, self.plan_)


class WalkEstimator(_SeedEstimator):
    """Extrapolated random-walk estimator; each seed keys N fresh trajectories."""

    def __init__(self, N=10000, t=100.0, d=2, law="bernoulli:1,9", xi=None, reuse_path=True):
        self.N = N
        self.t = t
        self.d = d
        self.law = law
        self.xi = xi
        self.reuse_path = reuse_path

    def _validate(self):
        super()._validate()
        WalkConfig(self.N, self.t, self.reuse_path)

    def _run_one(self, seed):
        t0 = time.perf_counter()
        cfg = WalkConfig(self.N, self.t, self.reuse_path, seed)
        s = walk_stats(cfg, self.law, self.xi, self.d)
        return EstimateReport(
            method="mc", seed=seed, estimate=s.a_hat, sigma2_stat=s.extrapolated,
            # one work unit per simulated jump
            work_units=s.jumps, wall_seconds=time.perf_counter() - t0,
            params={"N": self.N, "t": self.t, "reuse_path": self.reuse_path},
            extras={"stats": s})
