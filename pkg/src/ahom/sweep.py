"""Repetition sweeps, CSV output and regression slopes.

A sweep runs one method for every (n, seed) pair, writes one CSV row per run
and a summary with the RMS error and mean work per n plus log2-log2
regression lines through both.  Rows come out sorted by (n, seed) whatever
the worker scheduling was, and every column except ``wall_seconds`` is a
deterministic function of the configuration.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .cg import SolveParams
from .classical import make_classical_plan, replicate_mse, run_classical
from .env import Environment, parse_law
from .hier import make_plan, run_hier
from .parabolic import make_parabolic_plan, run_parabolic
from .walk import WalkConfig, walk_stats
from .report import EstimateReport

__all__ = ["CSV_HEADER", "SUMMARY_HEADER", "SweepConfig", "fit_slope", "default_truth",
           "run_one", "run_sweep", "summarize", "write_rows", "write_summary",
           "summary_path"]

CSV_HEADER = ["method", "d", "n", "seed", "estimate", "sigma2_stat", "abs_error",
              "work_units", "wall_seconds"]
SUMMARY_HEADER = ["kind", "method", "d", "n", "reps", "mean_estimate", "stderr", "rms_error",
                  "log2_rms", "mean_work_units", "log2_work", "slope", "intercept", "ci95"]

METHODS = ("hier", "classical", "parabolic", "mc")


@dataclass
class SweepConfig:
    """Everything a sweep needs.  ``levels`` are n (hier, classical), L
    (parabolic) or t (mc) values; seeds are seed .. seed + reps - 1."""

    method: str
    levels: list
    d: int = 2
    law: str = "bernoulli:1,9"
    xi: tuple | None = None
    seed: int = 0
    reps: int = 1
    truth: float | None = None
    eps: float = 0.0
    nesting: str = "layer"
    half_factor: bool = True
    N: int = 10000
    rel_tol: float = 1e-10
    samples: int | None = None
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        parse_law(self.law)
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.levels:
            raise ValueError("nothing to run: empty level list")
        if self.method == "hier":
            for n in self.levels:
                make_plan(self.d, n, self.eps, self.nesting)

    def seeds(self):
        return list(range(self.seed, self.seed + self.reps))


def default_truth(law, d):
    """sqrt(c- c+) for the symmetric two-point law in d = 2, c for a constant law."""
    law = parse_law(law)
    if law.kind == "constant":
        return law.params[0]
    if d == 2:
        return law.duality_value()
    return None


def fit_slope(points):
    """Least-squares line through ``(x, y)`` points: (slope, intercept, ci95).

    ``ci95`` is the half-width of the 95% confidence interval of the slope.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an (m, 2) array")
    if pts.shape[0] < 3:
        raise ValueError("need at least 3 points for a slope with a confidence interval")
    x, y = pts[:, 0], pts[:, 1]
    if np.ptp(x) == 0:
        raise ValueError("degenerate x values")
    res = stats.linregress(x, y)
    q = stats.t.ppf(0.975, x.size - 2)
    return float(res.slope), float(res.intercept), float(q * res.stderr)


def run_one(cfg, level, seed):
    """One (level, seed) run as an :class:`EstimateReport`."""
    law = parse_law(cfg.law)
    if cfg.method == "hier":
        plan = make_plan(cfg.d, level, cfg.eps, cfg.nesting)
        env = Environment(law, cfg.d, seed)
        return run_hier(env, cfg.xi, plan, SolveParams(1.0, cfg.rel_tol)).to_estimate(plan)
    if cfg.method == "classical":
        plan = make_classical_plan(cfg.d, level, cfg.samples)
        return run_classical(law, cfg.d, seed, cfg.xi, plan, SolveParams(plan.mu, cfg.rel_tol))
    if cfg.method == "parabolic":
        plan = make_parabolic_plan(cfg.d, level, cfg.half_factor)
        return run_parabolic(Environment(law, cfg.d, seed), cfg.xi, plan)
    s = walk_stats(WalkConfig(cfg.N, float(level), True, seed), law, cfg.xi, cfg.d)
    return EstimateReport("mc", seed, s.a_hat, s.extrapolated, s.jumps,
                          params={"N": cfg.N, "t": float(level)}, extras={"stats": s})


def _job(args):
    cfg, level, seed = args
    t0 = time.perf_counter()
    rep = run_one(cfg, level, seed)
    rep.wall_seconds = time.perf_counter() - t0
    return level, seed, rep


def run_sweep(cfg):
    """Run every (level, seed) pair; returns a list of (level, seed, report) sorted."""
    jobs = [(cfg, level, seed) for level in cfg.levels for seed in cfg.seeds()]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            out = list(pool.map(_job, jobs))
    else:
        out = [_job(j) for j in jobs]
    return sorted(out, key=lambda r: (r[0], r[1]))


def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _truth(cfg):
    return cfg.truth if cfg.truth is not None else default_truth(cfg.law, cfg.d)


def csv_rows(cfg, results):
    truth = _truth(cfg)
    for level, seed, rep in results:
        err = abs(rep.estimate - truth) if truth is not None else None
        if isinstance(level, float) and level.is_integer():
            level = int(level)
        yield [cfg.method, cfg.d, level, seed, rep.estimate, rep.sigma2_stat, err,
               rep.work_units, rep.wall_seconds]


def write_rows(cfg, results, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in csv_rows(cfg, results):
        w.writerow([_fmt(v) for v in row])


@dataclass
class Summary:
    per_level: list
    error_fit: tuple | None
    work_fit: tuple | None


def summarize(cfg, results):
    """Per-level RMS error and work, plus log2 regression lines across levels.

    For the classical method the RMS of a 2^n-sample average is estimated
    from the pooled per-sample energies (see :func:`replicate_mse`).
    """
    truth = _truth(cfg)
    per = []
    for level in cfg.levels:
        reps = [r for lv, _, r in results if lv == level]
        est = np.array([r.estimate for r in reps])
        work = float(np.mean([r.work_units for r in reps]))
        se = float(np.std(est, ddof=1) / math.sqrt(est.size)) if est.size > 1 else float("nan")
        rms = None
        if truth is not None:
            if cfg.method == "classical" and all("energies" in r.extras for r in reps):
                rms = math.sqrt(replicate_mse(np.array([r.extras["energies"] for r in reps]),
                                              truth))
            else:
                rms = float(np.sqrt(np.mean((est - truth) ** 2)))
        per.append({"n": level, "reps": est.size, "mean_estimate": float(est.mean()),
                    "stderr": se, "rms_error": rms,
                    "log2_rms": math.log2(rms) if rms else None,
                    "mean_work_units": work, "log2_work": math.log2(work) if work > 0 else None})
    error_fit = work_fit = None
    if len(per) >= 3:
        if all(p["log2_rms"] is not None for p in per):
            error_fit = fit_slope([(p["n"], p["log2_rms"]) for p in per])
        if all(p["log2_work"] is not None for p in per):
            work_fit = fit_slope([(p["n"], p["log2_work"]) for p in per])
    return Summary(per, error_fit, work_fit)


def write_summary(cfg, summary, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for p in summary.per_level:
        w.writerow([_fmt(v) for v in ["level", cfg.method, cfg.d, p["n"], p["reps"],
                                      p["mean_estimate"], p["stderr"], p["rms_error"],
                                      p["log2_rms"], p["mean_work_units"], p["log2_work"],
                                      None, None, None]])
    for kind, fit in (("error_fit", summary.error_fit), ("work_fit", summary.work_fit)):
        if fit is not None:
            w.writerow([_fmt(v) for v in [kind, cfg.method, cfg.d] + [None] * 8 + list(fit)])


def summary_path(out):
    return out[:-4] + ".summary.csv" if out.endswith(".csv") else out + ".summary.csv"
