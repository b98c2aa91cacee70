"""Variable-speed random walk among random conductances.

The walk sits at x for an exponential time of rate pi(x), then jumps to the
neighbour y with probability a_xy / pi(x).  Its generator is div(a grad), so
E[(xi . X_t)^2] / t tends to 2 xi . ahom xi.  Every trajectory gets its own
environment (the annealed estimator) and all randomness, environment and
walk alike, comes from the counter hash, so trajectory i is the same no
matter how many others run or in what order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from ._hash import absorb, derived_seed, seed_key, to_unit
from ._validation import check_int, check_unit_vector
from .env import edge_value, parse_law

__all__ = ["WalkConfig", "WalkSample", "WalkStats", "simulate_vsrw", "simulate_batch",
           "naive_estimator", "extrapolated_estimator", "walk_stats"]

_WALK_TAG = 0x5741_4C4B  # separates the walk stream from the environment stream


@dataclass(frozen=True)
class WalkConfig:
    N: int
    t: float
    reuse_path: bool = True
    seed_base: int = 0

    def __post_init__(self):
        check_int(self.N, "N", 1)
        if not self.t >= 2:
            raise ValueError(f"t must be >= 2, got {self.t}")


@dataclass(frozen=True)
class WalkSample:
    displacement_t: float
    displacement_2t: float
    jumps: int


@nb.njit(cache=True)
def _run_path(env_key, walk_key, code, params, dim, xi, times, out_row):
    """Simulate one path, writing xi . X at each of the sorted ``times``."""
    site = np.zeros(dim, dtype=np.int64)
    nb_site = np.zeros(dim, dtype=np.int64)
    rates = np.zeros(2 * dim)
    clock = 0.0
    jumps = 0
    nt = times.shape[0]
    slot = 0
    while slot < nt and times[slot] <= 0.0:
        out_row[slot] = 0.0
        slot += 1
    while slot < nt:
        total = 0.0
        for i in range(dim):
            up = edge_value(env_key, code, params, site, i)
            for j in range(dim):
                nb_site[j] = site[j]
            nb_site[i] -= 1
            down = edge_value(env_key, code, params, nb_site, i)
            rates[2 * i] = up
            rates[2 * i + 1] = down
            total += up + down
        h = absorb(walk_key, 2 * jumps)
        u = to_unit(h)
        clock += -math.log1p(-u) / total
        while slot < nt and times[slot] < clock:
            acc = 0.0
            for j in range(dim):
                acc += xi[j] * site[j]
            out_row[slot] = acc
            slot += 1
        if slot >= nt:
            break
        v = to_unit(absorb(walk_key, 2 * jumps + 1)) * total
        pick = 2 * dim - 1
        run = 0.0
        for m in range(2 * dim):
            run += rates[m]
            if v < run:
                pick = m
                break
        if pick % 2 == 0:
            site[pick // 2] += 1
        else:
            site[pick // 2] -= 1
        jumps += 1
    return jumps


@nb.njit(cache=True)
def _run_batch(env_keys, walk_keys, code, params, dim, xi, times, out, jumps):
    for p in range(env_keys.shape[0]):
        jumps[p] = _run_path(env_keys[p], walk_keys[p], code, params, dim, xi, times, out[p])


def _keys(seed):
    env_key = seed_key(seed)
    return env_key, np.uint64(absorb(env_key, _WALK_TAG))


def simulate_vsrw(env, xi, horizon, seed=None):
    """One path run to 2 * horizon; xi . X recorded at horizon and 2 * horizon.

    The environment is ``env`` itself; ``seed`` keys the walk's own
    randomness (default: the environment's seed).
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    xi = check_unit_vector(xi, env.dim)
    seed = env.seed if seed is None else seed
    walk_key = _keys(seed)[1]
    out = np.zeros(2)
    times = np.array([horizon, 2.0 * horizon], dtype=np.float64)
    code, params = env.law._code()
    jumps = _run_path(env.key, walk_key, code, params, env.dim, xi, times, out)
    return WalkSample(float(out[0]), float(out[1]), int(jumps))


def simulate_batch(law, dim, xi, times, N, seed_base=0, offset=0):
    """Trajectories offset .. offset + N - 1 of ``seed_base``.

    Returns ``(displacements, jumps)`` with shape (N, len(times)) and (N,).
    Trajectory i uses a fresh environment seeded by a hash of (seed_base, i).
    """
    law = parse_law(law)
    xi = check_unit_vector(xi, dim)
    times = np.asarray(times, dtype=np.float64)
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be sorted")
    N = check_int(N, "N", 1)
    env_keys = np.empty(N, dtype=np.uint64)
    walk_keys = np.empty(N, dtype=np.uint64)
    for j in range(N):
        env_keys[j], walk_keys[j] = _keys(derived_seed(seed_base, offset + j))
    out = np.zeros((N, times.size))
    jumps = np.zeros(N, dtype=np.int64)
    code, params = law._code()
    _run_batch(env_keys, walk_keys, code, params, int(dim), xi, times, out, jumps)
    return out, jumps


@dataclass
class WalkStats:
    """Per-horizon estimator values with their standard errors."""

    t: float
    naive_t: float
    naive_2t: float
    extrapolated: float
    se_naive_t: float
    se_naive_2t: float
    se_extrapolated: float
    kurtosis_t: float
    N: int
    jumps: int = 0

    @property
    def a_hat(self):
        return self.extrapolated / 2.0


def _mean_se(x):
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def _kurtosis(x):
    c = x - x.mean()
    v = np.mean(c ** 2)
    return float(np.mean(c ** 4) / v ** 2) if v > 0 else float("nan")


def walk_stats(cfg, law, xi=None, dim=2):
    """Naive and extrapolated estimators at horizon ``cfg.t`` with errors."""
    t = float(cfg.t)
    if cfg.reuse_path:
        disp, jumps = simulate_batch(law, dim, xi, [t, 2 * t], cfg.N, cfg.seed_base)
        y_t, y_2t = disp[:, 0] ** 2 / t, disp[:, 1] ** 2 / (2 * t)
        total = int(jumps.sum())
    else:
        a, ja = simulate_batch(law, dim, xi, [t], cfg.N, cfg.seed_base)
        b, jb = simulate_batch(law, dim, xi, [2 * t], cfg.N, cfg.seed_base, offset=cfg.N)
        y_t, y_2t = a[:, 0] ** 2 / t, b[:, 0] ** 2 / (2 * t)
        total = int(ja.sum() + jb.sum())
    n_t, se_t = _mean_se(y_t)
    n_2t, se_2t = _mean_se(y_2t)
    ext, se_ext = _mean_se(2 * y_2t - y_t)
    return WalkStats(t, n_t, n_2t, ext, se_t, se_2t, se_ext, _kurtosis(y_t), cfg.N, total)


def naive_estimator(cfg, law, xi=None, dim=2):
    """(1/N) sum_i (xi . X_t^(i))^2 / t."""
    disp, _ = simulate_batch(law, dim, xi, [float(cfg.t)], cfg.N, cfg.seed_base)
    return float(np.mean(disp[:, 0] ** 2) / cfg.t)


def extrapolated_estimator(cfg, law, xi=None, dim=2):
    """2 * naive(2t) - naive(t); both horizons share paths when ``reuse_path``."""
    return walk_stats(cfg, law, xi, dim).extrapolated
