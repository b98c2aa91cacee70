"""Exact resolvent-chain identities on finite Markov chains.

Everything is dense linear algebra in L^2(stationary).  The generator ``L``
follows the nonnegative-spectrum convention (``L = -Q`` for a rate matrix
``Q``; ``L = I - P`` for a transition kernel ``P``) and ``L^-1`` always means
the inverse on stationary-mean-zero vectors.

For mu_k in (0, 1] and f_{-1} = f*_{-1} = f,

    f_k  = mu_k (mu_k + L)^-1  f_{k-1}
    f*_k = mu_k (mu_k + L*)^-1 f*_{k-1}

and for every n

    <f, L^-1 f> = sum_{k<=n} (<f*_{k-1}, f_k> + <f*_k, f_k>) / mu_k + <f*_n, L^-1 f_n>.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

__all__ = [
    "ChainSpec",
    "Schedule",
    "Decomposition",
    "DecayReport",
    "chain_sequence",
    "pgk_decomposition",
    "remainder_decay",
    "discrete_sigma2",
    "resolvent_identity_residual",
    "random_reversible_spec",
    "random_nonreversible_spec",
    "permutation_spec",
]

_MODES = ("continuous", "discrete")


class SingularChainError(ValueError):
    """The chain is not ergodic, so L is not invertible on mean-zero vectors."""


@dataclass
class ChainSpec:
    mode: str
    matrix: np.ndarray
    stationary: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        self.stationary = np.asarray(self.stationary, dtype=np.float64)
        self.f = np.asarray(self.f, dtype=np.float64)
        S = self.stationary.size
        if self.matrix.shape != (S, S) or self.f.shape != (S,):
            raise ValueError("matrix, stationary and f sizes disagree")
        if np.any(self.stationary < 0) or not np.isclose(self.stationary.sum(), 1.0):
            raise ValueError("stationary must be a probability vector")
        scale = 1.0 + np.abs(self.matrix).max()
        if np.abs(self.generator @ np.ones(S)).max() > 1e-10 * scale:
            raise ValueError("generator does not annihilate constants")
        if np.abs(self.stationary @ self.generator).max() > 1e-10 * scale:
            raise ValueError("stationary vector is not invariant")
        if abs(self.inner(self.f, np.ones(S))) > 1e-10 * (1.0 + np.abs(self.f).max()):
            raise ValueError("f must have stationary mean zero")

    @property
    def size(self):
        return self.stationary.size

    @property
    def generator(self):
        if self.mode == "discrete":
            return np.eye(self.size) - self.matrix
        return self.matrix

    @property
    def kernel(self):
        if self.mode != "discrete":
            raise ValueError("transition kernel only defined in discrete mode")
        return self.matrix

    def adjoint(self, A):
        """Adjoint of a matrix operator in L^2(stationary)."""
        w = self.stationary
        return (A.T * w[None, :]) / w[:, None]

    def inner(self, u, v):
        return float(np.sum(self.stationary * u * v))

    def is_reversible(self, tol=1e-12):
        L = self.generator
        return np.allclose(L, self.adjoint(L), atol=tol * (1 + np.abs(L).max()))

    def solve_mean_zero(self, g, transpose=False):
        """x with L x = g (or L* x = g) and <x, 1> = 0, for mean-zero g."""
        L = self.generator
        if transpose:
            L = self.adjoint(L)
        S = self.size
        bordered = L + np.outer(np.ones(S), self.stationary)
        if np.linalg.cond(bordered) > 1e13:
            raise SingularChainError("chain is not ergodic: L + 1 pi^T is singular")
        return np.linalg.solve(bordered, g)


@dataclass(frozen=True)
class Schedule:
    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in ("constant", "geometric"):
            raise ValueError(f"unknown schedule {self.kind!r}")
        if self.n < 0:
            raise ValueError("terminal index must be >= 0")

    def mus(self):
        k = np.arange(self.n + 1)
        return np.ones(self.n + 1) if self.kind == "constant" else 2.0 ** -k


def chain_sequence(spec, schedule):
    """Arrays f[k], fstar[k] for k = 0..n (shape (n + 1, S))."""
    L = spec.generator
    Lstar = spec.adjoint(L)
    eye = np.eye(spec.size)
    fs = np.zeros((schedule.n + 1, spec.size))
    fss = np.zeros_like(fs)
    prev, prev_star = spec.f, spec.f
    for k, mu in enumerate(schedule.mus()):
        try:
            prev = mu * sla.solve(mu * eye + L, prev)
            prev_star = mu * sla.solve(mu * eye + Lstar, prev_star)
        except sla.LinAlgError as exc:
            raise SingularChainError(f"mu + L singular at k={k}") from exc
        fs[k], fss[k] = prev, prev_star
    return fs, fss


@dataclass
class Decomposition:
    terms: np.ndarray
    partial_sum: float
    remainder: float
    exact: float

    def __iter__(self):
        return iter((self.partial_sum, self.remainder, self.exact))


def pgk_decomposition(spec, schedule):
    """(partial_sum, remainder, exact) with per-term contributions in ``terms``."""
    if not np.any(spec.f):
        return Decomposition(np.zeros(schedule.n + 1), 0.0, 0.0, 0.0)
    fs, fss = chain_sequence(spec, schedule)
    mus = schedule.mus()
    terms = np.zeros(schedule.n + 1)
    prev_star = spec.f
    for k in range(schedule.n + 1):
        terms[k] = (spec.inner(prev_star, fs[k]) + spec.inner(fss[k], fs[k])) / mus[k]
        prev_star = fss[k]
    remainder = spec.inner(fss[-1], spec.solve_mean_zero(fs[-1]))
    exact = spec.inner(spec.f, spec.solve_mean_zero(spec.f))
    return Decomposition(terms, float(terms.sum()), float(remainder), float(exact))


@dataclass
class DecayReport:
    n: np.ndarray
    remainders: np.ndarray
    term_sizes: np.ndarray
    remainder_rate: float
    term_rate: float


def _tail_rate(x, y):
    # fitted log2 decrement per step over the part of the tail above round-off
    keep = y > 1e-13 * max(y.max(), 1e-300)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(x[keep], np.log2(y[keep]), 1)[0])


def remainder_decay(spec, schedule_kind, n_max):
    """Remainders and term sizes for n = 0..n_max with fitted log2 slopes.

    Finite chains have a spectral gap, so the decay is eventually geometric;
    the slopes are reported, not compared with any polynomial law.
    """
    dec = pgk_decomposition(spec, Schedule(schedule_kind, n_max))
    fs, fss = chain_sequence(spec, Schedule(schedule_kind, n_max))
    rem = np.array([abs(spec.inner(fss[k], spec.solve_mean_zero(fs[k])))
                    for k in range(n_max + 1)])
    sizes = np.abs(dec.terms)
    n = np.arange(n_max + 1)
    return DecayReport(n, rem, sizes, _tail_rate(n, rem), _tail_rate(n, sizes))


def discrete_sigma2(spec, K):
    """Asymptotic variance of a discrete-time additive functional, three ways.

    Returns ``(power_series, symmetrized, dense)``:

    * ``-<f,f> + 2 sum_{k=0}^{K} <f, P^k f>``
    * ``-<f,f> + 2 sum_{k=0}^{K} (<P*^k f, P^k f> + <P*^k f, P^{k+1} f>)``
    * ``-<f,f> + 2 <f, (I - P)^-1 f>`` on mean-zero vectors.
    """
    P = spec.kernel
    Pstar = spec.adjoint(P)
    f = spec.f
    ff = spec.inner(f, f)
    series = 0.0
    g = f.copy()
    for _ in range(K + 1):
        series += spec.inner(f, g)
        g = P @ g
    sym = 0.0
    g, gs = f.copy(), f.copy()
    for _ in range(K + 1):
        pg = P @ g
        sym += spec.inner(gs, g) + spec.inner(gs, pg)
        g, gs = pg, Pstar @ gs
    dense = -ff + 2.0 * spec.inner(f, spec.solve_mean_zero(f))
    return -ff + 2.0 * series, -ff + 2.0 * sym, dense


def resolvent_identity_residual(spec, lam, mu):
    """max |R_lam - R_mu - (mu - lam) R_lam R_mu| for the resolvents of L."""
    L = spec.generator
    eye = np.eye(spec.size)
    R_lam = np.linalg.inv(lam * eye + L)
    R_mu = np.linalg.inv(mu * eye + L)
    return float(np.abs(R_lam - R_mu - (mu - lam) * R_lam @ R_mu).max())


def _random_graph_weights(S, rng, density=0.3):
    # a random spanning tree plus extra random edges, symmetric positive weights
    W = np.zeros((S, S))
    order = rng.permutation(S)
    for i in range(1, S):
        a, b = order[i], order[rng.integers(i)]
        W[a, b] = W[b, a] = rng.uniform(0.5, 2.0)
    extra = np.triu(rng.random((S, S)) < density, 1)
    w = rng.uniform(0.5, 2.0, size=(S, S))
    W = np.where(extra & (W == 0), np.triu(w, 1), W)
    W = np.triu(W, 1)
    return W + W.T


def _mean_zero(f, pi):
    return f - np.sum(pi * f)


def _finish(mode, flows, pi, rng):
    rates = flows / pi[:, None]
    L = np.diag(rates.sum(axis=1)) - rates
    f = _mean_zero(rng.standard_normal(pi.size), pi)
    if mode == "continuous":
        return ChainSpec("continuous", L, pi, f)
    # lazy uniformization keeps the kernel aperiodic
    scale = 1.5 * np.diag(L).max()
    return ChainSpec("discrete", np.eye(pi.size) - L / scale, pi, f)


def random_reversible_spec(S, rng, mode="continuous"):
    """Reversible chain from symmetric edge flows on a random connected graph."""
    pi = rng.uniform(0.5, 1.5, size=S)
    pi /= pi.sum()
    return _finish(mode, _random_graph_weights(S, rng), pi, rng)


def random_nonreversible_spec(S, rng, mode="continuous", strength=0.5):
    """Reversible flows plus a divergence-free circulation around random cycles.

    The circulation keeps the stationary vector and is capped below the
    smallest symmetric flow it perturbs, so all rates stay positive.
    """
    pi = rng.uniform(0.5, 1.5, size=S)
    pi /= pi.sum()
    W = _random_graph_weights(S, rng)
    # a ring through all states guarantees cycles exist
    ring = rng.permutation(S)
    for a, b in zip(ring, np.roll(ring, -1)):
        if W[a, b] == 0:
            W[a, b] = W[b, a] = rng.uniform(0.5, 2.0)
    C = np.zeros((S, S))
    for _ in range(3):
        cyc = rng.permutation(S)[: max(3, S // 2)]
        cyc = [c for c in cyc]
        # close the cycle only along existing edges: route through the ring order
        cyc = sorted(cyc, key=lambda s: int(np.where(ring == s)[0][0]))
        path = []
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            ia, ib = int(np.where(ring == a)[0][0]), int(np.where(ring == b)[0][0])
            steps = (ib - ia) % S
            path += [(ring[(ia + t) % S], ring[(ia + t + 1) % S]) for t in range(steps)]
        cap = min(W[a, b] for a, b in path)
        eps = strength * cap * rng.uniform(0.3, 1.0) / 3.0
        for a, b in path:
            C[a, b] += eps
            C[b, a] -= eps
    return _finish(mode, W + C, pi, rng)


def permutation_spec(S, rng):
    """Deterministic dynamics P f = f o T for a single S-cycle T."""
    perm = np.roll(np.arange(S), -1)
    P = np.zeros((S, S))
    P[np.arange(S), perm] = 1.0
    pi = np.full(S, 1.0 / S)
    f = _mean_zero(rng.standard_normal(S), pi)
    return ChainSpec("discrete", P, pi, f)
