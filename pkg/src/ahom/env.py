"""Random i.i.d. conductance environments on the edges of Z^d.

Conductances are never stored: ``edge(env, site, axis)`` hashes
``(seed, axis, site)`` into a uniform variate and pushes it through the law's
quantile function.  A walker can therefore roam an unbounded region and two
boxes materialized independently agree on every shared edge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from ._hash import absorb, absorb_array, seed_key, to_unit, unit_array

__all__ = [
    "ConductanceLaw",
    "Environment",
    "parse_law",
    "edge",
    "edges_at",
    "mean_conductance",
]

_CONSTANT, _TWO_POINT, _UNIFORM = 0, 1, 2
_KINDS = {"constant": _CONSTANT, "bernoulli": _TWO_POINT, "uniform": _UNIFORM}


@dataclass(frozen=True)
class ConductanceLaw:
    """Law of a single edge conductance.

    ``kind`` is one of ``"constant"``, ``"bernoulli"`` (two-point law taking
    ``c_plus`` with probability ``p`` and ``c_minus`` otherwise) or
    ``"uniform"``.  Use the classmethod constructors rather than filling the
    fields by hand.
    """

    kind: str
    params: tuple
    exact_mean: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown conductance law {self.kind!r}")
        lo, hi = self.support
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo <= 0 or hi < lo:
            raise ValueError(f"law {self!r} is not uniformly elliptic")

    @classmethod
    def constant(cls, c):
        return cls("constant", (float(c),), exact_mean=float(c))

    @classmethod
    def two_point(cls, c_minus, c_plus, p=0.5, exact_mean=True):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")
        mean = (1 - p) * c_minus + p * c_plus
        return cls("bernoulli", (float(c_minus), float(c_plus), float(p)),
                   exact_mean=mean if exact_mean else None)

    @classmethod
    def uniform(cls, lo, hi, exact_mean=True):
        if hi <= lo:
            raise ValueError("uniform law needs lo < hi")
        return cls("uniform", (float(lo), float(hi)),
                   exact_mean=0.5 * (lo + hi) if exact_mean else None)

    @property
    def support(self):
        if self.kind == "constant":
            return self.params[0], self.params[0]
        if self.kind == "bernoulli":
            c_minus, c_plus, p = self.params
            if p == 0.0:
                return c_minus, c_minus
            if p == 1.0:
                return c_plus, c_plus
            return min(c_minus, c_plus), max(c_minus, c_plus)
        return self.params

    @property
    def contrast(self):
        """Ratio max/min of the support (the ellipticity constant up to scaling)."""
        lo, hi = self.support
        return hi / lo

    @property
    def mean(self):
        if self.kind == "constant":
            return self.params[0]
        if self.kind == "bernoulli":
            c_minus, c_plus, p = self.params
            return (1 - p) * c_minus + p * c_plus
        lo, hi = self.params
        return 0.5 * (lo + hi)

    @property
    def variance(self):
        if self.kind == "constant":
            return 0.0
        if self.kind == "bernoulli":
            c_minus, c_plus, p = self.params
            return p * (1 - p) * (c_plus - c_minus) ** 2
        lo, hi = self.params
        return (hi - lo) ** 2 / 12.0

    def duality_value(self):
        """sqrt(c- c+) for the symmetric two-point law, else None.

        In two dimensions this is the exact homogenized coefficient (Keller-Dykhne
        duality); callers are responsible for checking d == 2.
        """
        if self.kind == "bernoulli" and self.params[2] == 0.5:
            return math.sqrt(self.params[0] * self.params[1])
        if self.kind == "constant":
            return self.params[0]
        return None

    def _code(self):
        p = tuple(self.params) + (0.0,) * (3 - len(self.params))
        return np.int64(_KINDS[self.kind]), np.array(p, dtype=np.float64)

    def quantile(self, u):
        """Vectorized inverse CDF on uniforms in [0, 1)."""
        u = np.asarray(u, dtype=np.float64)
        if self.kind == "constant":
            return np.full(u.shape, self.params[0])
        if self.kind == "bernoulli":
            c_minus, c_plus, p = self.params
            return np.where(u < p, c_plus, c_minus)
        lo, hi = self.params
        return lo + (hi - lo) * u

    def __str__(self):
        return f"{self.kind}:" + ",".join(f"{v:g}" for v in self.params)


def parse_law(text):
    """Parse ``constant:C``, ``bernoulli:CMINUS,CPLUS[,P]`` or ``uniform:LO,HI``."""
    if isinstance(text, ConductanceLaw):
        return text
    kind, sep, rest = str(text).strip().partition(":")
    kind = kind.strip().lower()
    if not sep or kind not in _KINDS:
        raise ValueError(f"malformed law string {text!r}")
    try:
        values = [float(v) for v in rest.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"malformed law string {text!r}") from None
    if kind == "constant" and len(values) == 1:
        return ConductanceLaw.constant(values[0])
    if kind == "bernoulli" and len(values) in (2, 3):
        return ConductanceLaw.two_point(*values)
    if kind == "uniform" and len(values) == 2:
        return ConductanceLaw.uniform(*values)
    raise ValueError(f"wrong number of parameters in law string {text!r}")


@dataclass(frozen=True)
class Environment:
    """A lazily evaluated conductance field: ``edge(site, axis)`` is a pure
    function of ``(seed, site, axis)``."""

    law: ConductanceLaw
    dim: int
    seed: int = 0

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dimension must be >= 1")
        object.__setattr__(self, "law", parse_law(self.law))

    @property
    def key(self):
        return seed_key(self.seed)

    def edge(self, site, axis):
        return edge(self, site, axis)


def edge(env, site, axis):
    """Conductance of the undirected edge {site, site + e_axis}."""
    site = tuple(int(c) for c in np.atleast_1d(site))
    if len(site) != env.dim or not 0 <= axis < env.dim:
        raise ValueError(f"edge ({site}, {axis}) invalid in dimension {env.dim}")
    h = absorb_array(env.key, np.array([axis]))
    for c in site:
        h = absorb_array(h, np.array([c]))
    return float(env.law.quantile(unit_array(h))[0])


def edges_at(env, axis, coords):
    """Vectorized edge lookup.

    ``coords`` is a sequence of ``dim`` integer arrays that broadcast against
    each other; the result has the broadcast shape.
    """
    if len(coords) != env.dim:
        raise ValueError("need one coordinate array per dimension")
    h = absorb_array(env.key, np.array(axis))
    for c in coords:
        h = absorb_array(h, c)
    return env.law.quantile(unit_array(h))


@nb.njit(cache=True)
def law_value(code, params, u):
    if code == 0:
        return params[0]
    if code == 1:
        return params[1] if u < params[2] else params[0]
    return params[0] + (params[1] - params[0]) * u


@nb.njit(cache=True)
def edge_value(key, code, params, site, axis):
    h = absorb(key, axis)
    for c in site:
        h = absorb(h, c)
    return law_value(code, params, to_unit(h))


def mean_conductance(env, sample_budget):
    """E[a_e]: the analytic mean when the law carries one, otherwise the
    empirical mean of ``sample_budget`` fresh edges (drawn along a ray of
    sites that no box-based estimator touches)."""
    sample_budget = int(sample_budget)
    if sample_budget < 1:
        raise ValueError("sample_budget must be >= 1")
    if env.law.exact_mean is not None:
        return float(env.law.exact_mean)
    # sites (-2^40 - j, 0, ..., 0): far away from every box the estimators use
    far = -(1 << 40) - np.arange(sample_budget, dtype=np.int64)
    coords = [far] + [np.zeros(1, dtype=np.int64)] * (env.dim - 1)
    return float(np.mean(edges_at(env, 0, coords)))
