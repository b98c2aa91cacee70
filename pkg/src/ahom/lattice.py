"""Boxed lattice fields and the operator mu - div(a grad).

Conventions shared by every module: ``a_i(x)`` is the conductance of the edge
{x, x + e_i}; the divergence is the backward difference
``div F(x) = sum_i F_i(x) - F_i(x - e_i)``; functions on a box extend by zero
outside it (Dirichlet ghost values), which keeps ``mu + L`` symmetric positive
definite.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._validation import check_unit_vector
from .env import edges_at

__all__ = [
    "BoxSpec",
    "GridFn",
    "LocalField",
    "TorusField",
    "materialize",
    "materialize_torus",
    "div_a_xi",
    "apply_operator",
    "pi_weight",
    "box_average",
    "dense_operator",
]


@dataclass(frozen=True)
class BoxSpec:
    """The box B_rho = {-rho, ..., rho}^dim."""

    dim: int
    radius: int

    def __post_init__(self):
        if self.dim < 1 or self.radius < 0:
            raise ValueError(f"invalid box dim={self.dim} radius={self.radius}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "radius", int(self.radius))

    @classmethod
    def of_real_radius(cls, dim, r):
        return cls(dim, int(np.floor(r)))

    @property
    def side(self):
        return 2 * self.radius + 1

    @property
    def shape(self):
        return (self.side,) * self.dim

    @property
    def volume(self):
        return self.side ** self.dim

    def contains(self, site):
        return all(abs(int(c)) <= self.radius for c in site)

    def coords(self):
        return np.arange(-self.radius, self.radius + 1)

    def inner_slices(self, radius):
        """Index slices selecting B_radius inside an array shaped like this box."""
        if radius > self.radius:
            raise ValueError(f"radius {radius} exceeds box radius {self.radius}")
        off = self.radius - radius
        return (slice(off, off + 2 * radius + 1),) * self.dim


@dataclass
class GridFn:
    """A real function on a box, equal to zero outside it."""

    box: BoxSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.box.shape:
            raise ValueError(f"values shape {self.values.shape} != box shape {self.box.shape}")

    @classmethod
    def zeros(cls, box):
        return cls(box, np.zeros(box.shape))

    def at(self, site):
        if not self.box.contains(site):
            return 0.0
        idx = tuple(int(c) + self.box.radius for c in site)
        return float(self.values[idx])

    def on(self, box):
        """This function seen on another box: cropped or zero-extended."""
        if box.dim != self.box.dim:
            raise ValueError("dimension mismatch")
        if box.radius <= self.box.radius:
            return GridFn(box, self.values[self.box.inner_slices(box.radius)].copy())
        out = np.zeros(box.shape)
        out[box.inner_slices(self.box.radius)] = self.values
        return GridFn(box, out)

    def padded(self):
        """Flat copy with a zero ghost ring, the layout the kernels use."""
        out = np.zeros(tuple(s + 2 for s in self.box.shape))
        out[(slice(1, -1),) * self.box.dim] = self.values
        return out.ravel()

    @classmethod
    def from_padded(cls, box, flat):
        arr = flat.reshape(tuple(s + 2 for s in box.shape))
        return cls(box, arr[(slice(1, -1),) * box.dim].copy())


@dataclass
class LocalField:
    """Conductances of every edge touching a box, cached densely.

    ``cond[i]`` has shape ``(side + 2,) * dim``; padded index ``p`` is the site
    ``p - radius - 1`` and ``cond[i][p]`` the conductance of the edge from that
    site in direction ``e_i``.
    """

    box: BoxSpec
    cond: np.ndarray
    _layout: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        expect = (self.box.dim,) + tuple(s + 2 for s in self.box.shape)
        if self.cond.shape != expect:
            raise ValueError(f"conductance array shape {self.cond.shape} != {expect}")

    def a(self, axis, site):
        """a_axis(site); ``site`` may lie one step outside the box."""
        idx = tuple(int(c) + self.box.radius + 1 for c in site)
        if any(i < 0 or i >= self.box.side + 2 for i in idx):
            raise ValueError(f"site {site} not covered by the field")
        return float(self.cond[(axis,) + idx])

    def sub(self, radius):
        """Restriction to the concentric box B_radius."""
        if radius == self.box.radius:
            return self
        if radius > self.box.radius:
            raise ValueError(
                f"field of radius {self.box.radius} does not cover box of radius {radius}")
        off = self.box.radius - radius
        sl = (slice(None),) + (slice(off, off + 2 * radius + 3),) * self.box.dim
        return LocalField(BoxSpec(self.box.dim, radius), np.ascontiguousarray(self.cond[sl]))

    def kernel_args(self):
        """(flat conductances, strides, row starts, side) for the kernels."""
        if self._layout is None:
            strides, rows = _kernels.padded_layout(self.box.side, self.box.dim)
            flat = np.ascontiguousarray(self.cond.reshape(self.box.dim, -1))
            self._layout = (flat, strides, rows, self.box.side)
        return self._layout

    def diagonal(self, mu):
        flat, strides, rows, m = self.kernel_args()
        out = np.zeros(flat.shape[1])
        _kernels.diagonal(flat, strides, rows, m, float(mu), out)
        return out

    def pi(self):
        """pi(x) = sum of the 2d conductances at x, as a GridFn on the box."""
        return GridFn.from_padded(self.box, self.diagonal(0.0))


def materialize(env, box):
    """Cache every edge with at least one endpoint in ``box``."""
    d = env.dim
    if box.dim != d:
        raise ValueError(f"box dimension {box.dim} != environment dimension {d}")
    ext = np.arange(-box.radius - 1, box.radius + 2, dtype=np.int64)
    shape = (box.side + 2,) * d
    try:
        cond = np.empty((d,) + shape)
    except MemoryError as exc:
        raise MemoryError(f"cannot allocate conductances for {box}") from exc
    for i in range(d):
        coords = [ext.reshape([-1 if j == k else 1 for k in range(d)]) for j in range(d)]
        cond[i] = np.broadcast_to(edges_at(env, i, coords), shape)
    return LocalField(box, cond)


def div_a_xi(field, xi, box):
    """(div a xi)(x) = sum_i xi_i (a_i(x) - a_i(x - e_i)) on ``box``."""
    xi = check_unit_vector(xi, field.box.dim)
    if box.radius > field.box.radius:
        raise ValueError(
            f"field of radius {field.box.radius} does not cover box of radius {box.radius}")
    off = field.box.radius - box.radius + 1
    out = np.zeros(box.shape)
    for i in range(box.dim):
        if xi[i] == 0.0:
            continue
        here = (i,) + (slice(off, off + box.side),) * box.dim
        back = list(here)
        back[i + 1] = slice(off - 1, off - 1 + box.side)
        out += xi[i] * (field.cond[here] - field.cond[tuple(back)])
    return GridFn(box, out)


def apply_operator(field, mu, u):
    """(mu + L) u with u extended by zero outside its box."""
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    f = field.sub(u.box.radius)
    flat, strides, rows, m = f.kernel_args()
    diag = f.diagonal(mu)
    out = np.zeros_like(diag)
    _kernels.apply(flat, strides, rows, m, diag, u.padded(), out)
    return GridFn.from_padded(u.box, out)


def pi_weight(field, site):
    """pi(x) = sum over the 2d edges incident to x."""
    site = tuple(int(c) for c in site)
    total = 0.0
    for i in range(field.box.dim):
        back = list(site)
        back[i] -= 1
        total += field.a(i, site) + field.a(i, back)
    return total


def box_average(u, v, weight=None, radius=0.0):
    """(1/|B_r|) sum_{x in B_r} weight(x) u(x) v(x), with r floored."""
    rho = int(np.floor(radius))
    if rho < 0:
        raise ValueError("radius must be nonnegative")
    for g in (u, v) if weight is None else (u, v, weight):
        if rho > g.box.radius:
            raise ValueError(f"radius {radius} exceeds available data (box radius {g.box.radius})")
    prod = u.values[u.box.inner_slices(rho)] * v.values[v.box.inner_slices(rho)]
    if weight is not None:
        prod = prod * weight.values[weight.box.inner_slices(rho)]
    return float(np.sum(prod) / prod.size)


def dense_operator(field, mu, box=None):
    """Dense matrix of (mu + L) on ``box`` with Dirichlet exterior.

    Assembled entry by entry from the edge list; only meant as an oracle on
    small boxes.
    """
    box = field.box if box is None else box
    d, n = box.dim, box.volume
    sites = np.array(np.unravel_index(np.arange(n), box.shape)).T - box.radius
    index = {tuple(s): k for k, s in enumerate(sites)}
    A = np.zeros((n, n))
    for k, s in enumerate(sites):
        A[k, k] += mu
        for i in range(d):
            for sign in (1, -1):
                nb = list(s)
                nb[i] += sign
                a = field.a(i, s) if sign == 1 else field.a(i, nb)
                A[k, k] += a
                j = index.get(tuple(nb))
                if j is not None:
                    A[k, j] -= a
    return A


@dataclass
class TorusField:
    """Periodic conductance field on the torus (Z / side Z)^dim.

    Only used as an oracle harness: ``cond[i][x]`` is the edge from x to
    x + e_i (mod side).
    """

    dim: int
    side: int
    cond: np.ndarray

    @property
    def volume(self):
        return self.side ** self.dim

    def pi(self):
        return sum(self.cond[i] + np.roll(self.cond[i], 1, axis=i) for i in range(self.dim))

    def div_a_xi(self, xi):
        xi = check_unit_vector(xi, self.dim)
        return sum(xi[i] * (self.cond[i] - np.roll(self.cond[i], 1, axis=i))
                   for i in range(self.dim))

    def apply(self, mu, u):
        """(mu + L) u on the torus."""
        out = mu * u
        for i in range(self.dim):
            fwd = np.roll(u, -1, axis=i)
            bwd = np.roll(u, 1, axis=i)
            out = out + self.cond[i] * (u - fwd) + np.roll(self.cond[i], 1, axis=i) * (u - bwd)
        return out

    def laplacian(self):
        """Dense matrix of L on the torus (row-major site order)."""
        n = self.volume
        eye = np.eye(n).reshape((n,) + (self.side,) * self.dim)
        cols = [self.apply(0.0, e).ravel() for e in eye]
        return np.array(cols).T


def materialize_torus(env, side):
    """Torus field whose edges are the environment's edges from sites in [0, side)^d."""
    d = env.dim
    base = np.arange(side, dtype=np.int64)
    shape = (side,) * d
    cond = np.empty((d,) + shape)
    for i in range(d):
        coords = [base.reshape([-1 if j == k else 1 for k in range(d)]) for j in range(d)]
        cond[i] = np.broadcast_to(edges_at(env, i, coords), shape)
    return TorusField(d, side, cond)
