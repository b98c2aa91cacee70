"""Numba kernels on zero-padded flat arrays.

A box of side ``m`` in dimension ``d`` is stored as a flat C-order array of
shape ``(m + 2,) * d``; the outer ring holds ghost values that stay zero
(Dirichlet exterior).  ``cond[i, j]`` is the conductance of the edge between
flat sites ``j`` and ``j + strides[i]``.  Interior sites are visited row by
row: ``rows`` lists the flat index of the first interior site of every row
along the last axis, each row being ``m`` contiguous sites.

All reductions are plain left-to-right loops in a fixed order, so results do
not depend on anything but the inputs.
"""
import numba as nb
import numpy as np


def padded_layout(m, d):
    """Strides and row starts for an interior box of side ``m``."""
    shape = (m + 2,) * d
    strides = np.array([int(np.prod(shape[i + 1:])) for i in range(d)], dtype=np.int64)
    if d == 1:
        rows = np.array([1], dtype=np.int64)
    else:
        grids = np.meshgrid(*[np.arange(1, m + 1)] * (d - 1), indexing="ij")
        rows = sum(g.ravel() * strides[i] for i, g in enumerate(grids)) + 1
        rows = np.ascontiguousarray(rows, dtype=np.int64)
    return strides, rows


@nb.njit(cache=True)
def diagonal(cond, strides, rows, m, mu, out):
    """out = mu + pi(x) on interior sites."""
    d = strides.shape[0]
    for r in range(rows.shape[0]):
        s0 = rows[r]
        for j in range(s0, s0 + m):
            acc = mu
            for i in range(d):
                acc += cond[i, j] + cond[i, j - strides[i]]
            out[j] = acc


@nb.njit(cache=True)
def apply(cond, strides, rows, m, diag, u, out):
    """out = (mu + L) u on interior sites, ghost values of ``u`` read as given.

    Returns the inner product <u, out> over the interior.
    """
    d = strides.shape[0]
    dot = 0.0
    for r in range(rows.shape[0]):
        s0 = rows[r]
        s1 = s0 + m
        for j in range(s0, s1):
            out[j] = diag[j] * u[j]
        for i in range(d):
            s = strides[i]
            ci = cond[i]
            for j in range(s0, s1):
                out[j] -= ci[j] * u[j + s] + ci[j - s] * u[j - s]
        for j in range(s0, s1):
            dot += u[j] * out[j]
    return dot


@nb.njit(cache=True)
def interior_dot(rows, m, u, v):
    acc = 0.0
    for r in range(rows.shape[0]):
        s0 = rows[r]
        for j in range(s0, s0 + m):
            acc += u[j] * v[j]
    return acc


@nb.njit(cache=True)
def cg(cond, strides, rows, m, diag, b, x, rel_tol, max_iters, residuals):
    """Unpreconditioned conjugate gradient on the interior, in place on ``x``.

    Returns ``(iterations, final_residual_norm, converged)``.  ``residuals``
    receives the residual 2-norm after each iteration (index 0 = start) as
    long as it has room.
    """
    n = x.shape[0]
    r = np.zeros(n)
    p = np.zeros(n)
    ap = np.zeros(n)
    apply(cond, strides, rows, m, diag, x, ap)
    bnorm = np.sqrt(interior_dot(rows, m, b, b))
    rr = 0.0
    for row in range(rows.shape[0]):
        s0 = rows[row]
        for j in range(s0, s0 + m):
            rj = b[j] - ap[j]
            r[j] = rj
            p[j] = rj
            rr += rj * rj
    if residuals.shape[0] > 0:
        residuals[0] = np.sqrt(rr)
    target = rel_tol * bnorm
    it = 0
    if np.sqrt(rr) <= target:
        return it, np.sqrt(rr), True
    while it < max_iters:
        pap = apply(cond, strides, rows, m, diag, p, ap)
        if pap <= 0.0:
            break
        alpha = rr / pap
        rr_new = 0.0
        for row in range(rows.shape[0]):
            s0 = rows[row]
            for j in range(s0, s0 + m):
                x[j] += alpha * p[j]
                rj = r[j] - alpha * ap[j]
                r[j] = rj
                rr_new += rj * rj
        it += 1
        if it < residuals.shape[0]:
            residuals[it] = np.sqrt(rr_new)
        if np.sqrt(rr_new) <= target:
            return it, np.sqrt(rr_new), True
        beta = rr_new / rr
        rr = rr_new
        for row in range(rows.shape[0]):
            s0 = rows[row]
            for j in range(s0, s0 + m):
                p[j] = r[j] + beta * p[j]
    return it, np.sqrt(rr), False


@nb.njit(cache=True)
def parabolic_step(cond, strides, rows, m, pi, w, out):
    """One step of w <- w + (1/(2 pi)) div(a grad w) on the interior."""
    d = strides.shape[0]
    for r in range(rows.shape[0]):
        s0 = rows[r]
        for j in range(s0, s0 + m):
            acc = 0.0
            wj = w[j]
            for i in range(d):
                s = strides[i]
                acc += cond[i, j] * (w[j + s] - wj) + cond[i, j - s] * (w[j - s] - wj)
            out[j] = wj + 0.5 * acc / pi[j]


_REASSOC = {"reassoc", "contract"}

# Two-dimensional specializations: same arithmetic, explicit 2-d indexing so
# the inner loops vectorize.  Arrays are the padded (m + 2, m + 2) views.


@nb.njit(cache=True, fastmath=_REASSOC)
def apply_2d(c0, c1, diag, u, out):
    n0, n1 = u.shape
    dot = 0.0
    for a in range(1, n0 - 1):
        for b in range(1, n1 - 1):
            out[a, b] = (diag[a, b] * u[a, b]
                         - c0[a, b] * u[a + 1, b] - c0[a - 1, b] * u[a - 1, b]
                         - c1[a, b] * u[a, b + 1] - c1[a, b - 1] * u[a, b - 1])
        for b in range(1, n1 - 1):
            dot += u[a, b] * out[a, b]
    return dot


@nb.njit(cache=True, fastmath=_REASSOC)
def cg_2d(c0, c1, diag, b, x, rel_tol, max_iters, residuals):
    n0, n1 = x.shape
    r = np.zeros((n0, n1))
    p = np.zeros((n0, n1))
    ap = np.zeros((n0, n1))
    apply_2d(c0, c1, diag, x, ap)
    bb = 0.0
    rr = 0.0
    for i in range(1, n0 - 1):
        for j in range(1, n1 - 1):
            bb += b[i, j] * b[i, j]
        for j in range(1, n1 - 1):
            rj = b[i, j] - ap[i, j]
            r[i, j] = rj
            p[i, j] = rj
        for j in range(1, n1 - 1):
            rr += r[i, j] * r[i, j]
    if residuals.shape[0] > 0:
        residuals[0] = np.sqrt(rr)
    target = rel_tol * np.sqrt(bb)
    it = 0
    if np.sqrt(rr) <= target:
        return it, np.sqrt(rr), True
    while it < max_iters:
        pap = apply_2d(c0, c1, diag, p, ap)
        if pap <= 0.0:
            break
        alpha = rr / pap
        rr_new = 0.0
        for i in range(1, n0 - 1):
            for j in range(1, n1 - 1):
                x[i, j] += alpha * p[i, j]
                r[i, j] -= alpha * ap[i, j]
            for j in range(1, n1 - 1):
                rr_new += r[i, j] * r[i, j]
        it += 1
        if it < residuals.shape[0]:
            residuals[it] = np.sqrt(rr_new)
        if np.sqrt(rr_new) <= target:
            return it, np.sqrt(rr_new), True
        beta = rr_new / rr
        rr = rr_new
        for i in range(1, n0 - 1):
            for j in range(1, n1 - 1):
                p[i, j] = r[i, j] + beta * p[i, j]
    return it, np.sqrt(rr), False


@nb.njit(cache=True)
def parabolic_step_2d(c0, c1, half_inv_pi, w, out):
    n0, n1 = w.shape
    for a in range(1, n0 - 1):
        for b in range(1, n1 - 1):
            wab = w[a, b]
            acc = (c0[a, b] * (w[a + 1, b] - wab) + c0[a - 1, b] * (w[a - 1, b] - wab)
                   + c1[a, b] * (w[a, b + 1] - wab) + c1[a, b - 1] * (w[a, b - 1] - wab))
            out[a, b] = wab + half_inv_pi[a, b] * acc
