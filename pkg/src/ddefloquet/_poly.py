"""Small polynomial-interpolation helpers: Lobatto nodes, barycentric
interpolation, differentiation and cumulative-integration matrices."""

import numpy as np
from numpy.polynomial import chebyshev as _cheb


def lobatto_nodes(p):
    """p+1 Chebyshev-Lobatto nodes on [-1, 1], increasing."""
    if p == 0:
        return np.array([0.0])
    return -np.cos(np.pi * np.arange(p + 1) / p)


def bary_weights(nodes):
    """Barycentric weights for an arbitrary node set."""
    x = np.asarray(nodes, dtype=float)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / diff.prod(axis=1)
    return w / np.abs(w).max()


def interp_rows(nodes, weights, targets):
    """Rows of the interpolation matrix mapping nodal values to values at targets."""
    x = np.asarray(nodes, dtype=float)
    t = np.atleast_1d(np.asarray(targets, dtype=float))
    rows = np.zeros((t.size, x.size))
    d = t[:, None] - x[None, :]
    exact = np.abs(d) < 1e-14
    hit = exact.any(axis=1)
    safe = np.where(exact, 1.0, d)
    terms = weights[None, :] / safe
    rows[~hit] = terms[~hit] / terms[~hit].sum(axis=1, keepdims=True)
    rows[hit] = exact[hit].astype(float)
    return rows


def diff_matrix(nodes, weights=None):
    """Differentiation matrix for Lagrange interpolation on the given nodes."""
    x = np.asarray(nodes, dtype=float)
    w = bary_weights(x) if weights is None else weights
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    d = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def cumint_matrix(nodes):
    """Matrix Q with (Q f)_i = integral of the interpolant of f from nodes[0]
    to nodes[i].  Exact for polynomials of the nodal degree."""
    x = np.asarray(nodes, dtype=float)
    p = x.size - 1
    lo, hi = x[0], x[-1]
    # map onto [-1, 1] for a well-conditioned Chebyshev basis
    xm = 2.0 * (x - lo) / (hi - lo) - 1.0 if hi > lo else x * 0.0
    v = _cheb.chebvander(xm, p)
    vinv = np.linalg.inv(v)
    anti = np.zeros((p + 1, p + 1))
    for k in range(p + 1):
        e = np.zeros(p + 1)
        e[k] = 1.0
        a = _cheb.chebint(e)
        anti[:, k] = _cheb.chebval(xm, a) - _cheb.chebval(xm[0], a)
    return (hi - lo) / 2.0 * anti @ vinv
