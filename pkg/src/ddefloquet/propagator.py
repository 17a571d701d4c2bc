"""Propagator of the instantaneous problem ydot = A(t) y.

The cache stores U_A(t, t_j) from every partition point t_j to every
collocation node inside the subinterval I_j, plus cumulative products
across subintervals.  The spectral-shift identity

    U(t, s, mu) = exp(-mu (t - s)) * U_A(t, s)

makes every mu-sweep reuse the single integration pass.
"""

import numpy as np
from scipy.integrate import solve_ivp

from ._poly import bary_weights, interp_rows, lobatto_nodes
from .errors import DomainError

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12


class PropagatorCache:
    """Dense tables of the bare propagator on a panelled partition of [-1, 0]."""

    def __init__(self, cp, k, panel_offsets=None, degree=8,
                 rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
        self.cp = cp
        self.n = cp.n
        self.k = int(k)
        self.rtol = rtol
        self.atol = atol
        h = 1.0 / self.k
        self.t_parts = -1.0 + h * np.arange(self.k + 1)
        if panel_offsets is None:
            panel_offsets = np.array([0.0, h])
        self.panel_offsets = np.asarray(panel_offsets, dtype=float)
        self.degree = int(degree)

        # node layout, identical in every subinterval: panels share boundary nodes
        local = []
        slices = []
        ref = lobatto_nodes(self.degree)
        for q in range(len(self.panel_offsets) - 1):
            lo, hi = self.panel_offsets[q], self.panel_offsets[q + 1]
            pts = lo + (ref + 1.0) * (hi - lo) / 2.0
            start = len(local) - (1 if q > 0 else 0)
            if q > 0:
                pts = pts[1:]
            local.extend(pts.tolist())
            slices.append((start, len(local)))
        self.local_nodes = np.asarray(local)
        self.panel_slices = slices
        self.panel_weights = [bary_weights(self.local_nodes[a:b]) for a, b in slices]
        self.m = self.local_nodes.size

        n = self.n
        self.phi = np.empty((self.k, self.m, n, n))
        for j in range(self.k):
            t0 = self.t_parts[j]
            nodes = t0 + self.local_nodes

            def rhs(t, y):
                a = cp.a_provider.eval_many(np.mod(np.array([t]), 1.0) - 1.0)[0]
                return (a @ y.reshape(n, n)).ravel()

            sol = solve_ivp(rhs, (t0, max(self.t_parts[j + 1], nodes[-1])), np.eye(n).ravel(),
                            method="DOP853", t_eval=nodes, rtol=rtol, atol=atol)
            if not sol.success:
                raise DomainError(f"propagator integration failed on subinterval {j}: {sol.message}")
            self.phi[j] = sol.y.T.reshape(self.m, n, n)
        self.phi_inv = np.linalg.inv(self.phi)

        self.cum = np.empty((self.k + 1, n, n))
        self.cum[0] = np.eye(n)
        for j in range(self.k):
            self.cum[j + 1] = self.phi[j, -1] @ self.cum[j]

    @property
    def monodromy_matrix(self):
        return self.cum[self.k]

    def _locate(self, t):
        """Subinterval index and local offset for t in [-1, 0]."""
        j = int(np.searchsorted(self.t_parts, t, side="right")) - 1
        j = min(max(j, 0), self.k - 1)
        return j, t - self.t_parts[j]

    def u_bare(self, t, s=-1.0):
        """Bare propagator U_A(t, s) for -1 <= s <= t <= 0."""
        if t < s - 1e-14:
            raise DomainError(f"propagate requires t >= s, got t={t}, s={s}")
        return self._u_from_base(t) @ np.linalg.inv(self._u_from_base(s))

    def _u_from_base(self, t):
        """U_A(t, -1) by panel-wise barycentric interpolation of the cache."""
        j, off = self._locate(t)
        q = int(np.searchsorted(self.panel_offsets, off, side="right")) - 1
        q = min(max(q, 0), len(self.panel_slices) - 1)
        a, b = self.panel_slices[q]
        row = interp_rows(self.local_nodes[a:b], self.panel_weights[q], [off])[0]
        phi_t = np.einsum("i,ijk->jk", row, self.phi[j, a:b])
        return phi_t @ self.cum[j]


def build_cache(cp, k, panel_offsets=None, degree=8, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    return PropagatorCache(cp, k, panel_offsets, degree, rtol, atol)


def propagate(cache, t, s, mu):
    """Shifted propagator U(t, s, mu) = exp(-mu (t - s)) U_A(t, s)."""
    return np.exp(-mu * (t - s)) * cache.u_bare(t, s).astype(complex)


def monodromy(cache):
    """Bare monodromy matrix U_A(0, -1)."""
    return cache.monodromy_matrix.astype(complex)
