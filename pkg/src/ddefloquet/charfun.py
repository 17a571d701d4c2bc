"""Characteristic matrix and characteristic function of the periodic DDE.

The periodicity interval [-1, 0] is split into k equal subintervals with
restart values v_j.  Solving the integral equation

    y = S(mu) v + z * L(mu) y

on a piecewise-polynomial grid and collecting the continuity defects of y
at the restart points yields the nk x nk characteristic matrix D(mu, z);
its determinant h(mu, z) vanishes exactly at the nontrivial solutions of
the periodic boundary value problem.  Substituting z = exp(-(N+tau) mu)
gives the finite-delay characteristic function h_N.

Subintervals are subdivided into panels at the images of the partition
points under repeated delay shifts, so that the piecewise-polynomial
representation tracks the low-order derivative discontinuities of y and
retains spectral accuracy.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._poly import cumint_matrix, interp_rows
from .errors import DerivativeUnreliableError, DomainError, NearPoleError, ResolutionError
from .model import reduce_time
from .propagator import PropagatorCache

DEFAULT_R = 3.0
DEFAULT_DEGREE = 8
DEFAULT_BREAK_LEVELS = 3
K_CAP = 4096
ADAPTIVE_REL_TOL = 1e-8
_BOUNDARY_EPS = 1e-12
_LOG_GUARD = 700.0


def c_bound(norm_a, norm_b, r):
    """Partition-count bound guaranteeing unique solvability of the
    integral equation on the strip Re mu >= -R, |z| <= exp(R)."""
    return max(norm_a + r, norm_b * np.exp(1.0 + r))


@dataclass
class CharValue:
    """Characteristic determinant in log-magnitude/argument form."""

    log_abs_h: float
    arg_h: float
    h_hat: complex           # plain determinant, clipped against overflow
    cond: float              # crude LU condition estimate of the char matrix
    sigma_min_ratio: float   # smallest/largest singular value of the char matrix
    certified: bool          # inside the validity strip Re mu >= -R, |z| <= e^R

    @property
    def value(self):
        return self.h_hat


class CharContext:
    """Partition, panel layout and cached propagators for evaluating h."""

    def __init__(self, cp, tau, r, k, degree=DEFAULT_DEGREE,
                 break_levels=DEFAULT_BREAK_LEVELS, guaranteed_mode=False,
                 rtol=1e-10, atol=1e-12):
        if not 0.0 <= tau < 1.0:
            raise DomainError(f"tau must lie in [0, 1), got {tau}")
        self.cp = cp
        self.n = cp.n
        self.tau = float(tau)
        self.r = float(r)
        self.k = int(k)
        self.degree = int(degree)
        self.guaranteed_mode = guaranteed_mode
        self.norm_a = cp.norm_a()
        self.norm_b = cp.norm_b()

        h = 1.0 / self.k
        offsets = [0.0, h]
        for m in range(1, break_levels + 1):
            c = np.mod(m * self.k * self.tau, 1.0) * h
            if min(c, h - c) > 1e-9 * h and all(abs(c - o) > 1e-9 * h for o in offsets):
                offsets.append(c)
        self.panel_offsets = np.array(sorted(offsets))

        self.cache = PropagatorCache(cp, self.k, self.panel_offsets, self.degree,
                                     rtol=rtol, atol=atol)
        self._precompute()
        self._memo = {}

    # -- static (mu-independent) assembly data -------------------------------

    def _precompute(self):
        cache = self.cache
        n, k, m = self.n, self.k, cache.m
        self.m = m
        self.dof = k * m * n
        if self.dof > 200_000:
            raise ResolutionError(f"discretization size {self.dof} out of range; lower R or k")

        # quadrature sources: every panel contributes its full node set, so the
        # two sides of an interior integrand jump can carry different data
        src_panel, src_local = [], []
        for q, (a, b) in enumerate(cache.panel_slices):
            for l in range(a, b):
                src_panel.append(q)
                src_local.append(l)
        self.n_src = len(src_panel)
        self.src_node = np.array(src_local)          # node index of each source
        src_times = cache.local_nodes[self.src_node]  # local offset in [0, 1/k]

        # cumulative weights: integral from the subinterval start to node i of
        # the per-panel interpolant of the integrand samples
        cw = np.zeros((m, self.n_src))
        acc = np.zeros(self.n_src)
        filled = np.zeros(m, dtype=bool)
        pos = 0
        for q, (a, b) in enumerate(cache.panel_slices):
            npan = b - a
            qp = cumint_matrix(cache.local_nodes[a:b])
            for li in range(npan):
                i = a + li
                if not filled[i]:
                    cw[i] = acc
                    cw[i, pos:pos + npan] += qp[li]
                    filled[i] = True
            acc = acc.copy()
            acc[pos:pos + npan] += qp[-1]
            pos += npan
        self.cw = cw
        # local time differences src - node, for the exponential shift factors
        self.dsrc = src_times[None, :] - cache.local_nodes[:, None]

        # per subinterval: source matrices Phi^{-1} B and delayed interpolation
        bmats = [cache.cp.b_provider.eval_many(
            reduce_time(cache.t_parts[j] + src_times)) for j in range(k)]
        self.src_col0 = np.empty((k, self.n_src), dtype=int)
        # every panel carries degree+1 nodes, so all delayed-interpolation
        # stencils have the same width and stack into one tensor
        ln = (self.degree + 1) * n
        self.stencil_width = ln
        self.ms_tensor = np.empty((k, self.n_src, n, ln))
        for j in range(k):
            for s in range(self.n_src):
                q = src_panel[s]
                a, b = cache.panel_slices[q]
                node = self.src_node[s]
                wmat = cache.phi_inv[j, node] @ bmats[j][s]
                # side convention: a panel's right endpoint approaches its
                # delayed argument from the left, everything else from within
                side = -1 if node == b - 1 else +1
                j2, q2, row = self._delayed_interp(cache.t_parts[j] + src_times[s], side)
                a2, _ = cache.panel_slices[q2]
                self.src_col0[j, s] = (j2 * m + a2) * n
                self.ms_tensor[j, s] = np.kron(row, wmat)

        # restart-value extraction: left limits of y at 0, t_1, ..., t_{k-1}
        ext_nodes = [(k - 1) * m + (m - 1)] + [(i - 1) * m + (m - 1) for i in range(1, k)]
        self.ext_dofs = np.concatenate([np.arange(n) + g * n for g in ext_nodes])

    def _delayed_interp(self, s_abs, side):
        """Target subinterval, panel, and interpolation row for y((s - tau) mod)."""
        cache = self.cache
        sig = float(reduce_time(s_abs - self.tau))
        j2 = int(np.floor((sig + 1.0) * self.k))
        j2 = min(max(j2, 0), self.k - 1)
        off = sig - cache.t_parts[j2]
        if side < 0 and off < _BOUNDARY_EPS:
            # left limit exactly at a partition point: previous subinterval
            j2 = (j2 - 1) % self.k
            off = 1.0 / self.k
        q2 = int(np.searchsorted(cache.panel_offsets, off, side="right")) - 1
        q2 = min(max(q2, 0), len(cache.panel_slices) - 1)
        a, b = cache.panel_slices[q2]
        row = interp_rows(cache.local_nodes[a:b], cache.panel_weights[q2], [off])[0]
        return j2, q2, row

    # -- mu-dependent assembly ----------------------------------------------

    def _scatter(self, e):
        """Assemble the dense operator matrix from shift factors e (m, n_src)."""
        n, k, m, ln = self.n, self.k, self.m, self.stencil_width
        mn = m * n
        contrib = np.einsum("is,jsal->jsial", e, self.ms_tensor)
        lmat = np.zeros((self.dof, self.dof), dtype=complex)
        for j in range(k):
            blk = lmat[j * mn:(j + 1) * mn]
            for s in range(self.n_src):
                c0 = self.src_col0[j, s]
                blk[:, c0:c0 + ln] += contrib[j, s].reshape(mn, ln)
        phi = self.cache.phi.reshape(k, m, n, n)
        v = lmat.reshape(k, m, n, self.dof)
        v[...] = np.einsum("jmab,jmbD->jmaD", phi, v)
        return lmat

    def _assemble(self, mu, need_mu=True):
        """L(mu) and S(mu) plus (optionally) their mu-derivatives, memoized."""
        key = complex(mu)
        ent = self._memo.get(key)
        if ent is not None and (not need_mu or ent[1] is not None):
            return ent
        cache = self.cache
        n, k, m = self.n, self.k, self.m
        shift = np.exp(mu * self.dsrc)
        lmat = self._scatter(self.cw * shift)
        phi = cache.phi.reshape(k, m, n, n)

        sloc = np.exp(-mu * cache.local_nodes)
        smat = np.zeros((self.dof, n * k), dtype=complex)
        for j in range(k):
            blk = sloc[:, None, None] * phi[j]
            smat[j * m * n:(j + 1) * m * n, j * n:(j + 1) * n] = blk.reshape(m * n, n)

        if need_mu:
            lmat_mu = self._scatter(self.cw * self.dsrc * shift)
            smat_mu = np.zeros_like(smat)
            for j in range(k):
                blk = sloc[:, None, None] * phi[j]
                smat_mu[j * m * n:(j + 1) * m * n, j * n:(j + 1) * n] = \
                    (-cache.local_nodes[:, None, None] * blk).reshape(m * n, n)
            out = (sp.csc_matrix(lmat), sp.csc_matrix(lmat_mu), smat, smat_mu, lmat)
        else:
            out = (sp.csc_matrix(lmat), None, smat, None, lmat)
        if len(self._memo) > 4:
            self._memo.clear()
        self._memo[key] = out
        return out

    def factorize(self, mu, z):
        """LU factorization of (I - z L(mu)) reusable across right-hand sides."""
        lcsc, _, _, _, _ = self._assemble(mu, need_mu=False)
        a = sp.identity(self.dof, dtype=complex, format="csc") - z * lcsc
        try:
            return spla.splu(a)
        except RuntimeError as exc:
            raise NearPoleError(
                f"(I - z L) numerically singular at mu={mu}, z={z}: {exc}") from exc

    def certified(self, mu, z):
        return (np.real(mu) >= -self.r - 1e-12) and (abs(z) <= np.exp(self.r) * (1 + 1e-12))

    def operator_norm_inf(self, mu):
        """Max-norm of the discretized integral operator L(mu)."""
        _, _, _, _, ldense = self._assemble(mu, need_mu=False)
        comp = np.abs(ldense).reshape(self.dof, -1, self.n).sum(axis=(1, 2))
        return float(comp.max())


def build_context(cp, tau, r=DEFAULT_R, mode="adaptive", degree=DEFAULT_DEGREE,
                  break_levels=DEFAULT_BREAK_LEVELS, k_start=None, k_cap=K_CAP,
                  rtol=1e-10, atol=1e-12):
    """Choose the partition count and build the evaluation context.

    Guaranteed mode takes k just above the contraction bound C(R); adaptive
    mode starts small and doubles k until probe values of |h| settle.
    """
    if r <= 0:
        raise DomainError(f"R must be positive, got {r}")
    norm_a, norm_b = cp.norm_a(), cp.norm_b()
    if mode == "guaranteed":
        k = int(np.ceil(c_bound(norm_a, norm_b, r))) + 1
        if k > k_cap:
            raise ResolutionError(
                f"guaranteed mode needs k={k} > cap {k_cap}; lower R")
        return CharContext(cp, tau, r, k, degree, break_levels, True, rtol, atol)
    if mode != "adaptive":
        raise DomainError(f"unknown k mode {mode!r}")

    k = k_start if k_start is not None else max(16, int(np.ceil(norm_a + r)))
    probes = [(0.08 + 0.45j, 0.8 + 0.2j), (-0.5 * r + 1.3j, 0.35 - 0.6j),
              (0.3 - 0.9j, 1.0 + 0.0j), (0.02 + 2.9j, -0.4 + 0.3j),
              (-0.2 * r + 0.1j, 0.1 - 0.9j)]
    ctx = CharContext(cp, tau, r, k, degree, break_levels, False, rtol, atol)
    if norm_b < 1e-14:
        return ctx
    vals = np.array([char_value(ctx, mu, z).h_hat for mu, z in probes])
    while True:
        if 2 * k > k_cap:
            raise ResolutionError(
                f"adaptive refinement exceeded k cap {k_cap}; lower R or relax")
        nxt = CharContext(cp, tau, r, 2 * k, degree, break_levels, False, rtol, atol)
        nvals = np.array([char_value(nxt, mu, z).h_hat for mu, z in probes])
        rel = np.abs(nvals - vals) / np.maximum(np.abs(nvals), 1e-300)
        if rel.max() < ADAPTIVE_REL_TOL:
            return ctx
        ctx, vals, k = nxt, nvals, 2 * k


class DiscreteSolution:
    """Piecewise-polynomial solution of the integral equation on the panel grid."""

    def __init__(self, ctx, values):
        self.ctx = ctx
        self.values = values  # (k, m, n) complex, per-subinterval node values

    def eval(self, t, side=+1):
        ctx = self.ctx
        j2, q2, row = ctx._delayed_interp(float(t) + ctx.tau, side)
        a, b = ctx.cache.panel_slices[q2]
        return row @ self.values[j2, a:b]

    def jump_sizes(self):
        """Discontinuities of y at the restart points t_1 .. t_{k-1} and 0/-1."""
        left = self.values[:, -1]                       # left limits at t_{j+1}
        right = np.roll(self.values[:, 0], -1, axis=0)  # right limits there
        return np.linalg.norm(left - right, axis=1)


def solve_integral_equation(ctx, mu, z, v):
    """Solve y = S(mu) v + z L(mu) y for a restart tuple v in C^{nk}."""
    _check_strip(ctx, mu, z)
    v = np.asarray(v, dtype=complex).reshape(ctx.n * ctx.k)
    lu = ctx.factorize(mu, z)
    _, _, smat, _, _ = ctx._assemble(mu, need_mu=False)
    y = lu.solve(smat @ v)
    return DiscreteSolution(ctx, y.reshape(ctx.k, ctx.m, ctx.n))


def picard_solve(ctx, mu, z, v, iterations=50):
    """Fixed-point iteration oracle for the integral equation."""
    _check_strip(ctx, mu, z)
    v = np.asarray(v, dtype=complex).reshape(ctx.n * ctx.k)
    lcsc, _, smat, _, _ = ctx._assemble(mu, need_mu=False)
    rhs = smat @ v
    y = rhs.copy()
    for _ in range(iterations):
        y = rhs + z * (lcsc @ y)
    return DiscreteSolution(ctx, y.reshape(ctx.k, ctx.m, ctx.n))


def _check_strip(ctx, mu, z):
    if ctx.guaranteed_mode:
        if np.real(mu) < -ctx.r - 1e-12:
            raise DomainError(f"Re mu = {np.real(mu)} below the strip -R = {-ctx.r}")
        if abs(z) > np.exp(ctx.r) * (1 + 1e-12):
            raise DomainError(f"|z| = {abs(z)} exceeds exp(R) = {np.exp(ctx.r)}")


def _char_core(ctx, mu, z, derivatives=False, need_mu=True):
    _check_strip(ctx, mu, z)
    lcsc, lmu, smat, smat_mu, _ = ctx._assemble(mu, need_mu=derivatives and need_mu)
    lu = ctx.factorize(mu, z)
    y = lu.solve(smat)
    nk = ctx.n * ctx.k
    delta = np.eye(nk, dtype=complex) - y[ctx.ext_dofs]
    if not derivatives:
        return delta, None, None
    dy_z = lu.solve(lcsc @ y)
    if not need_mu:
        return delta, None, -dy_z[ctx.ext_dofs]
    dy_mu = lu.solve(smat_mu + z * (lmu @ y))
    return delta, -dy_mu[ctx.ext_dofs], -dy_z[ctx.ext_dofs]


def _value_from_delta(ctx, delta, mu, z):
    with warnings.catch_warnings():
        # an exactly singular Delta is a legitimate root, not an error
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(delta)
    diag = np.diag(lu)
    absd = np.abs(diag)
    if np.any(absd == 0.0):
        log_abs = -np.inf
        arg = 0.0
        h_hat = 0.0 + 0.0j
    else:
        log_abs = float(np.log(absd).sum())
        swaps = int(np.sum(piv != np.arange(len(piv))))
        arg = float(np.angle(np.prod(diag / absd)) + np.pi * (swaps % 2))
        arg = float((arg + np.pi) % (2 * np.pi) - np.pi)
        h_hat = np.exp(min(log_abs, _LOG_GUARD) + 1j * arg)
    cond = float(absd.min() / absd.max()) if absd.size and absd.max() > 0 else 0.0
    sv = sla.svdvals(delta)
    ratio = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
    return CharValue(log_abs, arg, h_hat, cond, ratio, ctx.certified(mu, z))


def char_matrix(ctx, mu, z):
    """The nk x nk characteristic matrix."""
    delta, _, _ = _char_core(ctx, mu, z)
    return delta


def char_value(ctx, mu, z):
    """Characteristic function h(mu, z) = det of the characteristic matrix."""
    delta, _, _ = _char_core(ctx, mu, z)
    return _value_from_delta(ctx, delta, mu, z)


def char_value_N(ctx, n_delay, mu):
    """h_N(mu) = h(mu, exp(-(N + tau) mu)); roots are Floquet exponents."""
    theta = n_delay + ctx.tau
    if np.real(mu) < -ctx.r / theta - 1e-12:
        raise DomainError(
            f"Re mu = {np.real(mu)} below the h_N strip -R/(N+tau) = {-ctx.r / theta}")
    return char_value(ctx, mu, np.exp(-theta * mu))


def char_log_derivatives(ctx, mu, z, need_mu=True):
    """(CharValue, d/dmu log h, d/dz log h) from the LU-based trace formulas.

    With need_mu=False the first derivative is skipped and returned as None."""
    delta, dmu, dz = _char_core(ctx, mu, z, derivatives=True, need_mu=need_mu)
    cv = _value_from_delta(ctx, delta, mu, z)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(delta)
    ld1 = complex(np.trace(sla.lu_solve((lu, piv), dmu))) if need_mu else None
    ld2 = complex(np.trace(sla.lu_solve((lu, piv), dz)))
    return cv, ld1, ld2


def char_derivatives(ctx, mu, z, rel_tol=1e-4, max_halvings=4):
    """(d1 h, d2 h) by central differences, with a Cauchy-Riemann cross-check.

    Each partial is differenced along the real axis of its argument; the same
    difference along the imaginary axis must agree or the step is halved.
    """

    def _fd(idx, arg):
        step = 1e-6 * max(1.0, abs(arg))
        for _ in range(max_halvings + 1):
            if idx == 0:
                d_re = (char_value(ctx, mu + step, z).h_hat
                        - char_value(ctx, mu - step, z).h_hat) / (2 * step)
                d_im = (char_value(ctx, mu + 1j * step, z).h_hat
                        - char_value(ctx, mu - 1j * step, z).h_hat) / (2j * step)
            else:
                d_re = (char_value(ctx, mu, z + step).h_hat
                        - char_value(ctx, mu, z - step).h_hat) / (2 * step)
                d_im = (char_value(ctx, mu, z + 1j * step).h_hat
                        - char_value(ctx, mu, z - 1j * step).h_hat) / (2j * step)
            scale = max(abs(d_re), abs(d_im))
            if scale == 0.0 or abs(d_re - d_im) <= rel_tol * scale:
                return (d_re + d_im) / 2.0
            step *= 0.5
        raise DerivativeUnreliableError(
            f"Cauchy-Riemann mismatch persists for argument {idx + 1} at mu={mu}, z={z}")

    return _fd(0, mu), _fd(1, z)
