"""Spectra in the large-delay limit.

Two limit objects govern stability of the periodic solution as the integer
part N of the delay grows:

* the instantaneous spectrum: logarithms of the Floquet multipliers of the
  delay-free part ydot = A(t) y, exactly n points per branch strip;
* the asymptotic continuous spectrum: curves omega -> (gamma, phi) where
  h(i omega, exp(-gamma - i phi)) = 0.  For each omega these are read off
  the eigenvalues eta of a compact integral operator K(i omega); the curve
  data is (gamma, phi) = (log|eta|, arg eta), and each point is polished by
  a Newton step on the characteristic function itself.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

from .charfun import char_log_derivatives, char_value
from .errors import NoConvergenceError, NumericalError, PreconditionError
from .model import reduce_time

DEFAULT_M = 256
AXIS_TOL = 1e-9


def instantaneous_spectrum(ctx):
    """Principal logarithms of the monodromy eigenvalues of ydot = A(t) y.

    Returns exactly n exponents with Im in [-pi, pi), sorted by descending
    real part."""
    lam = np.linalg.eigvals(ctx.cache.monodromy_matrix)
    if np.any(np.abs(lam) < 1e-300):
        raise NumericalError("monodromy matrix numerically singular")
    mu = np.log(np.abs(lam)) + 1j * np.angle(lam)
    # angle returns (-pi, pi]; fold the single boundary case
    im = np.where(np.imag(mu) >= np.pi, np.imag(mu) - 2 * np.pi, np.imag(mu))
    mu = np.real(mu) + 1j * im
    return mu[np.argsort(-np.real(mu))]


def strongly_unstable(ctx, tol=0.0):
    """The strongly unstable part: instantaneous exponents with Re > tol."""
    mu = instantaneous_spectrum(ctx)
    return mu[np.real(mu) > tol]


class _AcsGrid:
    """omega-independent tables for the operator discretization."""

    def __init__(self, ctx, m_grid):
        self.m = int(m_grid)
        n = ctx.n
        self.s = -1.0 + np.arange(self.m + 1) / self.m
        cp = ctx.cp

        def rhs(t, y):
            a = cp.a_provider.eval_many(np.array([reduce_time(t)]))[0]
            return (a @ y.reshape(n, n)).ravel()

        sol = solve_ivp(rhs, (-1.0, max(0.0, self.s[-1])), np.eye(n).ravel(),
                        method="DOP853", t_eval=self.s, rtol=1e-10, atol=1e-12)
        if not sol.success:
            raise NumericalError(f"propagator integration failed: {sol.message}")
        self.ua = sol.y.T.reshape(self.m + 1, n, n)
        self.ua_inv = np.linalg.inv(self.ua)
        self.mono = self.ua[-1]

        # delayed read y(sigma(s_l)) by periodic cubic interpolation on the grid
        bvals = cp.b_provider.eval_many(reduce_time(self.s[:-1]))
        sig = (self.s[:-1] - ctx.tau + 1.0) * self.m  # grid units, periodic
        base = np.floor(sig).astype(int)
        frac = sig - base
        # 4-point Lagrange stencil centred on the containing cell
        stencil = np.array([-1, 0, 1, 2])
        x = stencil.astype(float)
        lag = np.empty((self.m, 4))
        for a_ in range(4):
            others = np.delete(x, a_)
            lag[:, a_] = np.prod((frac[:, None] - others) / (x[a_] - others), axis=1)
        pmat = np.zeros((self.m, self.m))
        for a_ in range(4):
            cols = np.mod(base + stencil[a_], self.m)
            pmat[np.arange(self.m), cols] += lag[:, a_]
        # block operator y -> B(s) y(sigma(s)) on the stacked grid vector
        self.gmat = (pmat[:, :, None, None] * bvals[:, None, :, :]) \
            .transpose(0, 2, 1, 3).reshape(self.m * n, self.m * n)
        self.n = n


def acs_operator(ctx, omega, m_grid=DEFAULT_M, _grid=None):
    """Dense matrix of the discretized operator K(i omega).

    Acts on grid samples (y(s_0), ..., y(s_{M-1})) of a periodic function;
    the delay-free monodromy must have no multiplier at exp(i omega)."""
    g = _grid if _grid is not None else _AcsGrid(ctx, m_grid)
    m, n = g.m, g.n
    phase = np.exp(1j * omega * (g.s + 1.0))
    closure = np.eye(n) - np.exp(-1j * omega) * g.mono
    sv = np.linalg.svd(closure, compute_uv=False)
    if sv[-1] < AXIS_TOL:
        raise PreconditionError(
            f"delay-free multiplier on the unit circle at omega={omega}")
    cinv = np.linalg.inv(closure)

    gblk = g.gmat.reshape(m, n, m * n)
    gext = np.concatenate([gblk, gblk[:1]], axis=0)  # integrand repeats at s=0
    w = phase[:, None, None] * np.einsum("lab,lbD->laD", g.ua_inv, gext)
    cum = cumulative_trapezoid(w, dx=1.0 / m, axis=0, initial=0.0)
    head = cinv @ (np.exp(-1j * omega) * g.mono) @ cum[-1].reshape(n, m * n)
    body = cum[:m] + np.broadcast_to(head, (m, n, m * n))
    k = np.einsum("lab,lbD->laD", g.ua[:m].astype(complex), body)
    k *= np.conj(phase[:m])[:, None, None]
    return k.reshape(m * n, m * n)


def acs_eigen(ctx, omega, m_grid=DEFAULT_M, _grid=None):
    """Eigenvalues eta of K(i omega) with log|eta| >= -R, plus eigenvectors."""
    k = acs_operator(ctx, omega, m_grid, _grid)
    eta, vec = np.linalg.eig(k)
    keep = np.abs(eta) >= np.exp(-ctx.r)
    order = np.argsort(-np.abs(eta[keep]))
    idx = np.flatnonzero(keep)[order]
    return eta[idx], vec[:, idx]


@dataclass
class AcsBranch:
    branch_id: int
    omegas: list = field(default_factory=list)
    gammas: list = field(default_factory=list)
    phis: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    critical: bool = False

    def arrays(self):
        return (np.asarray(self.omegas), np.asarray(self.gammas), np.asarray(self.phis))


@dataclass
class AcsResult:
    branches: list
    omega_grid: np.ndarray

    def sup_gamma(self, exclude_radius=1e-4):
        """Largest gamma over all branch points, excluding a ball around the
        trivial-root tangency at (omega, gamma, phi) = (0, 0, 0)."""
        worst = -np.inf
        for br in self.branches:
            for w, g, p in zip(br.omegas, br.gammas, br.phis):
                pw = (p + np.pi) % (2 * np.pi) - np.pi
                if np.sqrt(w * w + g * g + pw * pw) <= exclude_radius:
                    continue
                worst = max(worst, g)
        return worst

    def critical_branch(self):
        for br in self.branches:
            if br.critical:
                return br
        return None

    def rows(self):
        out = []
        for br in self.branches:
            for w, g, p, r in zip(br.omegas, br.gammas, br.phis, br.residuals):
                out.append((w, g, p, br.branch_id, br.critical))
        return out


def _polish_point(ctx, omega, w0, max_iter=12, tol=1e-12):
    """Newton on w = gamma + i phi for h(i omega, exp(-w)) = 0."""
    w = complex(w0)
    for _ in range(max_iter):
        z = np.exp(-w)
        if abs(z) > np.exp(ctx.r) * (1 + 1e-9):
            raise NoConvergenceError("polish left the certified region", residual=None)
        cv, _, ld2 = char_log_derivatives(ctx, 1j * omega, z, need_mu=False)
        step = 1.0 / (z * ld2)
        if not np.isfinite(step):
            return w, cv.sigma_min_ratio
        w = w + step
        if abs(step) < tol:
            return w, char_value(ctx, 1j * omega, np.exp(-w)).sigma_min_ratio
    raise NoConvergenceError(f"polish stalled at omega={omega}", residual=abs(step))


def trace_acs(ctx, omega_grid, m_grid=DEFAULT_M, polish=True, overlap_min=0.5,
              critical_tol=1e-6):
    """Trace the asymptotic continuous spectrum over the given omega grid.

    Branches are continued by eigenvector overlap; each accepted point is
    refined against the characteristic function when polish is set.  The
    branch passing through (0, 0, 0) is flagged as critical."""
    omega_grid = np.asarray(omega_grid, dtype=float)
    grid = _AcsGrid(ctx, m_grid)
    branches = []
    active = []  # (branch, eigvec, last_phi)
    next_id = 0
    for omega in omega_grid:
        eta, vec = acs_eigen(ctx, omega, m_grid, _grid=grid)
        taken = np.zeros(eta.size, dtype=bool)
        new_active = []
        for br, v_prev, phi_prev in active:
            if eta.size == 0:
                continue
            ov = np.abs(v_prev.conj() @ vec)
            ov[taken] = -1.0
            j = int(np.argmax(ov))
            if ov[j] < overlap_min:
                continue
            taken[j] = True
            new_active.append((br, j, phi_prev))
        for j in range(eta.size):
            if not taken[j]:
                br = AcsBranch(branch_id=next_id)
                next_id += 1
                branches.append(br)
                new_active.append((br, j, None))
        active = []
        for br, j, phi_prev in new_active:
            gamma = float(np.log(np.abs(eta[j])))
            phi = float(np.angle(eta[j]))
            if phi_prev is not None:
                phi += 2 * np.pi * np.round((phi_prev - phi) / (2 * np.pi))
            resid = np.nan
            if polish:
                try:
                    w, resid = _polish_point(ctx, omega, gamma + 1j * phi)
                    gamma, phi = float(np.real(w)), float(np.imag(w))
                except NoConvergenceError:
                    pass  # keep the operator-based value, residual stays nan
            br.omegas.append(float(omega))
            br.gammas.append(gamma)
            br.phis.append(phi)
            br.residuals.append(float(resid) if np.isfinite(resid) else np.nan)
            active.append((br, vec[:, j], phi))

    for br in branches:
        w, g, p = br.arrays()
        i = int(np.argmin(np.abs(w)))
        pw = (p[i] + np.pi) % (2 * np.pi) - np.pi
        if abs(w[i]) <= critical_tol * 10 + np.diff(omega_grid).max() \
                and abs(g[i]) < 10 * critical_tol + 1e-3 and abs(pw) < 0.3:
            br.critical = True
    crits = [b for b in branches if b.critical]
    if len(crits) > 1:
        # keep the single branch closest to the origin tangency
        def score(b):
            w, g, p = b.arrays()
            i = int(np.argmin(np.abs(w)))
            return abs(g[i]) + abs((p[i] + np.pi) % (2 * np.pi) - np.pi)
        best = min(crits, key=score)
        for b in crits:
            b.critical = b is best
    return AcsResult(branches=branches, omega_grid=omega_grid)
