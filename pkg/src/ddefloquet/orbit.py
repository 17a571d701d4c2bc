"""Periodic orbit computation by piecewise-polynomial collocation.

Time is rescaled so the orbit has period 1 and the period T becomes an
unknown; the delayed argument is (s - base_delay/T) mod 1, which makes the
computed profile valid for every delay base_delay + N T of the original
system.  An integral phase condition against a reference profile fixes the
time shift.  The Jacobian is analytic, including the dependence of the
delayed argument on T."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateOrbitError, NoConvergenceError
from .model import CoefficientPair, builtin_hopf_example, sample_provider

DEFAULT_INTERVALS = 40
DEFAULT_DEGREE = 4
NEWTON_TOL = 1e-11
MAX_NEWTON = 40
MIN_AMPLITUDE = 1e-5


def _lagrange_rows(nodes, targets, deriv=False):
    """Values (or derivatives) of the Lagrange basis on nodes at targets."""
    p = len(nodes) - 1
    rows = np.empty((len(targets), p + 1))
    for j in range(p + 1):
        e = np.zeros(p + 1)
        e[j] = 1.0
        c = np.polyfit(nodes, e, p)
        if deriv:
            c = np.polyder(c)
        rows[:, j] = np.polyval(c, targets)
    return rows


class _Mesh:
    def __init__(self, m, degree):
        self.m = m
        self.d = degree
        self.np_total = m * degree
        self.xi = np.arange(degree + 1) / degree
        g, _ = np.polynomial.legendre.leggauss(degree)
        self.zeta = (g + 1.0) / 2.0
        self.lval = _lagrange_rows(self.xi, self.zeta)
        self.lder = _lagrange_rows(self.xi, self.zeta, deriv=True)
        # global point index stencil of interval i: i*d .. i*d+d (periodic)
        self.stencils = np.array([[(i * degree + j) % self.np_total
                                   for j in range(degree + 1)] for i in range(m)])
        self.s_colloc = np.array([[(i + z) / m for z in self.zeta] for i in range(m)])
        self.s_points = np.arange(self.np_total) / self.np_total

    def locate(self, s):
        s = s % 1.0
        i = min(int(np.floor(s * self.m)), self.m - 1)
        return i, s * self.m - i


@dataclass
class Orbit:
    mesh: _Mesh
    values: np.ndarray   # (m*d, n) profile at the global points
    period: float
    base_delay: float

    def eval(self, s):
        i, xi = self.mesh.locate(s)
        row = _lagrange_rows(self.mesh.xi, [xi])[0]
        return row @ self.values[self.mesh.stencils[i]]

    def deriv(self, s):
        """dx/ds of the rescaled profile."""
        i, xi = self.mesh.locate(s)
        row = _lagrange_rows(self.mesh.xi, [xi], deriv=True)[0]
        return self.mesh.m * (row @ self.values[self.mesh.stencils[i]])

    def amplitude(self):
        return float((self.values.max(axis=0) - self.values.min(axis=0)).max())


def solve_orbit(model, guess, period_guess, m=DEFAULT_INTERVALS,
                degree=DEFAULT_DEGREE, tol=NEWTON_TOL, max_iter=MAX_NEWTON):
    """Newton collocation for a periodic orbit.

    guess is a callable s -> state on [0, 1); period_guess seeds T."""
    mesh = _Mesh(m, degree)
    n = model.n
    x = np.array([np.asarray(guess(s), dtype=float) for s in mesh.s_points])
    t_per = float(period_guess)
    # phase reference: derivative of the guess profile via interval polynomials
    ref_dot = np.empty_like(x)
    for p in range(mesh.np_total):
        i, j = divmod(p, degree)
        row = _lagrange_rows(mesh.xi, [mesh.xi[j]], deriv=True)[0]
        ref_dot[p] = m * (row @ x[mesh.stencils[i]])

    unknowns = mesh.np_total * n + 1

    def residual_and_jac(xv, t_per):
        res = np.zeros(unknowns)
        jac = np.zeros((unknowns, unknowns))
        tau_s = model.base_delay / t_per
        for i in range(m):
            idx = mesh.stencils[i]
            xloc = xv[idx]
            for q in range(degree):
                r0 = (i * degree + q) * n
                xc = mesh.lval[q] @ xloc
                xder = m * (mesh.lder[q] @ xloc)
                s_del = (mesh.s_colloc[i, q] - tau_s) % 1.0
                i2, xi2 = mesh.locate(s_del)
                row2 = _lagrange_rows(mesh.xi, [xi2])[0]
                drow2 = _lagrange_rows(mesh.xi, [xi2], deriv=True)[0]
                idx2 = mesh.stencils[i2]
                xd = row2 @ xv[idx2]
                xd_dot = m * (drow2 @ xv[idx2])
                fval = model.f(xc, xd)
                res[r0:r0 + n] = xder - t_per * fval
                j1 = t_per * model.d1f(xc, xd)
                j2 = t_per * model.d2f(xc, xd)
                for j in range(degree + 1):
                    c = idx[j] * n
                    jac[r0:r0 + n, c:c + n] += m * mesh.lder[q, j] * np.eye(n) \
                        - mesh.lval[q, j] * j1
                    c2 = idx2[j] * n
                    jac[r0:r0 + n, c2:c2 + n] += -row2[j] * j2
                # T enters through the multiplier and the delayed argument:
                # d(s_del)/dT = base_delay / T^2, and j2 already carries one T
                jac[r0:r0 + n, -1] = -fval - (model.base_delay / t_per**2) * (j2 @ xd_dot)
        # integral phase condition against the reference profile
        pr = mesh.np_total * n
        res[pr] = np.mean(np.einsum("pa,pa->p", ref_dot, xv))
        jac[pr, :-1] = ref_dot.ravel() / mesh.np_total
        return res, jac

    prev = np.inf
    for _ in range(max_iter):
        res, jac = residual_and_jac(x, t_per)
        rnorm = np.abs(res).max()
        if rnorm < tol:
            break
        try:
            step = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError as exc:
            raise NoConvergenceError(f"singular collocation Jacobian: {exc}",
                                     residual=rnorm) from exc
        # damping: retreat while the residual grows
        lam = 1.0
        for _ in range(6):
            x_try = x - lam * step[:-1].reshape(-1, n)
            t_try = t_per - lam * step[-1]
            if t_try <= 0:
                lam *= 0.5
                continue
            r_try, _ = residual_and_jac(x_try, t_try)
            if np.abs(r_try).max() < max(rnorm, prev) * (1 + 1e-12):
                break
            lam *= 0.5
        x, t_per = x_try, t_try
        prev = rnorm
    else:
        raise NoConvergenceError("orbit Newton iteration stalled", residual=rnorm)

    orb = Orbit(mesh=mesh, values=x, period=t_per, base_delay=model.base_delay)
    if orb.amplitude() < MIN_AMPLITUDE:
        raise DegenerateOrbitError(
            f"orbit collapsed to an equilibrium (amplitude {orb.amplitude():.2e})")
    return orb


def builtin_orbit(alpha, coupling, tau, m=DEFAULT_INTERVALS, degree=DEFAULT_DEGREE):
    """Orbit of the builtin planar example, with a staged homotopy fallback.

    The direct circle guess works for alpha > 0; otherwise start from the
    exact cycle at (alpha, coupling) = (0.25, 0) and ramp the parameters."""
    r0 = max(0.05, np.sqrt(max(alpha, 0.01)))

    def circle(r):
        return lambda s: np.array([r * np.cos(2 * np.pi * s),
                                   r * np.sin(2 * np.pi * s)])

    model = builtin_hopf_example(alpha, coupling, tau)
    try:
        return solve_orbit(model, circle(r0), 1.0, m, degree), model
    except (NoConvergenceError, DegenerateOrbitError):
        pass

    orb = solve_orbit(builtin_hopf_example(0.25, 0.0, tau), circle(0.5), 1.0, m, degree)
    for c in _ramp(0.0, coupling):
        orb = solve_orbit(builtin_hopf_example(0.25, c, tau),
                          orb.eval, orb.period, m, degree)
    for a in _ramp(0.25, alpha):
        orb = solve_orbit(builtin_hopf_example(a, coupling, tau),
                          orb.eval, orb.period, m, degree)
    return orb, model


@dataclass
class BranchPoint:
    tau_base: float
    orbit: Orbit
    dT_dtau: float


def continue_branch(model_factory, start, tau_range, step,
                    m=DEFAULT_INTERVALS, degree=DEFAULT_DEGREE):
    """Secant-predictor continuation of an orbit family in the base delay.

    model_factory maps a base delay to the model; start must be converged at
    tau_range[0].  Steps halve on failure; the branch ends early when the
    step underflows below 1e-5."""
    tau_lo, tau_hi = tau_range
    points = [BranchPoint(tau_base=tau_lo, orbit=start, dT_dtau=0.0)]
    tau, orb = tau_lo, start
    prev = None
    h = abs(step)
    while tau < tau_hi - 1e-12:
        h = min(h, tau_hi - tau)
        tau_next = tau + h
        if prev is not None and abs(tau - prev[0]) > 1e-12:
            # secant predictor for the period; profile predicted linearly
            slope = (orb.period - prev[1].period) / (tau - prev[0])
            t_guess = orb.period + slope * h
            frac = h / (tau - prev[0])
            vals = orb.values + frac * (orb.values - prev[1].values)
            pred = Orbit(mesh=orb.mesh, values=vals, period=t_guess,
                         base_delay=tau_next)
            guess, t0 = pred.eval, t_guess
        else:
            guess, t0 = orb.eval, orb.period
        try:
            nxt = solve_orbit(model_factory(tau_next), guess, t0, m, degree)
        except (NoConvergenceError, DegenerateOrbitError):
            h *= 0.5
            if h < 1e-5:
                break
            continue
        d_t = (nxt.period - orb.period) / h
        points.append(BranchPoint(tau_base=tau_next, orbit=nxt, dT_dtau=d_t))
        prev = (tau, orb)
        tau, orb = tau_next, nxt
        h = min(abs(step), 1.5 * h)
    if points:
        points[0].dT_dtau = points[1].dT_dtau if len(points) > 1 else 0.0
    return points


def _ramp(start, stop, steps=6):
    if abs(stop - start) < 1e-14:
        return []
    return list(np.linspace(start, stop, steps + 1)[1:])


@dataclass
class LinearizedOrbit:
    """Linearization along the orbit in orbit-rescaled time.

    The profile repeats for every original-time delay base_delay + N T, so
    the fractional delay tau_frac is independent of N."""

    cp: CoefficientPair
    period: float
    base_delay: float
    tau_frac: float
    n_offset: int

    def scaled_delay(self, n):
        """Integer delay count in rescaled time for original count n."""
        return n + self.n_offset


def derivative_interpolant(orbit, samples=256):
    """Vectorized 1-periodic trigonometric interpolant of dx/ds.

    The orbit derivative spans the neutral Floquet direction of any
    linearization along the orbit; simulation growth fits project it out."""
    grid = np.arange(samples) / samples
    vals = np.array([orbit.deriv(s) for s in grid])
    coef = np.fft.rfft(vals, axis=0) / samples

    def interp(ts):
        ts = np.asarray(ts, dtype=float)
        k = np.arange(coef.shape[0])
        ph = np.exp(2j * np.pi * np.outer(ts, k))
        fac = np.full(coef.shape[0], 2.0)
        fac[0] = 1.0
        if samples % 2 == 0:
            fac[-1] = 1.0
        return np.real(ph @ (fac[:, None] * coef))

    return interp


def linearize(orbit, model, samples=128):
    """Periodic coefficient pair A = T d1f, B = T d2f along the orbit."""
    t_per = orbit.period
    tau_s = orbit.base_delay / t_per
    grid = np.arange(samples) / samples
    a_s = np.empty((samples, model.n, model.n))
    b_s = np.empty((samples, model.n, model.n))
    for i, s in enumerate(grid):
        xc = orbit.eval(s)
        xd = orbit.eval(s - tau_s)
        a_s[i] = t_per * model.d1f(xc, xd)
        b_s[i] = t_per * model.d2f(xc, xd)
    cp = CoefficientPair(sample_provider(a_s), sample_provider(b_s))
    return LinearizedOrbit(cp=cp, period=t_per, base_delay=orbit.base_delay,
                           tau_frac=tau_s % 1.0, n_offset=int(np.floor(tau_s)))
