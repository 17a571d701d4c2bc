"""Floquet exponents at finite delay N + tau.

Exponents are the roots of h_N(mu) = h(mu, exp(-(N+tau) mu)) in the strip
Re mu >= -R/(N+tau); they are invariant under mu -> mu + 2 pi i, so all
work happens in the fundamental strip Im mu in [-pi, pi].  Seeds come from
four sources: fixed points of the band prediction omega = (phi(omega) +
2 pi k)/(N+tau) along the asymptotic continuous spectrum, the strongly
unstable instantaneous exponents, the trivial exponent 0, and local minima
of |h_N| on a coarse rectangular scan.  A boundary-integral argument count
audits completeness on request.
"""

from dataclasses import dataclass, field

import numpy as np

from .charfun import char_log_derivatives, char_value_N
from .errors import AuditInconclusiveError, NoConvergenceError
from .spectra import strongly_unstable

MAX_NEWTON = 30
NEWTON_TOL = 1e-12
SCAN_GRID = 32
AUDIT_MAX_SAMPLES = 100_000
AUDIT_PHASE_STEP = np.pi / 4


@dataclass
class FloquetExponent:
    mu: complex
    multiplicity: int
    source: str       # band | strong | trivial | scan
    residual: float   # sigma_min / sigma_max of the characteristic matrix


@dataclass
class FloquetSet:
    n_delay: int
    theta: float
    exponents: list = field(default_factory=list)
    audit_winding: int = None
    audit_matched: bool = None

    def mus(self):
        return np.array([e.mu for e in self.exponents])

    def total_count(self):
        return sum(e.multiplicity for e in self.exponents)

    def max_real(self):
        if not self.exponents:
            return -np.inf
        return max(np.real(e.mu) for e in self.exponents)


def dedup_radius(theta):
    """Exponent spacing along a band scales like 2 pi / theta."""
    return 1e-3 * 2 * np.pi / theta


def predict_bands(acs_result, n_delay, tau):
    """Asymptotic exponent predictions mu ~ gamma/theta + i omega_k, where
    omega_k solves the phase condition omega = (phi(omega) + 2 pi k)/theta."""
    theta = n_delay + tau
    preds = []
    for br in acs_result.branches:
        w, g, p = br.arrays()
        if w.size < 2:
            continue
        order = np.argsort(w)
        w, g, p = w[order], g[order], p[order]
        k_lo = int(np.ceil((theta * w[0] - p.max()) / (2 * np.pi)))
        k_hi = int(np.floor((theta * w[-1] - p.min()) / (2 * np.pi)))
        for k in range(k_lo, k_hi + 1):
            om = 0.5 * (w[0] + w[-1])
            ok = False
            for _ in range(100):
                om_new = (np.interp(om, w, p) + 2 * np.pi * k) / theta
                om_new = min(max(om_new, w[0]), w[-1])
                if abs(om_new - om) < 1e-13:
                    ok = True
                    om = om_new
                    break
                om = om_new
            if not ok or om <= w[0] + 1e-12 or om >= w[-1] - 1e-12:
                continue  # clamped fixed point left the branch window
            preds.append((np.interp(om, w, g) / theta + 1j * om, br.branch_id))
    return preds


def newton_exponent(ctx, n_delay, mu0, max_iter=MAX_NEWTON, tol=NEWTON_TOL):
    """Newton iteration on h_N from the seed mu0, in log-derivative form."""
    theta = n_delay + ctx.tau
    floor_re = -ctx.r / theta
    mu = complex(mu0)
    for _ in range(max_iter):
        if np.real(mu) < floor_re:
            mu = complex(floor_re, np.imag(mu))
        z = np.exp(-theta * mu)
        _, ld1, ld2 = char_log_derivatives(ctx, mu, z)
        logder = ld1 - theta * z * ld2
        if not np.isfinite(logder) or logder == 0:
            # the trace formula blows up on an exactly singular matrix,
            # which means the iterate already sits on a root
            if char_value_N(ctx, n_delay, mu).sigma_min_ratio < 1e-12:
                return mu
            raise NoConvergenceError(f"degenerate Newton step at mu={mu}")
        step = -1.0 / logder
        cap = 2 * np.pi / theta
        if abs(step) > cap:
            step *= cap / abs(step)
        mu = mu + step
        if abs(step) < tol:
            if np.real(mu) < floor_re - 1e-12:
                raise NoConvergenceError(f"root left the strip at mu={mu}")
            return mu
    raise NoConvergenceError(f"Newton stalled near mu={mu}", residual=abs(step))


def _circle_count(ctx, n_delay, center, radius, samples=24):
    args = np.array([char_value_N(ctx, n_delay,
                                  center + radius * np.exp(2j * np.pi * t)).arg_h
                     for t in np.linspace(0.0, 1.0, samples, endpoint=False)])
    d = np.diff(np.concatenate([args, args[:1]]))
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return int(np.round(d.sum() / (2 * np.pi)))


def refine_exponents(ctx, n_delay, seeds, sources=None, multiplicity_check=True):
    """Polish seeds on h_N, fold into the fundamental strip, deduplicate."""
    theta = n_delay + ctx.tau
    rad = dedup_radius(theta)
    if sources is None:
        sources = ["scan"] * len(seeds)
    found = []
    for mu0, src in zip(seeds, sources):
        mu0 = complex(mu0)
        mu0 = complex(np.real(mu0), (np.imag(mu0) + np.pi) % (2 * np.pi) - np.pi)
        try:
            mu = newton_exponent(ctx, n_delay, mu0)
        except NoConvergenceError:
            continue
        mu = complex(np.real(mu), (np.imag(mu) + np.pi) % (2 * np.pi) - np.pi)
        dup = False
        for e in found:
            dim = abs(np.imag(mu) - np.imag(e.mu))
            dim = min(dim, 2 * np.pi - dim)
            if np.hypot(np.real(mu) - np.real(e.mu), dim) < rad:
                dup = True
                break
        if dup:
            continue
        cv = char_value_N(ctx, n_delay, mu)
        mult = 1
        if multiplicity_check:
            # a multiple root makes |h_N'| small relative to the local scale
            z = np.exp(-theta * mu)
            _, ld1, ld2 = char_log_derivatives(ctx, mu, z)
            hprime = cv.h_hat * (ld1 - theta * z * ld2)
            scale = abs(char_value_N(ctx, n_delay, mu + rad).h_hat) / rad
            if scale > 0 and abs(hprime) < 1e-4 * scale:
                mult = max(1, _circle_count(ctx, n_delay, mu, 0.5 * rad))
        found.append(FloquetExponent(mu=mu, multiplicity=mult, source=src,
                                     residual=cv.sigma_min_ratio))
    found.sort(key=lambda e: -np.real(e.mu))
    return FloquetSet(n_delay=n_delay, theta=theta, exponents=found)


def scan_seeds(ctx, n_delay, re_hi=None, grid=SCAN_GRID):
    """Local minima of |h_N| on a coarse grid over the fundamental strip."""
    theta = n_delay + ctx.tau
    re_lo = -ctx.r / theta
    if re_hi is None:
        re_hi = ctx.norm_a + 0.5
    res = np.linspace(re_lo, re_hi, grid)
    ims = np.linspace(-np.pi, np.pi, grid, endpoint=False)
    vals = np.empty((grid, grid))
    for i, re in enumerate(res):
        for j, im in enumerate(ims):
            vals[i, j] = char_value_N(ctx, n_delay, complex(re, im)).log_abs_h
    seeds = []
    for i in range(grid):
        for j in range(grid):
            v = vals[i, j]
            neigh = [vals[i2, (j + dj) % grid]
                     for i2, dj in ((i - 1, 0), (i + 1, 0), (i, -1), (i, 1))
                     if 0 <= i2 < grid]
            if all(v <= nv for nv in neigh):
                seeds.append(complex(res[i], ims[j]))
    return seeds


def strong_exponents(ctx, n_delay):
    """Exponents converging to the strongly unstable instantaneous spectrum."""
    seeds = strongly_unstable(ctx)
    fs = refine_exponents(ctx, n_delay, seeds, sources=["strong"] * len(seeds))
    return fs


def audit_rectangle(ctx, n_delay, re_lo, re_hi, im_lo, im_hi,
                    max_samples=AUDIT_MAX_SAMPLES, nudge=None, attempts=3):
    """Winding number of h_N along the rectangle boundary.

    Edges are sampled adaptively until consecutive phase increments stay
    below pi/4; a near-zero boundary sample nudges the rectangle outward."""
    theta = n_delay + ctx.tau
    if nudge is None:
        nudge = 0.1 * dedup_radius(theta)
    floor_re = -ctx.r / theta
    for attempt in range(attempts):
        d = attempt * nudge
        lo, hi = max(re_lo - d, floor_re), re_hi + d
        # imaginary bounds shift instead of expanding: exponents repeat with
        # period 2 pi i, so widening a full-strip audit would double-count
        bottom, top = im_lo + d, im_hi + d
        corners = [complex(lo, bottom), complex(hi, bottom),
                   complex(hi, top), complex(lo, top), complex(lo, bottom)]
        try:
            total = 0.0
            budget = [max_samples]
            for a, b in zip(corners[:-1], corners[1:]):
                total += _edge_winding(ctx, n_delay, a, b, budget)
            return int(np.round(total / (2 * np.pi)))
        except _BoundaryRoot:
            continue
    raise AuditInconclusiveError(
        f"root pinned to the audit boundary after {attempts} nudges")


class _BoundaryRoot(Exception):
    pass


def _edge_winding(ctx, n_delay, a, b, budget):
    """Phase change of h_N along the segment a -> b.

    The phase can rotate much faster than the 2 pi/theta root spacing (the
    determinant carries a fast entire prefactor near |z| = e^R), so each
    sample also records the local phase rate |d log h_N / d mu| and an
    interval is accepted only once rate * length is small as well."""
    theta = n_delay + ctx.tau
    seg = b - a

    def probe(t):
        budget[0] -= 1
        if budget[0] <= 0:
            raise AuditInconclusiveError("audit sample budget exhausted")
        mu = a + t * seg
        z = np.exp(-theta * mu)
        cv, ld1, ld2 = char_log_derivatives(ctx, mu, z)
        if cv.log_abs_h < -200.0:
            raise _BoundaryRoot
        return cv.arg_h, abs(ld1 - theta * z * ld2)

    ts = np.linspace(0.0, 1.0, 17)
    samples = {t: probe(t) for t in ts}
    stack = list(zip(ts[:-1], ts[1:]))
    total = 0.0
    while stack:
        t0, t1 = stack.pop()
        (p0, r0), (p1, r1) = samples[t0], samples[t1]
        d = (p1 - p0 + np.pi) % (2 * np.pi) - np.pi
        if abs(d) <= AUDIT_PHASE_STEP and max(r0, r1) * abs(seg) * (t1 - t0) <= 2 * AUDIT_PHASE_STEP:
            total += d
            continue
        tm = 0.5 * (t0 + t1)
        samples[tm] = probe(tm)
        stack.append((t0, tm))
        stack.append((tm, t1))
    return total


def compute_floquet(ctx, acs_result, n_delay, scan=True, audit=False,
                    scan_grid=SCAN_GRID):
    """Full exponent pipeline: seed, refine, deduplicate, optionally audit."""
    theta = n_delay + ctx.tau
    seeds, sources = [], []
    for mu, _ in predict_bands(acs_result, n_delay, ctx.tau):
        seeds.append(mu)
        sources.append("band")
    for mu in strongly_unstable(ctx):
        seeds.append(mu)
        sources.append("strong")
    seeds.append(0.0 + 0.0j)
    sources.append("trivial")
    if scan:
        for mu in scan_seeds(ctx, n_delay, grid=scan_grid):
            seeds.append(mu)
            sources.append("scan")
    fs = refine_exponents(ctx, n_delay, seeds, sources)
    if audit:
        lo = -ctx.r / theta
        hi = max(fs.max_real() + 10 * dedup_radius(theta), 0.1)
        fs.audit_winding = audit_rectangle(ctx, n_delay, lo, hi, -np.pi, np.pi)
        # the audit strip is a full 2 pi tall, so every exponent class in the
        # real range is counted exactly once whatever the vertical shift
        inside = [e for e in fs.exponents if lo < np.real(e.mu) < hi]
        fs.audit_matched = fs.audit_winding == sum(e.multiplicity for e in inside)
    return fs
