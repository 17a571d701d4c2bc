"""Method-of-steps time integration for DDEs with one large delay.

Fixed-step RK4 on a uniform grid chosen so the delay is an exact integer
multiple of the step; full-step delayed reads then land on stored grid
points and only the half-step stage values need interpolation (4-point
cubic).  Growth rates are estimated by regressing log window norms over
trailing windows of one delay length, which averages over the beating of
the exponent bands."""

from dataclasses import dataclass

import numpy as np
from scipy.signal import hilbert

STEP_FACTOR_LINEAR = 64
STEP_FACTOR_NONLINEAR = 128
OVERFLOW_NORM = 1e120
UNRELIABLE_RESIDUAL = 0.1
DEFAULT_WINDOWS = 30

# weights of the cubic interpolant at the midpoint of the middle interval,
# and the one-sided variant for the first interval of the buffer
_MID_W = np.array([-1.0, 9.0, 9.0, -1.0]) / 16.0
_MID_W0 = np.array([5.0, 15.0, -5.0, 1.0]) / 16.0


@dataclass
class Trajectory:
    """Uniform-grid trajectory including the history segment (times <= 0)."""

    times: np.ndarray
    values: np.ndarray   # (len(times), n)
    dt: float
    delay: float

    def log_norms(self):
        return np.log(np.maximum(np.linalg.norm(self.values, axis=1), 1e-300))


@dataclass
class GrowthEstimate:
    dominant_rate: float
    dominant_frequency: float
    fit_residual: float
    window_count: int

    @property
    def reliable(self):
        return self.fit_residual <= UNRELIABLE_RESIDUAL


def _delay_grid(delay, rate_bound, factor):
    """Step count per delay: dt <= 1/(factor*max(1, rate_bound)) and
    delay = m*dt exactly."""
    m = int(np.ceil(delay * factor * max(1.0, rate_bound)))
    return m, delay / m


def _history(fun, delay, m, dt, n):
    buf = np.empty((m + 1, n))
    for i in range(m + 1):
        buf[i] = np.asarray(fun(-delay + i * dt), dtype=float)
    return buf


def _mid_read(buf, i):
    """Cubic midpoint value between samples i and i+1."""
    if i == 0:
        return _MID_W0 @ buf[:4]
    return _MID_W @ buf[i - 1:i + 3]


def integrate_linear(cp, tau, n_delay, x0, horizon, deflate=None,
                     windows=DEFAULT_WINDOWS, step_factor=STEP_FACTOR_LINEAR):
    """Integrate xdot = A(t)x + B(t)x(t - N - tau) from the history x0.

    x0 is a callable on [-(N+tau), 0]; returns (Trajectory, GrowthEstimate)."""
    theta = n_delay + tau
    n = cp.n
    m, dt = _delay_grid(theta, cp.norm_a(), step_factor)
    steps = int(np.ceil(horizon / dt))
    total = m + 1 + steps
    buf = np.empty((total, n))
    buf[:m + 1] = _history(x0, theta, m, dt, n)
    times = (np.arange(total) - m) * dt

    # coefficients are 1-periodic; precompute on the grid and midpoints
    tg = times[m:]
    a_g = cp.a(tg)
    b_g = cp.b(tg)
    a_h = cp.a(tg[:-1] + 0.5 * dt)
    b_h = cp.b(tg[:-1] + 0.5 * dt)

    last = m + steps
    for j in range(steps):
        i = m + j
        y = buf[i]
        yd0 = buf[i - m]
        ydh = _mid_read(buf, i - m)
        yd1 = buf[i - m + 1]
        k1 = a_g[j] @ y + b_g[j] @ yd0
        k2 = a_h[j] @ (y + 0.5 * dt * k1) + b_h[j] @ ydh
        k3 = a_h[j] @ (y + 0.5 * dt * k2) + b_h[j] @ ydh
        k4 = a_g[j + 1] @ (y + dt * k3) + b_g[j + 1] @ yd1
        buf[i + 1] = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.abs(buf[i + 1]).max() > OVERFLOW_NORM:
            last = i + 1
            break

    traj = Trajectory(times=times[:last + 1], values=buf[:last + 1],
                      dt=dt, delay=theta)
    return traj, growth_estimate(traj, deflate=deflate, windows=windows)


def growth_estimate(traj, deflate=None, windows=DEFAULT_WINDOWS):
    """Rate and frequency from trailing whole-delay windows.

    deflate, if given, maps an array of times to known neutral directions
    that are projected out sample by sample before taking norms."""
    m = int(round(traj.delay / traj.dt))
    post = len(traj.times) - (m + 1)
    count = min(windows, post // m)
    if count < 2:
        return GrowthEstimate(dominant_rate=0.0, dominant_frequency=0.0,
                              fit_residual=np.inf, window_count=0)
    seg = traj.values[-count * m:]
    ts = traj.times[-count * m:]
    if deflate is not None:
        v = np.asarray(deflate(ts), dtype=float)
        coef = np.einsum("ia,ia->i", seg, v) / np.einsum("ia,ia->i", v, v)
        seg = seg - coef[:, None] * v
    norms = np.linalg.norm(seg.reshape(count, m, -1), axis=2)
    w_rms = np.sqrt(np.mean(norms**2, axis=1))
    w_mid = ts.reshape(count, m).mean(axis=1)
    logs = np.log(np.maximum(w_rms, 1e-300))
    slope, icept = np.polyfit(w_mid, logs, 1)
    resid = float(np.std(logs - (slope * w_mid + icept)))
    # frequency: phase regression of the analytic signal of one projection
    proj = seg[:, 0] * np.exp(-slope * (ts - ts[0]))
    phase = np.unwrap(np.angle(hilbert(proj)))
    freq = abs(np.polyfit(ts, phase, 1)[0])
    return GrowthEstimate(dominant_rate=float(slope), dominant_frequency=float(freq),
                          fit_residual=resid, window_count=count)


def distance_growth(ts, dist, delay, windows=DEFAULT_WINDOWS):
    """Rate estimate from a positive scalar series (e.g. orbit distances),
    averaged over trailing whole-delay windows like growth_estimate."""
    ts = np.asarray(ts, dtype=float)
    dist = np.asarray(dist, dtype=float)
    count = min(windows, int((ts[-1] - ts[0]) / delay))
    if count < 2:
        return GrowthEstimate(dominant_rate=0.0, dominant_frequency=0.0,
                              fit_residual=np.inf, window_count=0)
    t0 = ts[-1] - count * delay
    sel = ts >= t0 - 1e-12
    idx = np.minimum(((ts[sel] - t0) / delay).astype(int), count - 1)
    w_mid, w_log = [], []
    for w in range(count):
        msk = idx == w
        if msk.any():
            w_mid.append(float(ts[sel][msk].mean()))
            rms = np.sqrt(np.mean(dist[sel][msk] ** 2))
            w_log.append(np.log(max(rms, 1e-300)))
    w_mid, w_log = np.array(w_mid), np.array(w_log)
    slope, icept = np.polyfit(w_mid, w_log, 1)
    resid = float(np.std(w_log - (slope * w_mid + icept)))
    return GrowthEstimate(dominant_rate=float(slope), dominant_frequency=0.0,
                          fit_residual=resid, window_count=len(w_mid))


def _nonlinear_rate_bound(model, orbit, probes=64):
    g = np.arange(probes) / probes
    worst = 0.0
    for s in g:
        xc = orbit.eval(s)
        xd = orbit.eval(s - 0.5)  # arbitrary probe for the delayed slot
        j = np.abs(model.d1f(xc, xd)).sum(axis=1).max() \
            + np.abs(model.d2f(xc, xd)).sum(axis=1).max()
        worst = max(worst, j)
    return worst


def integrate_nonlinear(model, orbit, n_periods, x0, horizon,
                        samples_per_period=16):
    """Integrate xdot = f(x, x(t - N T - base_delay)) in original time.

    x0 is a callable on [-delay, 0]; the second return value is the series
    (times, distances) of phase-aligned distances to the reference orbit."""
    t_per = orbit.period
    theta = n_periods * t_per + model.base_delay
    n = model.n
    m, dt = _delay_grid(theta, _nonlinear_rate_bound(model, orbit),
                        STEP_FACTOR_NONLINEAR)
    steps = int(np.ceil(horizon / dt))
    total = m + 1 + steps
    buf = np.empty((total, n))
    buf[:m + 1] = _history(x0, theta, m, dt, n)
    times = (np.arange(total) - m) * dt

    last = m + steps
    for j in range(steps):
        i = m + j
        y = buf[i]
        ydh = _mid_read(buf, i - m)
        k1 = model.f(y, buf[i - m])
        k2 = model.f(y + 0.5 * dt * k1, ydh)
        k3 = model.f(y + 0.5 * dt * k2, ydh)
        k4 = model.f(y + dt * k3, buf[i - m + 1])
        buf[i + 1] = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.abs(buf[i + 1]).max() > OVERFLOW_NORM:
            last = i + 1
            break

    traj = Trajectory(times=times[:last + 1], values=buf[:last + 1],
                      dt=dt, delay=theta)
    stride = max(1, int(round(t_per / samples_per_period / dt)))
    sel = np.arange(m, last + 1, stride)
    dist = np.array([orbit_distance(orbit, buf[i]) for i in sel])
    return traj, (times[sel], dist)


def orbit_distance(orbit, point, grid=1024, _cache={}):
    """Distance from a state to the orbit curve (phase-aligned).

    Coarse search over a cached profile grid, then parabolic refinement of
    the squared distance in the orbit parameter."""
    key = id(orbit)
    if key not in _cache or _cache[key][0] is not orbit:
        s = np.arange(grid) / grid
        prof = np.array([orbit.eval(v) for v in s])
        _cache.clear()
        _cache[key] = (orbit, prof)
    prof = _cache[key][1]
    d2 = np.sum((prof - point)**2, axis=1)
    i = int(np.argmin(d2))
    dm, d0, dp = d2[i - 1], d2[i], d2[(i + 1) % grid]
    denom = dm - 2 * d0 + dp
    best = np.sqrt(d0)
    s = i / grid
    if denom > 0:
        s = (i + 0.5 * (dm - dp) / denom) / grid
    # Newton on the normal condition <x(s) - p, x'(s)> = 0
    for _ in range(3):
        x = orbit.eval(s)
        xd = orbit.deriv(s)
        g = np.dot(x - point, xd)
        s -= g / np.dot(xd, xd)
        best = min(best, np.linalg.norm(x - point))
    best = min(best, np.linalg.norm(orbit.eval(s) - point))
    return float(best)
