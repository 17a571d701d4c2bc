"""Periodic coefficient data and nonlinear right-hand sides.

Coefficient matrices A(t), B(t) live on the interval [-1, 0] and extend
1-periodically to the real line.  Three provider kinds are supported:
constant matrices, truncated Fourier series, and uniform sample grids
with trigonometric interpolation.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

PROBE_GRID_SIZE = 1024
NORM_SAFETY = 1.01


def reduce_time(t):
    """Reduce a time (scalar or array) into [-1, 0) modulo the period 1."""
    return np.mod(t, 1.0) - 1.0


class ConstantProvider:
    """Time-independent matrix."""

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigurationError(f"constant provider needs a square matrix, got shape {m.shape}")
        self.matrix = m
        self.n = m.shape[0]

    def eval(self, t):
        return self.matrix

    def eval_many(self, ts):
        ts = np.asarray(ts, dtype=float)
        return np.broadcast_to(self.matrix, ts.shape + self.matrix.shape).copy()

    def sup_norm(self):
        return float(np.abs(self.matrix).sum(axis=1).max())


class FourierProvider:
    """Truncated Fourier series with real matrix coefficient tables.

    A(t) = c0 + sum_k cos(2 pi k t) * cos_k + sin(2 pi k t) * sin_k
    """

    def __init__(self, c0, cos_coeffs=(), sin_coeffs=()):
        c0 = np.asarray(c0, dtype=float)
        if c0.ndim != 2 or c0.shape[0] != c0.shape[1]:
            raise ConfigurationError(f"fourier provider c0 must be square, got shape {c0.shape}")
        self.c0 = c0
        self.n = c0.shape[0]
        self.cos_coeffs = np.asarray(cos_coeffs, dtype=float).reshape(-1, self.n, self.n)
        self.sin_coeffs = np.asarray(sin_coeffs, dtype=float).reshape(-1, self.n, self.n)
        if self.cos_coeffs.size and self.cos_coeffs.shape[1:] != (self.n, self.n):
            raise ConfigurationError("fourier cosine table shape mismatch")
        if self.sin_coeffs.size and self.sin_coeffs.shape[1:] != (self.n, self.n):
            raise ConfigurationError("fourier sine table shape mismatch")

    def eval(self, t):
        return self.eval_many(np.array([t]))[0]

    def eval_many(self, ts):
        ts = np.asarray(ts, dtype=float)
        out = np.broadcast_to(self.c0, ts.shape + (self.n, self.n)).copy()
        for k in range(len(self.cos_coeffs)):
            out += np.cos(2 * np.pi * (k + 1) * ts)[..., None, None] * self.cos_coeffs[k]
        for k in range(len(self.sin_coeffs)):
            out += np.sin(2 * np.pi * (k + 1) * ts)[..., None, None] * self.sin_coeffs[k]
        return out

    def sup_norm(self):
        grid = np.linspace(-1.0, 0.0, PROBE_GRID_SIZE, endpoint=False)
        vals = self.eval_many(grid)
        return float(np.abs(vals).sum(axis=2).max()) * NORM_SAFETY


def sample_provider(samples):
    """Build a trigonometric interpolant through samples on the uniform grid
    t_i = -1 + i/m, returned as an equivalent FourierProvider."""
    v = np.asarray(samples, dtype=float)
    if v.ndim != 3 or v.shape[1] != v.shape[2]:
        raise ConfigurationError(f"sample provider needs shape (m, n, n), got {v.shape}")
    m = v.shape[0]
    if m < 1:
        raise ConfigurationError("sample provider needs at least one sample")
    coeffs = np.fft.rfft(v, axis=0) / m
    c0 = coeffs[0].real
    cos_coeffs, sin_coeffs = [], []
    for k in range(1, coeffs.shape[0]):
        factor = 1.0 if (m % 2 == 0 and k == m // 2) else 2.0
        cos_coeffs.append(factor * coeffs[k].real)
        sin_coeffs.append(-factor * coeffs[k].imag)
    return FourierProvider(c0, cos_coeffs, sin_coeffs)


class CoefficientPair:
    """Periodic matrix pair (A, B) on [-1, 0] with norm queries."""

    def __init__(self, a_provider, b_provider):
        if a_provider.n != b_provider.n:
            raise ConfigurationError(
                f"A and B dimensions differ: {a_provider.n} vs {b_provider.n}")
        self.a_provider = a_provider
        self.b_provider = b_provider
        self.n = a_provider.n

    def a(self, t):
        return self.a_provider.eval_many(reduce_time(np.asarray(t, dtype=float)))

    def b(self, t):
        return self.b_provider.eval_many(reduce_time(np.asarray(t, dtype=float)))

    def norm_a(self):
        return self.a_provider.sup_norm()

    def norm_b(self):
        return self.b_provider.sup_norm()


def eval_coefficients(cp, t):
    """Evaluate (A(t), B(t)) with t reduced into [-1, 0)."""
    tr = reduce_time(float(t))
    return cp.a_provider.eval_many(np.array([tr]))[0], cp.b_provider.eval_many(np.array([tr]))[0]


def constant_pair(a_matrix, b_matrix):
    return CoefficientPair(ConstantProvider(a_matrix), ConstantProvider(b_matrix))


@dataclass
class DelayParams:
    """Fractional delay tau in [0, 1) and the integer delay counts of interest."""

    tau: float
    n_values: list

    def __post_init__(self):
        if not 0.0 <= self.tau < 1.0:
            raise ConfigurationError(f"tau must lie in [0, 1), got {self.tau}")
        if any(int(n) < 1 or int(n) != n for n in self.n_values):
            raise ConfigurationError("every N must be a positive integer")
        self.n_values = [int(n) for n in self.n_values]

    def theta(self, n):
        """Total delay N + tau."""
        return n + self.tau


@dataclass
class NonlinearModel:
    """Right-hand side f(x, x_delayed) with its partial-derivative maps."""

    f: callable
    d1f: callable
    d2f: callable
    n: int
    base_delay: float
    parameters: dict = field(default_factory=dict)


def builtin_hopf_example(alpha, coupling, tau):
    """Planar Hopf normal form with a delayed linear term in the second component.

        xdot = alpha*x - 2*pi*y - x*(x^2 + y^2)
        ydot = 2*pi*x + alpha*y - y*(x^2 + y^2) + coupling * y(t - tau)
    """
    c = float(coupling)

    def f(u, ud):
        x, y = u
        r2 = x * x + y * y
        return np.array([
            alpha * x - 2 * np.pi * y - x * r2,
            2 * np.pi * x + alpha * y - y * r2 + c * ud[1],
        ])

    def d1f(u, ud):
        x, y = u
        return np.array([
            [alpha - 3 * x * x - y * y, -2 * np.pi - 2 * x * y],
            [2 * np.pi - 2 * x * y, alpha - x * x - 3 * y * y],
        ])

    def d2f(u, ud):
        return np.array([[0.0, 0.0], [0.0, c]])

    return NonlinearModel(f=f, d1f=d1f, d2f=d2f, n=2, base_delay=float(tau),
                          parameters={"alpha": float(alpha), "coupling": c})


def check_derivatives(model, rng, points=20, tol=1e-6, scale=1e-6):
    """Central finite-difference consistency check of d1f/d2f at random points.

    Returns the worst relative deviation found."""
    worst = 0.0
    for _ in range(points):
        u = rng.normal(size=model.n)
        ud = rng.normal(size=model.n)
        j1 = model.d1f(u, ud)
        j2 = model.d2f(u, ud)
        fd1 = np.empty_like(j1)
        fd2 = np.empty_like(j2)
        for i in range(model.n):
            e = np.zeros(model.n)
            e[i] = scale
            fd1[:, i] = (model.f(u + e, ud) - model.f(u - e, ud)) / (2 * scale)
            fd2[:, i] = (model.f(u, ud + e) - model.f(u, ud - e)) / (2 * scale)
        ref = max(np.abs(j1).max(), np.abs(j2).max(), 1.0)
        worst = max(worst,
                    np.abs(fd1 - j1).max() / ref,
                    np.abs(fd2 - j2).max() / ref)
    if worst > tol:
        raise ConfigurationError(
            f"derivative maps disagree with finite differences: {worst:.3e} > {tol:.1e}")
    return worst
