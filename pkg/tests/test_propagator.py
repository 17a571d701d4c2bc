import numpy as np
import pytest

from ddefloquet.errors import DomainError
from ddefloquet.model import CoefficientPair, ConstantProvider, FourierProvider, constant_pair
from ddefloquet.propagator import build_cache, monodromy, propagate


def test_scalar_exponential():
    cache = build_cache(constant_pair([[-1.0]], [[0.0]]), k=4)
    assert abs(monodromy(cache)[0, 0] - np.exp(-1.0)) < 1e-12
    u = propagate(cache, -0.2, -0.7, 2.0)
    assert abs(u[0, 0] - np.exp((-1.0 - 2.0) * 0.5)) < 1e-12


def test_rotation_full_turn():
    w = 2 * np.pi
    cp = constant_pair([[0.0, -w], [w, 0.0]], np.zeros((2, 2)))
    cache = build_cache(cp, k=6)
    assert np.allclose(monodromy(cache), np.eye(2), atol=1e-10)
    u = cache.u_bare(-0.75, -1.0)
    c, s = np.cos(w * 0.25), np.sin(w * 0.25)
    assert np.allclose(u, [[c, -s], [s, c]], atol=1e-10)


def test_liouville_determinant():
    a = FourierProvider([[0.1, 0.3], [-0.2, -0.4]],
                        cos_coeffs=[[[0.5, 0.0], [0.1, -0.3]]],
                        sin_coeffs=[[[0.0, 0.2], [0.4, 0.6]]])
    cp = CoefficientPair(a, ConstantProvider(np.zeros((2, 2))))
    cache = build_cache(cp, k=8)
    # trace integral over one period keeps only the constant Fourier term
    exact = np.exp(0.1 - 0.4)
    assert abs(np.linalg.det(monodromy(cache)) - exact) < 1e-8


def test_cocycle_property():
    a = FourierProvider([[0.2]], cos_coeffs=[[[0.6]]])
    cp = CoefficientPair(a, ConstantProvider([[0.0]]))
    cache = build_cache(cp, k=5)
    t, r, s = -0.1, -0.45, -0.9
    lhs = cache.u_bare(t, s)
    rhs = cache.u_bare(t, r) @ cache.u_bare(r, s)
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_mu_shift_is_exact():
    cp = constant_pair([[0.3, 0.1], [0.0, -0.2]], np.zeros((2, 2)))
    cache = build_cache(cp, k=4)
    mu = 0.7 - 1.3j
    t, s = -0.15, -0.85
    assert np.allclose(propagate(cache, t, s, mu),
                       np.exp(-mu * (t - s)) * cache.u_bare(t, s), atol=1e-13)


def test_norm_estimate():
    cp = constant_pair([[0.5, -0.3], [0.2, 0.4]], np.zeros((2, 2)))
    cache = build_cache(cp, k=4)
    na = cp.norm_a()
    rng = np.random.default_rng(3)
    for _ in range(20):
        s = rng.uniform(-1, 0)
        t = rng.uniform(s, 0)
        mu = complex(rng.uniform(-2, 2), rng.uniform(-5, 5))
        nrm = np.abs(propagate(cache, t, s, mu)).sum(axis=1).max()
        assert nrm <= np.exp((na - mu.real) * (t - s)) * (1 + 1e-6)


def test_propagate_rejects_reversed_times():
    cache = build_cache(constant_pair([[0.0]], [[0.0]]), k=3)
    with pytest.raises(DomainError):
        propagate(cache, -0.8, -0.2, 0.0)
