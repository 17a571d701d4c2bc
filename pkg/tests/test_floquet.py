import numpy as np
import pytest

from ddefloquet import charfun as cf
from ddefloquet import floquet as fl
from ddefloquet import spectra as sp
from ddefloquet.model import constant_pair

A, B, TAU = -1.0, 0.5, 0.3


def scalar_truth(n_delay, r=3.0):
    """All Floquet exponents of xdot = a x + b x(t - N - tau) in the strip,
    folded into Im mu in [-pi, pi), found directly from the scalar equation."""
    theta = n_delay + TAU
    roots = []
    for k in range(-3 * n_delay, 3 * n_delay + 1):
        c = B * np.exp(-2j * np.pi * k * TAU)
        for im0 in np.linspace(-np.pi, np.pi, 120):
            mu = complex(0.0, im0)
            step = np.inf
            for _ in range(80):
                with np.errstate(over="ignore"):
                    ez = np.exp(-theta * mu)
                if not np.isfinite(ez):
                    break
                f = mu - A + 2j * np.pi * k - c * ez
                fp = 1 + theta * c * ez
                step = -f / fp
                mu += step
                if abs(step) < 1e-14:
                    break
            if abs(step) < 1e-13 and mu.real >= -r / theta - 1e-9:
                mu = complex(mu.real, (mu.imag + np.pi) % (2 * np.pi) - np.pi)
                if all(abs(mu - r0) > 1e-8 for r0 in roots):
                    roots.append(mu)
    return sorted(roots, key=lambda m: -m.real)


@pytest.fixture(scope="module")
def ctx():
    return cf.CharContext(constant_pair([[A]], [[B]]), TAU, 3.0, k=16)


@pytest.fixture(scope="module")
def acs(ctx):
    grid = np.linspace(-np.pi, np.pi, 129)
    return sp.trace_acs(ctx, grid, m_grid=128)


@pytest.fixture(scope="module")
def fs10(ctx, acs):
    return fl.compute_floquet(ctx, acs, 10, scan=True)


def test_all_exponents_found(ctx, fs10):
    truth = scalar_truth(10)
    mus = fs10.mus()
    assert fs10.total_count() == len(truth)
    worst = max(min(abs(m - t) for t in truth) for m in mus)
    assert worst < 1e-9


def test_exponents_conjugate_pairs(fs10):
    mus = fs10.mus()
    for mu in mus:
        if abs(np.imag(mu)) > 1e-10:
            assert min(abs(np.conj(mu) - m) for m in mus) < 1e-9


def test_band_predictions_seed_most_roots(ctx, acs):
    preds = fl.predict_bands(acs, 10, TAU)
    truth = scalar_truth(10)
    theta = 10 + TAU
    hits = sum(1 for mu, _ in preds
               if min(abs(mu - t) for t in truth) < 0.5 * 2 * np.pi / theta)
    assert hits >= 0.8 * len(preds)
    assert len(preds) >= 0.7 * len(truth)


def test_newton_polish_accuracy(ctx):
    truth = scalar_truth(10)
    mu = fl.newton_exponent(ctx, 10, truth[0] + 0.01 + 0.01j)
    assert abs(mu - truth[0]) < 1e-11


def test_residuals_small(fs10):
    assert max(e.residual for e in fs10.exponents) < 1e-10


def test_dedup_no_close_pairs(fs10):
    mus = fs10.mus()
    rad = fl.dedup_radius(fs10.theta)
    for i in range(len(mus)):
        for j in range(i + 1, len(mus)):
            assert abs(mus[i] - mus[j]) > rad


def test_audit_matches_root_count(ctx, fs10):
    theta = fs10.theta
    lo = -3.0 / theta
    w = fl.audit_rectangle(ctx, 10, lo, 0.1, -np.pi, np.pi)
    inside = sum(e.multiplicity for e in fs10.exponents if e.mu.real > lo)
    assert w == inside


def test_audit_subrectangle(ctx):
    # small box around the rightmost root only
    truth = scalar_truth(10)
    mu0 = truth[0]
    w = fl.audit_rectangle(ctx, 10, mu0.real - 0.02, mu0.real + 0.02,
                           mu0.imag - 0.1, mu0.imag + 0.1)
    assert w == 1


def test_strong_exponents_converge_to_instantaneous():
    cp = constant_pair(np.diag([0.3, -1.0]), np.diag([0.1, 0.2]))
    c = cf.CharContext(cp, TAU, 3.0, k=16)
    prev_err = None
    for n in (5, 10, 20):
        fs = fl.strong_exponents(c, n)
        assert fs.exponents, f"no strong root at N={n}"
        err = min(abs(e.mu - 0.3) for e in fs.exponents)
        if prev_err is not None:
            assert err < prev_err
        prev_err = err
    assert prev_err < 1e-2


def test_rightmost_band_approaches_acs_scaling(ctx, acs):
    # distance of the rightmost exponent from the axis shrinks like 1/theta
    r10 = fl.compute_floquet(ctx, acs, 10, scan=False).max_real()
    r20 = fl.compute_floquet(ctx, acs, 20, scan=False).max_real()
    assert r20 > r10
    assert r20 < 0
