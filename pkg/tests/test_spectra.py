import numpy as np
import pytest

from ddefloquet import charfun as cf
from ddefloquet import spectra as sp
from ddefloquet.errors import PreconditionError
from ddefloquet.model import constant_pair

A, B, TAU = -1.0, 0.5, 0.3


@pytest.fixture(scope="module")
def ctx():
    return cf.CharContext(constant_pair([[A]], [[B]]), TAU, 3.0, k=16)


def exact_etas(omega, r=3.0, kmax=8):
    ks = np.arange(-kmax, kmax + 1)
    eta = B * np.exp(-2j * np.pi * ks * TAU) / (1j * (omega + 2 * np.pi * ks) - A)
    return eta[np.abs(eta) >= np.exp(-r)]


def test_instantaneous_spectrum_scalar(ctx):
    mu = sp.instantaneous_spectrum(ctx)
    assert mu.shape == (1,)
    assert abs(mu[0] - A) < 1e-10


def test_instantaneous_spectrum_principal_strip():
    w = 2 * np.pi * 0.75
    cp = constant_pair([[0.2, -w], [w, 0.2]], np.zeros((2, 2)))
    c = cf.CharContext(cp, 0.0, 2.0, k=8)
    mu = sp.instantaneous_spectrum(c)
    assert mu.shape == (2,)
    assert np.all(np.imag(mu) >= -np.pi) and np.all(np.imag(mu) < np.pi)
    assert np.allclose(np.real(mu), 0.2, atol=1e-9)


def test_strongly_unstable_split():
    cp = constant_pair(np.diag([0.3, -1.0]), np.diag([0.1, 0.2]))
    c = cf.CharContext(cp, TAU, 3.0, k=16)
    plus = sp.strongly_unstable(c)
    assert plus.shape == (1,)
    assert abs(plus[0] - 0.3) < 1e-10


def test_acs_eigen_matches_closed_form(ctx):
    for omega in (0.0, 0.7, 2.0, -1.3):
        eta, _ = sp.acs_eigen(ctx, omega, m_grid=256)
        exact = exact_etas(omega)
        assert eta.size == exact.size
        err = max(min(abs(e - x) for x in exact) for e in eta)
        assert err < 1e-5


def test_acs_eigen_second_order_in_grid(ctx):
    errs = []
    for m in (64, 256):
        eta, _ = sp.acs_eigen(ctx, 0.7, m_grid=m)
        exact = exact_etas(0.7)
        errs.append(max(min(abs(e - x) for x in exact) for e in eta))
    assert errs[1] < errs[0] / 8.0


def test_acs_operator_rejects_axis_multiplier():
    # zero matrix A has monodromy I, multiplier 1 sits at exp(i*0)
    cp = constant_pair([[0.0]], [[0.5]])
    c = cf.CharContext(cp, TAU, 2.0, k=8)
    with pytest.raises(PreconditionError):
        sp.acs_operator(c, 0.0, m_grid=32)


def test_trace_polish_hits_closed_form(ctx):
    grid = np.linspace(-1.0, 1.0, 21)
    res = sp.trace_acs(ctx, grid, m_grid=128)
    top = max(res.branches, key=lambda b: max(b.gammas))
    w, g, p = top.arrays()
    assert w.size == grid.size
    exact = np.log(B) - 0.5 * np.log(w**2 + A * A)
    assert np.abs(g - exact).max() < 1e-10
    # polished points are true roots of the characteristic function
    resid = [r for br in res.branches for r in br.residuals if np.isfinite(r)]
    assert max(resid) < 1e-10


def test_trace_mirror_symmetry(ctx):
    grid = np.linspace(-1.5, 1.5, 31)
    res = sp.trace_acs(ctx, grid, m_grid=128)
    for br in res.branches:
        w, g, _ = br.arrays()
        for wi, gi in zip(w, g):
            j = np.argmin(np.abs(w + wi))
            if abs(w[j] + wi) < 1e-9:
                # gamma of some branch at -omega matches gamma at omega
                gm = min(abs(other.gammas[np.argmin(np.abs(other.arrays()[0] + wi))] - gi)
                         for other in res.branches
                         if np.abs(other.arrays()[0] + wi).min() < 1e-9)
                assert gm < 1e-8


def test_sup_gamma_and_stability_sign(ctx):
    grid = np.linspace(-2.0, 2.0, 41)
    res = sp.trace_acs(ctx, grid, m_grid=128)
    # stable configuration: whole ACS strictly below the axis
    assert res.sup_gamma() < -1e-3
    # unstable configuration: b > |a| pushes the top band above the axis
    cu = cf.CharContext(constant_pair([[-1.0]], [[1.5]]), TAU, 3.0, k=16)
    res_u = sp.trace_acs(cu, grid, m_grid=128)
    assert res_u.sup_gamma() > 1e-3


def test_branch_phi_is_continuous(ctx):
    grid = np.linspace(-2.0, 2.0, 81)
    res = sp.trace_acs(ctx, grid, m_grid=128)
    for br in res.branches:
        _, _, p = br.arrays()
        if p.size > 1:
            assert np.abs(np.diff(p)).max() < 1.0
