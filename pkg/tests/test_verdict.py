import numpy as np
import pytest

from ddefloquet import charfun as cf
from ddefloquet import spectra as sp
from ddefloquet import verdict as vd
from ddefloquet.model import constant_pair

TAU = 0.3
GRID = np.linspace(-np.pi, np.pi, 65)


def run(a, b, r=3.0):
    ctx = cf.CharContext(constant_pair([[a]], [[b]]), TAU, r, k=16)
    acs = sp.trace_acs(ctx, GRID, m_grid=128)
    return ctx, acs


def test_stable_configuration():
    ctx, acs = run(-1.0, 0.5)
    v = vd.decide(ctx, acs, n_values=[10])
    assert v.status == "stable"
    assert v.exit_code == 0
    assert v.max_re_instantaneous < -1e-6
    assert v.sup_gamma < -1e-6
    assert not v.flags


def test_unstable_by_continuous_spectrum():
    # |b| > |a| lifts the top band above the axis while a stays negative
    ctx, acs = run(-1.0, 1.5)
    v = vd.decide(ctx, acs)
    assert v.status == "unstable"
    assert v.exit_code == 2
    assert v.sup_gamma > 1e-6
    assert v.max_re_instantaneous < 0


def test_unstable_by_instantaneous_spectrum():
    ctx, acs = run(0.3, 0.1)
    v = vd.decide(ctx, acs)
    assert v.status == "unstable"
    assert v.max_re_instantaneous > 1e-6


def test_origin_tangency_is_stable_with_decay():
    # gamma max = ln|b/a| = 0 exactly at the origin: the exclusion ball covers
    # the trivial tangency, the verdict stays stable, and the critical branch
    # yields decay annotations that shrink like theta^{-3}
    ctx, acs = run(-1.0, 1.0)
    v = vd.decide(ctx, acs, n_values=[10, 20])
    assert v.status == "stable"
    assert acs.critical_branch() is not None
    assert len(v.decay) == 2
    d10, d20 = v.decay
    assert d10.re_mu < 0 and d20.re_mu < 0
    assert abs(d10.im_mu - 2 * np.pi / 10.3) < 1e-12
    ratio = d10.re_mu / d20.re_mu
    assert 5.0 < ratio < 12.0


def test_axis_instantaneous_defers():
    # delay-free exponent exactly on the axis: the continuous spectrum is not
    # trustworthy, so the verdict defers even though gamma pokes above zero
    ctx = cf.CharContext(constant_pair([[0.0]], [[0.3]]), TAU, 2.0, k=16)
    grid = np.linspace(-np.pi, np.pi, 64)  # even count avoids omega = 0
    acs = sp.trace_acs(ctx, grid, m_grid=128)
    v = vd.decide(ctx, acs)
    assert vd.FLAG_AXIS_INSTANTANEOUS in v.flags
    assert v.status == "degenerate"


def test_turing_tangency_classification():
    # fabricated branch touching the axis away from the origin with phase 0
    br = sp.AcsBranch(branch_id=0, omegas=[1.9, 2.0, 2.1],
                      gammas=[-0.01, 0.0, -0.01], phis=[0.02, 0.0, -0.02],
                      residuals=[0.0, 0.0, 0.0])
    acs = sp.AcsResult(branches=[br], omega_grid=np.array([1.9, 2.0, 2.1]))
    flags = vd._classify_tangencies(acs, vd.ToleranceSet())
    assert flags == [vd.FLAG_TURING]


def test_pi_phase_tangency_is_benign():
    # b < 0 flips the phase at the gamma maximum to pi
    ctx, acs = run(-1.0, -1.0)
    v = vd.decide(ctx, acs)
    assert vd.FLAG_PI_PHASE in v.flags
    assert v.status == "stable"


def test_no_decay_annotation_without_critical_branch():
    # a strictly negative spectrum has no origin tangency to expand around
    ctx, acs = run(-1.0, 0.5)
    v = vd.decide(ctx, acs, n_values=[10, 20])
    assert v.decay == []


def test_trivial_root_slope_reported():
    ctx, acs = run(-1.0, 0.5)
    v = vd.decide(ctx, acs)
    # generic linear model: dh/dz at (0, 1) is finite and nonzero
    assert v.trivial_root_slope > 1e-8
