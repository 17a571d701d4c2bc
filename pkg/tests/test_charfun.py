import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddefloquet import charfun as cf
from ddefloquet.errors import DomainError, ResolutionError
from ddefloquet.model import constant_pair

A, B, TAU = -1.0, 0.5, 0.3


@pytest.fixture(scope="module")
def ctx():
    cp = constant_pair([[A]], [[B]])
    return cf.CharContext(cp, TAU, 3.0, k=16)


def scalar_root(z, branch):
    """Roots of the scalar constant-coefficient characteristic function:
    periodic ansatz exp(2 pi i k t) gives mu = a - 2 pi i k + z b exp(-2 pi i k tau)."""
    w = 2j * np.pi * branch
    return A - w + z * B * np.exp(-w * TAU)


def test_z_zero_closed_form(ctx):
    # at z = 0 the determinant reduces to det(I - exp(-mu) * monodromy)
    for mu in (0.2 + 0.4j, -0.5 + 2.0j, 1.0 - 3.0j):
        cv = cf.char_value(ctx, mu, 0.0)
        assert abs(cv.h_hat - (1 - np.exp(A - mu))) < 1e-12


@pytest.mark.parametrize("z", [0.7, 0.4 - 0.8j, 1.5 + 0.2j])
@pytest.mark.parametrize("branch", [-1, 0, 1])
def test_scalar_roots(ctx, z, branch):
    cv = cf.char_value(ctx, scalar_root(z, branch), z)
    assert abs(cv.h_hat) < 1e-9
    assert cv.sigma_min_ratio < 1e-9


def test_off_root_is_nonzero(ctx):
    cv = cf.char_value(ctx, scalar_root(0.7, 0) + 0.3, 0.7)
    assert abs(cv.h_hat) > 1e-2


def test_k_refinement_converges():
    cp = constant_pair([[A]], [[B]])
    mu, z = 0.2 + 0.4j, 0.7 - 0.3j
    v16 = cf.char_value(cf.CharContext(cp, TAU, 3.0, k=16), mu, z).h_hat
    v32 = cf.char_value(cf.CharContext(cp, TAU, 3.0, k=32), mu, z).h_hat
    assert abs(v16 - v32) < 1e-10 * abs(v32)


def test_b_zero_z_independent():
    ctx0 = cf.CharContext(constant_pair([[A]], [[0.0]]), TAU, 3.0, k=8)
    mu = 0.1 + 1.7j
    vals = [cf.char_value(ctx0, mu, z).h_hat for z in (0.0, 0.9, -2.0 + 1.0j)]
    assert abs(vals[1] - vals[0]) < 1e-12
    assert abs(vals[2] - vals[0]) < 1e-12


@settings(deadline=None, max_examples=10)
@given(st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=1.5, allow_nan=False, allow_infinity=False))
def test_conjugate_symmetry(mu, z):
    cp = constant_pair([[A]], [[B]])
    c = cf.CharContext(cp, TAU, 3.0, k=5)
    a = cf.char_value(c, np.conj(mu), np.conj(z)).h_hat
    b = cf.char_value(c, mu, z).h_hat
    assert abs(a - np.conj(b)) < 1e-9 * max(1.0, abs(b))


def test_picard_matches_direct_solve(ctx):
    mu, z = 0.1 + 0.9j, 0.6 - 0.2j
    v = np.ones(ctx.n * ctx.k)
    direct = cf.solve_integral_equation(ctx, mu, z, v).values
    picard = cf.picard_solve(ctx, mu, z, v, iterations=200).values
    assert np.abs(direct - picard).max() < 1e-12


def test_operator_norm_bound():
    # contraction bound: ||L_k(mu)|| <= e ||B|| / k once k >= ||A|| + R
    cp = constant_pair([[A]], [[B]])
    r = 2.0
    c = cf.build_context(cp, TAU, r=r, mode="guaranteed")
    for mu in (-r + 0.0j, -r + 3.0j, 0.0 + 0.0j):
        assert c.operator_norm_inf(mu) <= 1.05 * np.e * B / c.k


def test_guaranteed_mode_partition_count():
    cp = constant_pair([[A]], [[B]])
    r = 2.0
    c = cf.build_context(cp, TAU, r=r, mode="guaranteed")
    assert c.k == int(np.ceil(cf.c_bound(cp.norm_a(), cp.norm_b(), r))) + 1
    assert c.guaranteed_mode


def test_guaranteed_mode_strip_enforcement():
    cp = constant_pair([[A]], [[B]])
    c = cf.build_context(cp, TAU, r=1.0, mode="guaranteed")
    with pytest.raises(DomainError):
        cf.char_value(c, -2.0 + 0.0j, 0.5)
    with pytest.raises(DomainError):
        cf.char_value(c, 0.0 + 0.0j, 4.0)


def test_guaranteed_mode_cap():
    cp = constant_pair([[A]], [[B]])
    with pytest.raises(ResolutionError):
        cf.build_context(cp, TAU, r=9.0, mode="guaranteed", k_cap=64)


def test_adaptive_mode_converges():
    cp = constant_pair([[A]], [[B]])
    c = cf.build_context(cp, TAU, r=3.0, mode="adaptive")
    z = 0.7
    assert abs(cf.char_value(c, scalar_root(z, 0), z).h_hat) < 1e-9


def test_log_derivatives_match_finite_differences(ctx):
    mu, z = 0.2 + 0.4j, 0.7 - 0.3j
    cv, ld1, ld2 = cf.char_log_derivatives(ctx, mu, z)
    d1, d2 = cf.char_derivatives(ctx, mu, z)
    assert abs(ld1 - d1 / cv.h_hat) < 1e-6 * abs(ld1)
    assert abs(ld2 - d2 / cv.h_hat) < 1e-6 * abs(ld2)


def test_derivatives_against_scalar_closed_form(ctx):
    # d/dmu of the z = 0 reduction 1 - exp(a - mu) is exp(a - mu)
    mu = 0.3 + 0.6j
    d1, _ = cf.char_derivatives(ctx, mu, 0.0)
    assert abs(d1 - np.exp(A - mu)) < 1e-7


def test_kernel_vector_gives_periodic_solution(ctx):
    z = 0.7
    mu = scalar_root(z, 1)
    delta = cf.char_matrix(ctx, mu, z)
    _, _, vh = np.linalg.svd(delta)
    v = vh[-1].conj()
    sol = cf.solve_integral_equation(ctx, mu, z, v)
    # continuity at every restart point, including the wrap at 0 / -1
    assert sol.jump_sizes().max() < 1e-9
    # and the profile matches exp(2 pi i t) up to normalization
    t = np.linspace(-1, 0, 7, endpoint=False)
    prof = np.array([sol.eval(ti)[0] for ti in t])
    ref = np.exp(2j * np.pi * t)
    ratio = prof / ref
    assert np.abs(ratio - ratio[0]).max() < 1e-8


def test_char_value_N_strip(ctx):
    n_delay = 10
    cv = cf.char_value_N(ctx, n_delay, 0.05 + 1.0j)
    direct = cf.char_value(ctx, 0.05 + 1.0j, np.exp(-(n_delay + TAU) * (0.05 + 1.0j)))
    assert abs(cv.h_hat - direct.h_hat) < 1e-12
    with pytest.raises(DomainError):
        cf.char_value_N(ctx, n_delay, -1.0 + 0.0j)


def test_two_by_two_diagonal_reduces_to_scalars():
    # diagonal system decouples: h equals the product of the scalar factors
    cp2 = constant_pair(np.diag([0.3, -1.0]), np.diag([0.1, 0.2]))
    c2 = cf.CharContext(cp2, TAU, 3.0, k=16)
    z = 0.8 - 0.4j
    mu = 0.3 - 2j * np.pi + z * 0.1 * np.exp(-2j * np.pi * TAU)  # root of first factor
    assert abs(cf.char_value(c2, mu, z).h_hat) < 1e-8
