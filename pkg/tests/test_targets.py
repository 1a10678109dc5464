import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from randres import stats
from randres.errors import ConfigError
from randres.targets import (
    GaussianFunctionalTarget,
    eval_dynamic_target,
    make_contraction_target,
    make_gaussian_bump,
    make_scaled_gaussian_bump,
    make_zero_target,
    radial_fourier_integral,
    truncate_target,
)

# frozen from 30-digit mpmath quadrature
VSTAR_Q1 = 2.0731730074937412
VSTAR_Q2 = 9.593925094247811
TAIL3_Q1 = 0.0026997960632601891


def test_bump_values():
    assert make_gaussian_bump(1, 1.0).eval_f(0.0) == 1.0
    np.testing.assert_allclose(make_gaussian_bump(2, 1.0).eval_g(np.zeros(2)).real, 1 / (2 * np.pi), rtol=1e-14)


def test_bump_moments():
    mo = make_gaussian_bump(1, 1.0).moments
    np.testing.assert_allclose(mo.tail_mass(3.0), TAIL3_Q1, rtol=1e-9)
    np.testing.assert_allclose(mo.abs_moment(1), np.sqrt(2 / np.pi), rtol=1e-9)
    np.testing.assert_allclose(mo.v_star, VSTAR_Q1, rtol=1e-9)
    np.testing.assert_allclose(mo.l1_norm(), 1.0, rtol=1e-9)
    np.testing.assert_allclose(make_gaussian_bump(2, 1.0).moments.v_star, VSTAR_Q2, rtol=1e-8)


def test_moment_regions_add_up():
    mo = make_gaussian_bump(2, 1.0).moments
    full = mo.weighted_l2(3)
    np.testing.assert_allclose(mo.weighted_l2(3, 2.0, "inside") + mo.weighted_l2(3, 2.0, "outside"), full, rtol=1e-9)


def test_nonradial_matches_radial():
    # anisotropic variance forces the spherical-coordinate path
    t = make_scaled_gaussian_bump(2, 1.0, 1.0, [1.0, 1.0 + 1e-9])
    assert t.g_radial is None and t.abs_g_radial is None
    np.testing.assert_allclose(t.moments.tail_mass(1.5), np.exp(-1.5**2 / 2), rtol=1e-6)


def test_high_dim_moment_by_mc():
    # q = 4: |W|^2 ~ chi^2_4, E|W|^2 = 4
    mo = make_gaussian_bump(4, 1.0).moments
    np.testing.assert_allclose(mo.abs_moment(2), 4.0, rtol=0.02)


def test_zero_target_moments():
    t = make_zero_target(2, 1.0)
    assert t.is_zero
    assert t.moments.tail_mass(1.0) == 0.0
    assert t.moments.abs_moment(2) == 0.0
    np.testing.assert_array_equal(t.eval_f(np.ones((3, 2))), 0.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(-2, 2), st.floats(-1.0, 1.0), st.floats(-1, 1))
def test_scaled_bump_is_fourier_pair(a, c, v, s_log):
    s = float(np.exp(s_log))
    t = make_scaled_gaussian_bump(1, 1.0, a, s, c)

    def re(w):
        return np.real(np.exp(1j * w * v) * t.eval_g(w))

    val = integrate.quad(re, -np.inf, np.inf, epsabs=1e-12)[0]
    np.testing.assert_allclose(val, t.eval_f(v), atol=1e-9)


@pytest.mark.parametrize("q", [1, 2, 3])
def test_radial_fourier_integral_untruncated(q):
    t = make_gaussian_bump(q, 1.0)
    for s in (0.0, 0.4, 1.3):
        np.testing.assert_allclose(radial_fourier_integral(t.g_radial, q, s), np.exp(-s * s / 2), rtol=1e-9)


def test_truncated_f_q1():
    t = truncate_target(make_gaussian_bump(1, 1.0), 0.8)
    w = np.linspace(-0.8, 0.8, 200001)
    for s in (0.0, 0.5, 1.0):
        ref = np.trapezoid(np.cos(w * s) * np.exp(-w * w / 2) / np.sqrt(2 * np.pi), w)
        np.testing.assert_allclose(t.eval_f(s), ref, rtol=1e-8)
    assert t.eval_g(np.array([0.9])) == 0


def test_truncation_needs_radial():
    t = make_scaled_gaussian_bump(1, 1.0, 1.0, 1.0, 0.3)
    with pytest.raises(ConfigError):
        truncate_target(t, 1.0)


def test_functional_values():
    h = GaussianFunctionalTarget(0.5)
    np.testing.assert_allclose(h.evaluate([1, 1, 1, 1]), np.exp(-0.9375), rtol=1e-14)
    assert h.evaluate(np.zeros(6)) == 1.0


def test_functional_truncation_error():
    h = GaussianFunctionalTarget(0.5)
    z = stats.make_rng(0).uniform(-1, 1, (1000, 21))
    diff = np.abs(h.evaluate(z[:, :11]) - h.evaluate(z))
    assert diff.max() <= 0.5 * 0.5**11 / (1 - 0.5)
    assert diff.max() <= h.truncation_tail_bound(10)


def test_functional_domain():
    h = GaussianFunctionalTarget(0.5)
    with pytest.raises(ConfigError):
        eval_dynamic_target(h, [0.0, 1.5])
    with pytest.raises(ConfigError):
        GaussianFunctionalTarget(1.0)


def test_readout_target_is_bump_at_sqrt_lam():
    h = GaussianFunctionalTarget(0.5)
    g = h.readout_target(2, np.sqrt(0.5))
    assert g.kind.value == make_gaussian_bump(3, 1.0).kind.value
    x = stats.make_rng(1).uniform(-1, 1, (50, 3))
    # K x for the shift reservoir: lag i scaled by sqrt(lam)^i
    Kx = x * np.sqrt(0.5) ** np.arange(3)
    np.testing.assert_allclose(g.eval_f(Kx), h.evaluate(x), rtol=1e-13)
    np.testing.assert_allclose(h.readout_target(2, 1.0).eval_f(x), h.evaluate(x), rtol=1e-13)


def test_contraction_target():
    c = make_contraction_target()
    np.testing.assert_allclose(np.linalg.norm(c.amplitude), 0.5)
    np.testing.assert_allclose(c.contraction_r, 0.5 * np.exp(-0.5))
    rng = stats.make_rng(2)
    x, y = rng.uniform(-1, 1, (2, 500, 2)) * 0.7
    z = rng.uniform(-1, 1, (500, 1))
    lhs = np.linalg.norm(c.F(x, z) - c.F(y, z), axis=1)
    assert np.all(lhs <= c.contraction_r * np.linalg.norm(x - y, axis=1) + 1e-15)
    np.testing.assert_allclose(c.component_target(1).eval_f(np.hstack([x, z])), c.F(x, z)[:, 1], rtol=1e-14)


def test_contraction_validation():
    with pytest.raises(ConfigError):
        make_contraction_target(2, 1, 1.0, [1.0, 1.0])
