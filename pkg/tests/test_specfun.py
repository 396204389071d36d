import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from dampwave import specfun
from dampwave.specfun import (
    AccuracyError,
    DampingProfile,
    QuadratureConfig,
    bessel_k_scaled,
    gamma_coeff,
    modified_bessel_k,
    multiplier_m,
    phi_radial,
    psi,
    rho,
    rho_log_deriv,
)


def test_k_half_at_one():
    assert modified_bessel_k(0.5, 1.0) == pytest.approx(0.46106850444789, rel=1e-12)


def test_k_even_in_nu():
    assert modified_bessel_k(0.3, 2.0) == pytest.approx(modified_bessel_k(-0.3, 2.0), rel=1e-14)


def test_k_large_argument_normalized():
    t = 50.0
    val = modified_bessel_k(1.0, t) * math.sqrt(2 * t / math.pi) * math.exp(t)
    assert 0.99 <= val <= 1.01


@settings(max_examples=60, deadline=None)
@given(nu=st.floats(-3, 3), t=st.floats(0.2, 50))
def test_k_matches_scipy_kve(nu, t):
    assert bessel_k_scaled(nu, t) == pytest.approx(special.kve(nu, t), rel=1e-9)
    assert modified_bessel_k(nu, t) > 0


def test_k_rejects_nonpositive_t():
    with pytest.raises(ValueError):
        modified_bessel_k(0.5, 0.0)
    with pytest.raises(ValueError):
        modified_bessel_k(0.5, -1.0)


def test_k_accuracy_error_carries_residual():
    cfg = QuadratureConfig(node_count=16, panels=1, tolerance=1e-15)
    with pytest.raises(AccuracyError) as info:
        modified_bessel_k(2.5, 0.2, cfg)
    assert info.value.residual > 1e-15


def test_quadrature_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(node_count=8)
    with pytest.raises(ValueError):
        QuadratureConfig(tolerance=0.0)


def test_k_closed_forms_half_integer():
    t = np.linspace(0.5, 50, 200)
    base = np.sqrt(np.pi / (2 * t)) * np.exp(-t)
    np.testing.assert_allclose(modified_bessel_k(0.5, t), base, rtol=1e-8)
    np.testing.assert_allclose(modified_bessel_k(1.5, t), base * (1 + 1 / t), rtol=1e-8)


def test_phi_examples():
    assert phi_radial(1, 0.0) == pytest.approx(2.0, rel=1e-15)
    assert phi_radial(3, 1.0) == pytest.approx(4 * math.pi * math.sinh(1.0), rel=1e-12)
    assert phi_radial(2, 0.0) == pytest.approx(2 * math.pi, rel=1e-12)
    with pytest.raises(ValueError):
        phi_radial(0, 1.0)


@settings(max_examples=40, deadline=None)
@given(r=st.floats(0.0, 30.0))
def test_phi_against_bessel_i_and_sinh(r):
    # N=2: 2 pi I_0(r);  N=3: 4 pi sinh(r)/r
    assert specfun.phi_radial_scaled(2, r) == pytest.approx(2 * math.pi * special.ive(0, r), rel=1e-11)
    expect3 = 4 * math.pi * (-0.5 * math.expm1(-2 * r) / r if r > 0 else 1.0)
    assert specfun.phi_radial_scaled(3, r) == pytest.approx(expect3, rel=1e-11)


def test_phi_even_and_nondecreasing():
    r = np.linspace(0, 10, 101)
    for N in (1, 2, 3):
        vals = phi_radial(N, r)
        assert np.all(np.diff(vals) >= 0)
        np.testing.assert_allclose(phi_radial(N, -r), vals, rtol=1e-15)


def test_rho_examples():
    assert rho(1.0, 0.0) == pytest.approx(special.kv(0, 1.0), rel=1e-10)
    assert rho(1.0, 0.0) == pytest.approx(0.421024, abs=1e-6)
    assert rho(1.0, 3.0) == pytest.approx(4 * special.kv(0, 4.0), rel=1e-10)
    with pytest.raises(ValueError):
        rho(1.0, -0.1)


def test_rho_ode_residual_second_order():
    mu, t = 1.5, 2.0

    def res(h):
        r0, rp, rm = rho(mu, t), rho(mu, t + h), rho(mu, t - h)
        d2 = (rp - 2 * r0 + rm) / h**2
        damp = (mu * rp / (1 + t + h) - mu * rm / (1 + t - h)) / (2 * h)
        return abs(d2 - r0 - damp) / r0

    assert math.log2(res(0.02) / res(0.01)) > 1.9


def test_rho_mu_zero_is_exponential():
    t = np.linspace(0, 5, 11)
    np.testing.assert_allclose(rho(0.0, t), math.sqrt(math.pi / 2) * np.exp(-t - 1), rtol=1e-12)


def test_rho_log_deriv_examples():
    expect = 1 - special.kv(1, 1.0) / special.kv(0, 1.0)
    assert rho_log_deriv(1.0, 0.0) == pytest.approx(expect, rel=1e-10)
    assert rho_log_deriv(1.0, 0.0) == pytest.approx(-0.42965, abs=5e-5)
    assert -1.05 < rho_log_deriv(2.0, 100.0) < -0.95
    h = 1e-4
    fd = (math.log(rho(0.5, 5 + h)) - math.log(rho(0.5, 5 - h))) / (2 * h)
    assert rho_log_deriv(0.5, 5.0) == pytest.approx(fd, abs=1e-6)


def test_gamma_examples():
    assert gamma_coeff(1.0, 0.0) == pytest.approx(1 - 2 * (1 - special.kv(1, 1.0) / special.kv(0, 1.0)), rel=1e-10)
    assert 1.9 < gamma_coeff(2.0, 1000.0) < 2.1
    t = np.linspace(1.0, 100.0, 200)
    for mu in (0.5, 1.0, 3.0):
        assert np.all(gamma_coeff(mu, t) > 0)


def test_gamma_half_inside_iteration_window():
    t = np.linspace(0, 200, 400)
    g = gamma_coeff(0.5, t)
    assert np.all(g > 1.85) and np.all(g < 2.0)
    assert np.all(0.25 - 3 * g / 32 > 0)


def test_psi_examples():
    assert psi(1.0, 1, 0.0, 0.0) == pytest.approx(2 * special.kv(0, 1.0), rel=1e-10)
    assert psi(0.7, 2, 1.3, 2.0) == pytest.approx(psi(0.7, 2, -1.3, 2.0), rel=1e-15)
    r = np.linspace(0, 5, 6)
    np.testing.assert_allclose(psi(1.0, 3, r, 2.0), rho(1.0, 2.0) * phi_radial(3, r), rtol=1e-12)


def test_two_sided_bessel_estimate_has_threshold():
    t = np.linspace(0, 100, 401)
    for mu in (0.5, 1.0, 2.0, 3.0):
        k = modified_bessel_k((mu - 1) / 2, t + 1)
        lower = (1 + t) * k**2 > (math.pi / 4) * np.exp(-2 * (t + 1))
        upper = 1 / ((1 + t) * k**2) > (1 / math.pi) * np.exp(2 * (t + 1))
        ok = lower & upper
        bad = np.nonzero(~ok)[0]
        start = 0 if bad.size == 0 else bad[-1] + 1
        assert start < t.size - 10, f"no threshold found for mu={mu}"


def test_multiplier():
    assert multiplier_m(2.0, 1.0) == 4.0
    assert multiplier_m(0.0, 7.0) == 1.0
    assert multiplier_m(0.5, 3.0) == pytest.approx(2.0)


def test_damping_profile():
    b = DampingProfile(0.5)
    assert b(1.0) == pytest.approx(0.25)
    pert = DampingProfile(0.0, (np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 0.0])))
    assert pert.perturbation_integral() == pytest.approx(1.0)
    assert pert(1.0) == pytest.approx(1.0)
    assert pert(5.0) == 0.0
    with pytest.raises(ValueError):
        DampingProfile(-1.0)
    with pytest.raises(ValueError):
        DampingProfile(0.0, (np.array([1.0, 0.0]), np.array([0.0, 0.0])))
