import math

import numpy as np
import pytest

from dampwave.params import DataAdmissibilityError, GridConfig, ModelParams
from dampwave.solver import InitialData, make_grid, run_until_blowup
from dampwave.specfun import phi_radial, rho
from dampwave.verification import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    RUN_CHECKS,
    all_passed,
    check_asymptotics,
    check_F_bounds,
    check_G_coercivity,
    check_L_domination,
    check_lemma31,
    check_phi_eigen,
    check_psi_conjugate,
    check_psi_power_bound,
    check_rho_growth,
    check_rho_ode,
    closed_form_suite,
    run_suite,
)


@pytest.mark.parametrize("mu", [0.5, 1.0, 2.0, 3.0])
def test_rho_ode_passes(mu):
    rep = check_rho_ode(mu)
    assert rep.status == PASS and rep.margin >= 0


def test_rho_ode_detects_time_dependent_distortion():
    rep = check_rho_ode(1.0, rho_fn=lambda t: rho(1.0, t) * (1 + 1e-3 * t))
    assert rep.status == FAIL


def test_rho_ode_blind_to_constant_multiple():
    # a constant multiple still solves the same linear equation
    rep = check_rho_ode(1.0, rho_fn=lambda t: rho(1.0, t) * (1 + 1e-3))
    assert rep.status == PASS


def test_rho_ode_rejects_grid_outside_range():
    with pytest.raises(ValueError):
        check_rho_ode(1.0, t_grid=[0.0, 200.0])


@pytest.mark.parametrize("N", [1, 2, 3])
def test_phi_eigen(N):
    assert check_phi_eigen(N).status == PASS
    bad = check_phi_eigen(N, phi_fn=lambda r: phi_radial(N, r) * (1 + 1e-3 * r))
    assert bad.status == FAIL


def test_psi_conjugate_and_flipped_damping():
    assert check_psi_conjugate(1.0, 2).status == PASS
    assert check_psi_conjugate(1.0, 2, damping_sign=-1.0).status == FAIL


def test_psi_power_bound_examples():
    assert check_psi_power_bound(1.0, 2, 2.0, samples=20).status == PASS
    assert check_psi_power_bound(0.5, 1, 1.5, samples=20).status == PASS
    with pytest.raises(ValueError):
        check_psi_power_bound(1.0, 2, 1.0)
    assert check_lemma31 is check_psi_power_bound


def test_asymptotics_and_growth():
    rep = check_asymptotics()
    assert rep.status == PASS and rep.margin > 0
    for mu in (0.5, 1.0, 3.0):
        assert check_rho_growth(mu).status == PASS


def test_closed_form_suite_all_pass():
    reps = closed_form_suite()
    assert all_passed(reps), [r.check_name for r in reps if not r.passed]
    for r in reps:
        d = r.to_dict()
        assert {"check_name", "status", "margin", "sample_grid", "tolerances"} <= set(d)


def test_default_run_checks_pass(default_run):
    reps = run_suite(default_run.series)
    assert [r.check_name for r in reps] == list(RUN_CHECKS)
    for r in reps:
        assert r.status == PASS and r.margin >= 0, (r.check_name, r.margin)


def test_inflated_C6_breaks_domination(default_run):
    assert check_L_domination(default_run.series, C6_scale=100.0).status == FAIL


def test_coercivity_linear_in_eps(default_run, halved_run):
    rep = check_G_coercivity(default_run.series, reference=halved_run.series)
    assert rep.status == PASS
    assert rep.details["linearity_deviation"] < 0.2


def _small_grid():
    return GridConfig(horizon=20.0)


def test_zero_velocity_data_bound():
    params = ModelParams(eps=1e-3, amplitudes=(100.0, 100.0, 0.0, 0.0))
    out = run_until_blowup(params, horizon=10.0, grid=_small_grid())
    s = out.series
    assert s.constants["int_g1_phi"] == 0.0
    assert check_F_bounds(s).status == PASS
    assert np.all(s["Ft1"] >= -1e-12)


def test_linear_mode_coercivity():
    params = ModelParams(eps=1e-3, nonlinearity_on=False)
    out = run_until_blowup(params, horizon=20.0, grid=_small_grid())
    assert not out.blew_up
    rep = check_G_coercivity(out.series)
    assert rep.status == PASS


def test_sign_flipped_data_rejected():
    r = make_grid(1 / 64, 4.0)
    bump = np.maximum(0.0, 1 - r**2)
    with pytest.raises(DataAdmissibilityError):
        InitialData(r, -bump, bump, bump, bump)


def test_F_bounds_rejects_negative_constants(default_run):
    s = default_run.series
    saved = dict(s.constants)
    try:
        s.constants["int_f1_phi"] = -1.0
        with pytest.raises(DataAdmissibilityError):
            check_F_bounds(s)
    finally:
        s.constants.clear()
        s.constants.update(saved)


def test_missing_threshold_is_inconclusive(default_run):
    s = default_run.series
    saved = dict(s.constants)
    try:
        s.constants["T2_emp"] = None
        assert check_L_domination(s).status == INCONCLUSIVE
    finally:
        s.constants.clear()
        s.constants.update(saved)
