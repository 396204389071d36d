import math

import numpy as np
import pytest

from dampwave.params import ConfigurationError, DataAdmissibilityError, GridConfig, ModelParams
from dampwave.solver import (
    InitialData,
    RadialState,
    advance,
    build_initial_data,
    bump,
    check_support_cone,
    discrete_energy,
    initial_state,
    make_grid,
    run_until_blowup,
)


def _linear(**kw):
    return ModelParams(nonlinearity_on=False, **kw)


def test_zero_state_stays_zero():
    params = ModelParams(eps=0.0)
    r = make_grid(1 / 64, 10)
    st = initial_state(params, r)
    for _ in range(20):
        advance(st, params)
    assert not np.any(st.u) and not np.any(st.v) and not np.any(st.ut) and not np.any(st.vt)


def test_bump_profile_edges():
    h, R = 1 / 64, 1.0
    r = make_grid(h, 3)
    b = bump(r, R)
    assert b[int(round(R / h))] == 0.0
    assert b[int(round(R / h)) - 1] > 0.0
    assert np.all(b[r >= R] == 0)


def test_initial_data_eps_zero_scaling():
    r = make_grid(1 / 64, 4)
    st = initial_state(ModelParams(eps=0.0), r)
    assert not any(np.any(a) for a in (st.u, st.v, st.ut, st.vt))


def test_coarse_grid_rejected():
    with pytest.raises(ConfigurationError):
        build_initial_data(ModelParams(R=1.0), make_grid(1 / 16, 4))


def test_negative_profile_rejected():
    r = make_grid(1 / 64, 2)
    b = bump(r, 1.0)
    with pytest.raises(DataAdmissibilityError):
        InitialData(r, -b, b, b, b)


def test_eps_zero_run_is_censored_and_zero():
    out = run_until_blowup(ModelParams(eps=0.0), horizon=3.0)
    assert out.status == "censored" and out.T_blowup is None
    for col in ("F1", "G1", "Gt2", "max_ut"):
        assert not np.any(out.series[col])


def test_nonfinite_sets_flag():
    params = ModelParams()
    r = make_grid(1 / 64, 6)
    st = initial_state(params, r)
    st.ut[5] = np.inf
    advance(st, params)
    assert st.blown_up


def _energy_run(N=1, T=5.0, h=1 / 64):
    params = _linear(N=N, mu1=0.0, mu2=0.0, eps=1.0, amplitudes=(1.0, 1.0, 1.0, 1.0))
    r = make_grid(h, T + 3)
    st = initial_state(params, r)
    e0 = discrete_energy(st, N)
    drift = 0.0
    while st.t < T - 1e-12:
        advance(st, params, dt=min(0.5 * h, T - st.t))
        drift = max(drift, abs(discrete_energy(st, N) / e0 - 1.0))
    return drift


def test_linear_undamped_energy_drift():
    assert _energy_run() <= 0.01


def _manufactured_error(h, T=1.0, N=2):
    # u = exp(-r^2) cos t, v = exp(-r^2) (1 + sin t) solve the forced system exactly
    params = ModelParams(N=N, mu1=0.5, mu2=1.5, p=2.0, q=3.0, eps=1.0)
    r = make_grid(h, 8.0)
    g = np.exp(-r**2)
    lap_g = (4 * r**2 - 2 * N) * g

    def exact(t):
        return g * math.cos(t), g * (1 + math.sin(t)), -g * math.sin(t), g * math.cos(t)

    def forcing(rr, t):
        u, v, ut, vt = exact(t)
        utt, vtt = -u, -g * math.sin(t)
        lap_u, lap_v = lap_g * math.cos(t), lap_g * (1 + math.sin(t))
        su = utt - lap_u + params.mu1(t) * ut - np.abs(vt) ** params.p
        sv = vtt - lap_v + params.mu2(t) * vt - np.abs(ut) ** params.q
        return su, sv

    u0, v0, ut0, vt0 = exact(0.0)
    st = RadialState(h, r, u0.copy(), v0.copy(), ut0.copy(), vt0.copy())
    n = r.size - 2
    steps = int(round(T / (0.5 * h)))
    for _ in range(steps):
        advance(st, params, dt=T / steps, forcing=forcing, n_active=n)
    u, v, _, _ = exact(st.t)
    w = r ** (N - 1) * h
    return math.sqrt(np.sum(w * ((st.u - u) ** 2 + (st.v - v) ** 2)))


def test_manufactured_solution_order():
    e1, e2 = _manufactured_error(1 / 16), _manufactured_error(1 / 32)
    assert math.log2(e1 / e2) >= 1.9


def test_support_cone_initial_and_planted():
    params = ModelParams()
    r = make_grid(1 / 64, 10)
    st = initial_state(params, r)
    assert check_support_cone(st, params.R)
    st.u[-5] = 1.0
    assert not check_support_cone(st, params.R)


def test_support_cone_after_linear_steps():
    params = _linear(eps=1.0, amplitudes=(1.0, 1.0, 1.0, 1.0))
    r = make_grid(1 / 64, 20)
    st = initial_state(params, r)
    for k in range(800):
        advance(st, params)
        if k % 50 == 0:
            assert check_support_cone(st, params.R)


def test_single_equation_linear_decay():
    # v data zero, nonlinearity off: u is the damped linear wave, sup norm decays after the transient
    params = _linear(eps=1.0, mu1=1.0, amplitudes=(1.0, 0.0, 1.0, 0.0))
    r = make_grid(1 / 64, 25)
    st = initial_state(params, r)
    sups = []
    while st.t < 20 - 1e-9:
        advance(st, params)
        if abs(st.t / 0.5 - round(st.t / 0.5)) < 1e-9:
            sups.append(np.max(np.abs(st.u)))
    assert not np.any(st.v)
    tail = np.array(sups[6:])
    assert np.all(np.diff(tail) <= 1e-12)


def test_blowup_time_decreases_with_eps():
    T = [run_until_blowup(ModelParams(eps=e, amplitudes=(1.0,) * 4), horizon=40).T_blowup for e in (0.5, 1.0, 2.0)]
    assert None not in T
    assert T[0] > T[1] > T[2]


def test_horizon_must_be_positive():
    with pytest.raises(ConfigurationError):
        run_until_blowup(ModelParams(), horizon=0.0)


def test_sampling_times_exact():
    out = run_until_blowup(ModelParams(eps=2e-2), horizon=20, grid=GridConfig(sampling_dt=0.25))
    t = out.series.t
    assert np.all(np.diff(t) > 0)
    k = np.round(t / 0.25)
    np.testing.assert_allclose(t, 0.25 * k, atol=1e-9)
    assert out.blew_up and out.T_blowup <= out.horizon
