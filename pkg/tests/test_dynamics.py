import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from mudforce import MudState, ProtocolSpec, Regime, Trajectory, generate_protocol, load_trial, simulate, step
from mudforce.dynamics import (
    filter_transition,
    free_response,
    load_trace,
    necking_filter_step,
    step_maxwell,
    yield_check,
)
from mudforce.params import PRESET_WATER_CONTENTS


def no_necking(p):
    return replace(p, sigma_y=1e9)


# --- relaxation ODE -------------------------------------------------------


def test_maxwell_hold_matches_exponential(presets):
    p = presets[25]
    tau = p.b_i / p.k_i
    assert tau == pytest.approx(1.115, abs=1e-3)
    D, dt = 0.05, 0.01
    state = MudState(z_i=D, z_m=0.02, in_contact=True)
    for n in range(1, 601):
        z_m, raw = step_maxwell(p, Regime.INTRUSION, D, state, dt)
        state = replace(state, z_m=z_m)
        expected = D + (0.02 - D) * math.exp(-n * dt / tau)
        assert z_m == pytest.approx(expected, rel=1e-12)
        assert raw == pytest.approx((D - z_m) / tau, rel=1e-9)
    # after 5 tau the gap has shrunk by at least e^-5
    assert abs(state.z_m - D) <= math.exp(-5) * 0.03


def test_maxwell_equilibrium(presets):
    state = MudState(z_i=0.03, z_m=0.03, in_contact=True)
    z_m, raw = step_maxwell(presets[20], Regime.WITHDRAWAL, 0.03, state, 0.01)
    assert z_m == 0.03 and raw == 0.0


def test_maxwell_moving_intruder_matches_ode(presets):
    """Exact for linear intruder motion over the step; compared with a tight ODE solve."""
    p = presets[30]
    a = p.k_w / p.b_w
    z0, zm0, v, dt = 0.04, 0.043, -0.02, 0.05
    z_m, raw = step_maxwell(p, Regime.WITHDRAWAL, z0 + v * dt, MudState(z_i=z0, z_m=zm0), dt)
    sol = solve_ivp(lambda t, y: [a * (z0 + v * t - y[0])], (0, dt), [zm0], rtol=1e-12, atol=1e-15)
    assert z_m == pytest.approx(sol.y[0, -1], abs=1e-13)
    assert raw == pytest.approx(a * (z0 + v * dt - z_m), rel=1e-12)


@pytest.mark.parametrize("dt", [0.0, -0.01, float("nan")])
def test_maxwell_rejects_bad_dt(presets, dt):
    with pytest.raises(ValueError):
        step_maxwell(presets[25], Regime.INTRUSION, 0.01, MudState(), dt)


def test_maxwell_rejects_non_finite(presets):
    with pytest.raises(ValueError):
        step_maxwell(presets[25], Regime.INTRUSION, float("inf"), MudState(), 0.01)


# --- yield switch -----------------------------------------------------------


def test_yield_check(presets):
    p = presets[25]
    assert not yield_check(p, -5000.0)
    assert not yield_check(p, -6000.0)
    assert yield_check(p, -7000.0)
    assert yield_check(p, 7000.0)


# --- necking filter ---------------------------------------------------------


@pytest.mark.parametrize("zeta", [0.2, 0.49, 0.81, 1.0, 1.7])
def test_free_response_solves_filter_ode(zeta):
    w0 = 2.5
    t = np.linspace(0, 6, 61)
    x, v = free_response(t, zeta, w0)
    sol = solve_ivp(
        lambda _, y: [y[1], -2 * zeta * w0 * y[1] - w0**2 * y[0]],
        (0, 6), [0.0, 1.0], t_eval=t, rtol=1e-11, atol=1e-13,
    )
    assert np.allclose(x, sol.y[0], atol=1e-9)
    assert np.allclose(v, sol.y[1], atol=1e-9)
    assert v[0] == 1.0


@pytest.mark.parametrize("zeta,w0", [(0.47, 4.09), (0.81, 2.21), (1.0, 3.0), (1.5, 1.2)])
def test_net_post_necking_displacement_is_zero(zeta, w0):
    integral, _ = quad(lambda s: free_response(s, zeta, w0)[1], 0, np.inf, limit=500)
    assert abs(integral) < 1e-8


@pytest.mark.parametrize("w", PRESET_WATER_CONTENTS)
def test_discrete_filter_matches_closed_form(presets, w):
    p = presets[w]
    v0, dt = -0.0123, 0.01
    state = MudState(necked=True, filter_state=(0.0, v0), v_m0=v0, z_m_neck=0.03)
    t, vs, xs = [], [], []
    for n in range(1, 1001):
        state = necking_filter_step(p, state, dt)
        t.append(n * dt)
        vs.append(state.zdot_m)
        xs.append(state.z_m - 0.03)
    x_ref, v_ref = free_response(np.array(t), p.zeta, p.omega0)
    assert np.max(np.abs(np.array(vs) - v0 * v_ref)) < 1e-6 * abs(v0)
    assert np.max(np.abs(np.array(xs) - v0 * x_ref)) < 1e-6 * abs(v0) / p.omega0
    assert state.t_since_neck == pytest.approx(10.0)


def test_filter_step_requires_latch(presets):
    with pytest.raises(ValueError, match="before necking"):
        necking_filter_step(presets[25], MudState(), 0.01)


def test_filter_transition_cached_and_read_only():
    a = filter_transition(0.5, 2.0, 0.01)
    assert filter_transition(0.5, 2.0, 0.01) is a
    with pytest.raises(ValueError):
        a[0, 0] = 1.0


# --- full pipeline ----------------------------------------------------------


def test_zero_state_zero_force(presets, geometry):
    state, s = step(presets[25], geometry, 0.0, 0.0, MudState())
    assert s.F_total == 0.0 and state == MudState()


def test_step_loop_equals_simulate(presets, geometry, canonical):
    p = presets[25]
    trace = simulate(p, geometry, canonical)
    state = MudState.at_rest(0.0)
    forces = []
    for k in range(len(canonical)):
        if k == 0:
            forces.append(trace.F_total[0])
            continue
        state, s = step(p, geometry, canonical.z_i[k], canonical.zdot_i[k], state, canonical.dt)
        forces.append(s.F_total)
    assert np.array_equal(np.array(forces), trace.F_total)


def test_sustain_decays_to_bulk_spring(presets, geometry):
    p = presets[20]
    traj = generate_protocol(ProtocolSpec(t_sustain=20.0))
    trace = simulate(p, geometry, traj)
    n1, n2, _ = traj.phase_ends
    hold = trace.F_total[n1 + 1 : n2 + 1]
    assert np.all(np.diff(hold) <= 0)
    target = p.alpha * (0.05 / geometry.H) ** p.beta * geometry.area
    assert hold[-1] == pytest.approx(target, rel=1e-12)


def test_necked_force_decays_to_drag_only(presets, geometry):
    p = presets[25]
    traj = generate_protocol(ProtocolSpec(v_down=0.05, depth=0.5, t_sustain=2.0, v_up=0.02))
    trace = simulate(p, geometry, traj)
    kn = int(np.argmax(trace.necked))
    assert trace.necked[kn] and trace.withdrawal[kn]
    v_up = traj.zdot_i[-1]
    drag = -p.lambda_drag * p.rho_m * v_up**2 * geometry.area
    t_after = trace.t[-2] - trace.t[kn]
    assert t_after > 20 / (p.zeta * p.omega0)
    assert trace.F_total[-2] == pytest.approx(drag, rel=1e-3)


def test_simulate_rejects_empty(presets, geometry):
    empty = Trajectory(dt=0.01, t=np.zeros(0), z_i=np.zeros(0), zdot_i=np.zeros(0))
    with pytest.raises(ValueError, match="empty"):
        simulate(presets[25], geometry, empty)


def test_zero_motion_gives_zero_trace(presets, geometry):
    traj = Trajectory(dt=0.01, t=np.arange(100) * 0.01, z_i=np.zeros(100), zdot_i=np.zeros(100))
    trace = simulate(presets[25], geometry, traj)
    assert not trace.F_total.any()
    assert not trace.f_total.any()


def test_simulate_is_deterministic(presets, geometry, canonical):
    a = simulate(presets[35], geometry, canonical)
    b = simulate(presets[35], geometry, canonical)
    assert a.to_csv() == b.to_csv()


def test_dt_halving_invariance(presets, geometry):
    """Exact integration: sample values at shared times do not depend on dt (no necking)."""
    for w in PRESET_WATER_CONTENTS:
        p = no_necking(presets[w])
        coarse = simulate(p, geometry, generate_protocol(ProtocolSpec(dt=0.01)))
        fine = simulate(p, geometry, generate_protocol(ProtocolSpec(dt=0.005)))
        assert np.allclose(fine.F_total[::2], coarse.F_total, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("w", PRESET_WATER_CONTENTS)
def test_pre_necking_force_balance(presets, geometry, canonical, w):
    p = presets[w]
    trace = simulate(p, geometry, canonical)
    live = ~trace.necked & (trace.z_i > 0)
    k = np.where(trace.withdrawal, p.k_w, p.k_i)
    b = np.where(trace.withdrawal, p.b_w, p.b_i)
    spring = k * (trace.z_i - trace.z_m)
    damper = b * trace.zdot_m
    assert np.all(np.abs(spring - damper)[live] <= 1e-9 * np.abs(spring).max())


@pytest.mark.parametrize("w", PRESET_WATER_CONTENTS)
def test_trace_invariants(presets, geometry, canonical, w):
    trace = simulate(presets[w], geometry, canonical)
    assert len(trace) == len(canonical)
    assert np.allclose(np.diff(trace.t), canonical.dt)
    # necking happens only while withdrawing and never unlatches within the phase
    assert np.all(trace.withdrawal[trace.necked])
    n = trace.necked.astype(int)
    assert np.all(np.diff(n) >= 0)
    assert trace.F_total.min() < 0
    assert np.all(trace.f_total == trace.f_e1 + trace.f_s + trace.f_e2)


def test_multi_cycle_resets_latch(presets, geometry):
    p = presets[25]
    one = generate_protocol(ProtocolSpec(z_end=-0.01))
    n = len(one)
    # climb back down from -1 cm: 100 samples to reach the surface at 0.01 m/s
    approach = -0.01 + 0.0001 * np.arange(1, 101)
    second = one.z_i[1:]
    z = np.concatenate([one.z_i, approach, second])
    zdot = np.concatenate([one.zdot_i, np.full(100, 0.01), one.zdot_i[1:]])
    traj = Trajectory(dt=0.01, t=np.arange(len(z)) * 0.01, z_i=z, zdot_i=zdot)
    trace = simulate(p, geometry, traj)
    first = trace.F_total[:n]
    repeat = trace.F_total[n + 99 :]
    assert trace.necked[n - 1] and not trace.necked[n + 100]
    assert np.allclose(repeat, first[: len(repeat)], rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("zeta", [1.0, 1.4])
def test_critically_and_over_damped_filters_run(presets, geometry, canonical, zeta):
    trace = simulate(replace(presets[25], zeta=zeta), geometry, canonical)
    assert np.isfinite(trace.F_total).all()
    assert trace.necked.any()


def test_mud_state_round_trip():
    s = MudState(z_i=0.01, z_m=0.02, zdot_m_raw=-0.1, zdot_m=-0.05, filter_state=(0.001, -0.05),
                 necked=True, v_m0=-0.1, z_m_neck=0.02, in_contact=True, t_since_neck=0.3)
    assert MudState._from_array(s._to_array()) == s


def test_trace_csv_round_trips(presets, geometry, canonical, tmp_path):
    trace = simulate(presets[25], geometry, canonical)
    trace.metadata = {"W": "0.25", "v": "0.01"}
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    back = load_trace(path)
    for name in ("t", "z_i", "zdot_i", "z_m", "zdot_m", "f_e1", "f_e2", "f_s", "f_total", "F_total"):
        assert np.array_equal(getattr(back, name), getattr(trace, name)), name
    assert np.array_equal(back.necked, trace.necked)
    assert np.array_equal(back.withdrawal, trace.withdrawal)
    trial = load_trial(path)
    assert np.array_equal(trial.F_meas, trace.F_total)
    assert trial.water_content == 0.25


def test_normalized_csv(presets, geometry, canonical, tmp_path):
    trace = simulate(presets[25], geometry, canonical)
    back = load_trial(__import__("io").StringIO(trace.to_csv(normalize=True)))
    assert np.abs(back.F_meas).max() == 1.0
