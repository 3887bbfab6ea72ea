"""Acceptance suite: one test per criterion, each printing PASS/FAIL.

Criteria (tolerances pinned, wall-time budgets enforced):
  1. Effectiveness matrix vs central finite differences, 10 000 random
     points, max relative error < 1e-5, < 5 s.
  2. Inversion round trip reproduces commanded accelerations to 1e-9
     relative on 1000 random states, < 5 s.
  3. ERP invariants on 10 000 random instances: c in [0,1], bounds
     exactly respected, B u = c nu within 1e-8, <= 4 iterations, equals
     the plain pseudoinverse when unconstrained (1e-10), < 10 s.
  4. Nullspace non-interference in closed loop (< 1e-8 of signal scale)
     plus hover tilt convergence (2 deg with optimizer on, >= 10 deg
     residual with it off), < 60 s wall.
  5. Hedging efficacy on the 9 m/s step: error integral <= 0.5x the
     unhedged run; overshoot only without hedging, < 30 s.
  6. Gust rejection: all outer-loop channels back inside 5 % bands
     within 10 s of gust end, no abort, < 30 s.
  7. Robustness with +50 % plant mismatch and turbulence: 180 s run
     completes, states bounded, forward RMS error < 15 % of command
     amplitude, < 120 s.
  8. Allocation angle metric stays < 1e-6 rad on a saturation-free run.
  9. Filter properties: complementary pair sums to one within O(dt^2);
     dirty-derivative ramp slope error < 1 %.
"""

import json
import math
import time
from importlib import resources

import numpy as np
import pytest

from tiltship.actuators import ActuatorSuite
from tiltship.allocation import (
    control_effectiveness,
    erp_alloc,
    pseudoinverse_alloc,
    rate_bounds,
)
from tiltship.dynamics import RigidState, propulsion_nu
from tiltship.estimation import FilterState, complementary_omega_dot, dirty_derivative
from tiltship.harness import Scenario, run_scenario
from tiltship.inner_loop import nu_cmd_from_accel
from tiltship.params import default_params, generalized_mass


def bundled_scenario(name: str) -> Scenario:
    text = resources.files("tiltship").joinpath(f"scenarios/{name}.json").read_text()
    return Scenario.from_dict(json.loads(text))


def report(num: int, ok: bool, detail: str) -> None:
    print(f"\nCRITERION {num}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="module")
def params():
    return default_params()


def test_criterion_1_effectiveness_matrix(params):
    t0 = time.monotonic()
    rng = np.random.default_rng(1)
    n = 10_000
    # Central differences: step balances truncation (~h^2) against
    # cancellation round-off (~eps*|f|/h) for entry magnitudes ~1e3.
    h = 1e-4
    Om = rng.uniform(1.0, 340.0, (n, 4))
    ga = rng.uniform(-1.3, 4.4, (n, 4))

    # Central-difference oracle, batched over all points per channel.
    B_fd = np.zeros((n, 5, 8))
    for j in range(4):
        dp, dm = Om.copy(), Om.copy()
        dp[:, j] += h
        dm[:, j] -= h
        B_fd[:, :, j] = (
            propulsion_nu(dp, ga, params) - propulsion_nu(dm, ga, params)
        ) / (2 * h)
        gp, gm = ga.copy(), ga.copy()
        gp[:, j] += h
        gm[:, j] -= h
        B_fd[:, :, 4 + j] = (
            propulsion_nu(Om, gp, params) - propulsion_nu(Om, gm, params)
        ) / (2 * h)

    worst = 0.0
    for i in range(n):
        B = control_effectiveness(Om[i], ga[i], params)
        scale = np.maximum(np.abs(B_fd[i]), 1e-4)
        worst = max(worst, float(np.max(np.abs(B - B_fd[i]) / scale)))
    elapsed = time.monotonic() - t0
    ok = worst < 1e-5 and elapsed < 5.0
    report(1, ok, f"max rel err {worst:.2e} (< 1e-5) on {n} points, {elapsed:.1f} s (< 5 s)")
    assert worst < 1e-5
    assert elapsed < 5.0


def test_criterion_2_inversion_round_trip(params):
    from tiltship.dynamics import buoyancy_wrench, gravity_wrench

    t0 = time.monotonic()
    rng = np.random.default_rng(2)
    M_bar = generalized_mass(params)
    M_a = params.apparent_mass()
    J_a = params.apparent_inertia()
    m, r = params.m, params.r_RG
    worst = 0.0
    for _ in range(1000):
        st = RigidState(
            V=rng.normal(0, 3, 3),
            omega=rng.normal(0, 0.3, 3),
            Phi=np.array(
                [rng.normal(0, 0.3), rng.normal(0, 0.25), rng.uniform(-3, 3)]
            ),
        )
        om_dot = rng.normal(0, 0.5, 3)
        V_dot_xz = rng.normal(0, 1, 2)
        M_F = rng.normal(0, 5, 3)
        F_B = buoyancy_wrench(params, st.Phi)
        F_G = gravity_wrench(params, st.Phi)
        # Lateral acceleration consistent with zero propulsion side force.
        rhs_y = (
            F_B.F[1]
            + F_G.F[1]
            - m * np.cross(st.omega, np.cross(st.omega, r))[1]
            - np.cross(st.omega, M_a @ st.V)[1]
        )
        row = M_bar[1]
        known = row[0] * V_dot_xz[0] + row[2] * V_dot_xz[1] + row[3:6] @ om_dot
        v_dot = (rhs_y - known) / row[1]
        V_dot_cmd = np.array([V_dot_xz[0], v_dot, V_dot_xz[1]])

        nu = nu_cmd_from_accel(V_dot_cmd, om_dot, st, M_F, params)
        F_P = np.array([nu[3], 0.0, nu[4]])
        M_P = nu[[0, 1, 2]]
        top = (
            F_B.F + F_G.F + F_P
            - m * np.cross(st.omega, np.cross(st.omega, r))
            - np.cross(st.omega, M_a @ st.V)
        )
        bottom = (
            F_G.M + M_P + M_F
            - np.cross(st.omega, J_a @ st.omega)
            + np.cross(r, m * np.cross(st.V, st.omega))
        )
        acc = np.linalg.solve(M_bar, np.concatenate([top, bottom]))
        cmd = np.concatenate([V_dot_cmd, om_dot])
        worst = max(
            worst, float(np.max(np.abs(acc - cmd) / np.maximum(np.abs(cmd), 1.0)))
        )
    elapsed = time.monotonic() - t0
    ok = worst < 1e-9 and elapsed < 5.0
    report(2, ok, f"max rel err {worst:.2e} (< 1e-9), {elapsed:.1f} s (< 5 s)")
    assert worst < 1e-9
    assert elapsed < 5.0


def test_criterion_3_erp_invariants(params):
    t0 = time.monotonic()
    rng = np.random.default_rng(3)
    pinv_checked = 0
    for i in range(10_000):
        if i % 4 == 0:
            Om = rng.uniform(250.0, 340.0, 4)
            ga = rng.uniform(math.radians(30.0), math.radians(95.0), 4)
        else:
            Om = rng.uniform(25.0, 330.0, 4)
            ga = rng.uniform(-1.2, math.radians(94.0), 4)
        suite = ActuatorSuite.from_params(params, Omega=Om, gamma=ga)
        B = control_effectiveness(Om, ga, params)
        bounds = rate_bounds(suite, params)
        nu_dot = rng.normal(0.0, 1.0, 5) * 10.0 ** rng.uniform(-1, 4)
        res = erp_alloc(B, nu_dot, bounds)

        assert 0.0 <= res.c <= 1.0
        assert np.all(res.udot <= bounds.upper)
        assert np.all(res.udot >= bounds.lower)
        assert res.iterations <= 4
        target = res.c * nu_dot
        resid = np.max(np.abs(B @ res.udot - target))
        assert resid <= 1e-8 * max(1.0, np.max(np.abs(target)))

        u_pi = pseudoinverse_alloc(B, nu_dot)
        if np.all(u_pi < bounds.upper - 1e-9) and np.all(u_pi > bounds.lower + 1e-9):
            assert res.c == 1.0
            assert np.max(np.abs(res.udot - u_pi)) < 1e-10 * max(
                1.0, np.max(np.abs(u_pi))
            )
            pinv_checked += 1
    elapsed = time.monotonic() - t0
    ok = elapsed < 10.0
    report(
        3,
        ok,
        f"10 000 instances, {pinv_checked} unconstrained vs pseudoinverse, "
        f"{elapsed:.1f} s (< 10 s)",
    )
    assert pinv_checked > 100
    assert elapsed < 10.0


def test_criterion_4_nullspace():
    t0 = time.monotonic()
    # (a) closed-loop non-interference: the nullspace addition changes
    # the achieved pseudo-control rate by < 1e-8 of the signal scale.
    log = run_scenario(bundled_scenario("cruise_nullspace"))
    assert not log.aborted
    scale = float(
        np.max(np.abs(np.column_stack([log[f"nu_dot_ach_{c}"] for c in "LMNXZ"])))
    )
    leak = float(np.max(log["ns_leak"]))
    ok_leak = leak < 1e-8 * scale

    # (b) hover tilt convergence with the optimizer on/off.
    targets = np.array([45.0, -45.0, -45.0, 45.0])
    results = {}
    for ns_on in (True, False):
        sc = bundled_scenario("hover_nullspace")
        sc.toggles.nullspace = ns_on
        hlog = run_scenario(sc)
        assert not hlog.aborted
        t = hlog["t"]
        idx = np.where((t > 62.0) & (np.abs(hlog["u"]) < 0.2))[0]
        assert idx.size > 0, "hover never reached"
        t_hover = t[idx[0]]
        k30 = min(np.searchsorted(t, t_hover + 30.0), len(t) - 1)
        tilts = np.degrees(
            np.array([hlog[f"gamma_{i}"][k30] for i in range(1, 5)])
        )
        results[ns_on] = np.abs(tilts - targets)
    dev_on = float(np.max(results[True]))
    dev_off = float(np.max(results[False]))
    elapsed = time.monotonic() - t0
    ok = ok_leak and dev_on < 2.0 and dev_off >= 10.0 and elapsed < 60.0
    report(
        4,
        ok,
        f"leak {leak:.2e} (< {1e-8 * scale:.2e}), hover dev on {dev_on:.2f} deg "
        f"(< 2), off {dev_off:.1f} deg (>= 10), {elapsed:.1f} s (< 60 s)",
    )
    assert ok_leak
    assert dev_on < 2.0
    assert dev_off >= 10.0
    assert elapsed < 60.0


def test_criterion_5_hedging_efficacy():
    t0 = time.monotonic()
    itae = {}
    overshoot = {}
    for pch_on in (True, False):
        sc = bundled_scenario("pch_step")
        sc.toggles.pch = pch_on
        log = run_scenario(sc)
        assert not log.aborted
        dt = log["t"][1] - log["t"][0]
        itae[pch_on] = float(np.sum(np.abs(log["u_ref"] - log["u"])) * dt)
        overshoot[pch_on] = float(np.max(log["u"])) - 9.0
    elapsed = time.monotonic() - t0
    ratio = itae[True] / itae[False]
    ok = (
        ratio <= 0.5
        and overshoot[False] > 0.02 * 9.0
        and overshoot[True] <= 0.02 * 9.0
        and elapsed < 30.0
    )
    report(
        5,
        ok,
        f"integral ratio {ratio:.3f} (<= 0.5), overshoot without {overshoot[False]:+.2f} m/s, "
        f"with {overshoot[True]:+.3f} m/s (<= 0.18), {elapsed:.1f} s (< 30 s)",
    )
    assert ratio <= 0.5
    assert overshoot[False] > 0.02 * 9.0  # unhedged run overshoots
    assert overshoot[True] <= 0.02 * 9.0  # hedged run stays clean
    assert elapsed < 30.0


def test_criterion_6_gust_rejection():
    t0 = time.monotonic()
    log = run_scenario(bundled_scenario("case2_gust"))
    assert not log.aborted
    t = log["t"]
    k_start = np.searchsorted(t, 15.0)
    gust_T = 3.0 / max(float(log["airspeed"][k_start - 1]), 0.5)
    k_settle = np.searchsorted(t, 15.0 + gust_T + 10.0)

    bands = {
        "u_C": ("u_C_meas", "u_C_cmd", 0.05 * 5.0),
        "w_C": ("w_C_meas", "w_C_cmd", 0.05 * 3.0),
        "psi_dot": ("psi_dot_meas", "psi_dot_cmd", 0.05 * math.radians(10.0)),
    }
    details = []
    ok = True
    for name, (meas, cmd, band) in bands.items():
        tail = np.abs(log[meas][k_settle:] - log[cmd][k_settle:])
        worst = float(np.max(tail))
        details.append(f"{name} {worst:.3f}/{band:.3f}")
        ok &= worst < band
    elapsed = time.monotonic() - t0
    ok &= elapsed < 30.0
    report(6, ok, f"post-gust residuals {', '.join(details)}, {elapsed:.1f} s (< 30 s)")
    for name, (meas, cmd, band) in bands.items():
        tail = np.abs(log[meas][k_settle:] - log[cmd][k_settle:])
        assert np.max(tail) < band, name
    assert elapsed < 30.0


def test_criterion_7_robustness_mismatch():
    t0 = time.monotonic()
    log = run_scenario(bundled_scenario("case4_mismatch"))
    elapsed = time.monotonic() - t0
    assert not log.aborted
    assert log["t"][-1] >= 179.9 - 0.02

    bounded = (
        float(np.max(np.abs(log["u"]))) < 20.0
        and float(np.max(np.abs(log["w"]))) < 5.0
        and float(np.max(np.abs(np.column_stack([log["p"], log["q"], log["r"]])))) < 2.0
        and float(np.max(np.abs(log["theta"]))) < math.radians(45.0)
        and float(np.max(np.abs(log["phi"]))) < math.radians(45.0)
    )
    amp = float(np.max(np.abs(log["u_C_cmd"])))
    rms = float(np.sqrt(np.mean((log["u_C_meas"] - log["u_C_cmd"]) ** 2)))
    ok = bounded and rms < 0.15 * amp and elapsed < 120.0
    report(
        7,
        ok,
        f"completed 180 s, rms u err {rms:.2f} ({rms / amp * 100:.1f} % of {amp:.0f} m/s, "
        f"< 15 %), states bounded {bounded}, {elapsed:.1f} s (< 120 s)",
    )
    assert bounded
    assert rms < 0.15 * amp
    assert elapsed < 120.0


def test_criterion_8_angle_metric_invariant():
    sc = Scenario.from_dict(
        {
            "name": "nominal_moderate",
            "duration": 60.0,
            "damping": True,
            "schedule": [
                {"t": 0.0, "u": 0},
                {"t": 5.0, "u": 4},
                {"t": 25.0, "u": 4, "psi_dot_deg": 4},
                {"t": 45.0, "u": 4, "w": -0.5, "psi_dot_deg": 0},
            ],
        }
    )
    log = run_scenario(sc)
    assert not log.aborted
    # No rotor touches its absolute speed limits during the run.
    oms = np.column_stack([log[f"Omega_{i}"] for i in range(1, 5)])
    assert np.max(oms) < 340.0 - 1e-6
    assert np.min(oms) > 1e-6
    angle_max = float(np.max(log["angle_nu_dot"]))
    ok = angle_max < 1e-6
    report(8, ok, f"angle(nu_dot_cmd, nu_dot_ach) max {angle_max:.2e} rad (< 1e-6)")
    assert angle_max < 1e-6


def test_criterion_9_filter_properties():
    dt = 0.01
    # Complementary pair sums to one for a shared input sequence.
    fs = FilterState()
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(500):
        x = rng.normal(0.0, 1.0, 3)
        out = complementary_omega_dot(x, x, fs, dt)
        worst = max(worst, float(np.max(np.abs(out - x))))
    sum_ok = worst < dt * dt  # comfortably inside O(dt^2)

    # Dirty-derivative ramp slope recovered within 1 %.
    fs2 = FilterState()
    slope = 2.3
    out = np.zeros(3)
    for k in range(600):
        out = dirty_derivative(np.full(3, slope * k * dt), fs2, dt)
    slope_err = float(np.max(np.abs(out - slope))) / slope
    ok = sum_ok and slope_err < 0.01
    report(
        9,
        ok,
        f"complementary sum residual {worst:.2e} (< {dt * dt:.0e}), "
        f"ramp slope error {slope_err * 100:.3f} % (< 1 %)",
    )
    assert sum_ok
    assert slope_err < 0.01
