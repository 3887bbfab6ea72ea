"""First-order actuator models with rate and absolute limits."""

import math

import numpy as np
import pytest

from tiltship.actuators import ActuatorSuite, actuator_step
from tiltship.params import default_params


@pytest.fixture
def suite():
    return ActuatorSuite.from_params(default_params())


def step_n(suite, commands, dt, n):
    for _ in range(n):
        suite = actuator_step(suite, commands, dt)
    return suite


def test_hold_at_command(suite):
    x0 = suite.positions.copy()
    out = actuator_step(suite, x0, 0.01)
    assert np.allclose(out.positions, x0)


def test_tilt_step_rate_limited_ramp(suite):
    # Closed-form trace: demanded rate 5*(pi/2) = 7.85 rad/s is clipped
    # at 45 deg/s, so the tilt ramps linearly until the first-order
    # demand drops below the limit, then decays exponentially.
    dt = 0.01
    cmd = suite.positions.copy()
    cmd[4] = math.pi / 2.0
    rate_lim = math.radians(45.0)
    s = suite
    trace = []
    for _ in range(200):
        s = actuator_step(s, cmd, dt)
        trace.append(s.gamma[0])
    # During the first second the demanded first-order rate stays above
    # the limit, so the discrete trace is an exact linear ramp.
    t_switch = (math.pi / 2.0 - rate_lim / 5.0) / rate_lim
    k = 99  # t = 1.0 s < t_switch
    assert k * dt + dt < t_switch
    assert trace[k] == pytest.approx(rate_lim * (k + 1) * dt, rel=1e-12)
    # After the switch the response converges towards the command.
    assert trace[-1] < math.pi / 2.0
    assert trace[-1] > rate_lim / 5.0


def test_rotor_command_above_limit_settles_at_max(suite):
    cmd = suite.positions.copy()
    cmd[0] = 1000.0  # way above the 340 rad/s limit
    s = step_n(suite, cmd, 0.01, 2000)
    assert s.Omega[0] == pytest.approx(340.0)


def test_limits_never_exceeded_property(suite):
    rng = np.random.default_rng(4)
    s = suite
    dt = 0.01
    for _ in range(500):
        cmd = rng.uniform(-10.0, 400.0, 11)
        prev = s.positions.copy()
        s = actuator_step(s, cmd, dt)
        assert np.all(s.positions <= s.pos_max + 1e-12)
        assert np.all(s.positions >= s.pos_min - 1e-12)
        delta = s.positions - prev
        assert np.all(delta <= s.rate_max * dt + 1e-12)
        assert np.all(delta >= s.rate_min * dt - 1e-12)


def test_unlimited_response_matches_first_order(suite):
    # Small step keeps every limit inactive; the discrete response must
    # match the analytic first-order step response to O(dt).
    dt = 0.001
    cmd = suite.positions.copy()
    cmd[8] = math.radians(5.0)  # eta_1, bw = 25 rad/s
    s = suite
    n = 200
    s = step_n(s, cmd, dt, n)
    t = n * dt
    analytic = math.radians(5.0) * (1.0 - math.exp(-25.0 * t))
    assert s.eta[0] == pytest.approx(analytic, abs=25.0 * dt * math.radians(5.0) * 0.05)


def test_rejects_nonpositive_dt(suite):
    with pytest.raises(ValueError):
        actuator_step(suite, suite.positions, 0.0)


def test_asymmetric_rotor_rate_bounds(suite):
    # Spin-down obeys the -135 rad/s^2 bound even though the bandwidth
    # demands more.
    dt = 0.01
    s = ActuatorSuite.from_params(default_params(), Omega=np.full(4, 300.0))
    cmd = s.positions.copy()
    cmd[0:4] = 0.0
    out = actuator_step(s, cmd, dt)
    assert np.allclose((out.Omega - 300.0) / dt, -135.0)
