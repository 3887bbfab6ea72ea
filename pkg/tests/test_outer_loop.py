"""Outer loop: stick mapping, flight path, attitude, wind compensation."""

import math

import numpy as np
import pytest

from tiltship.dynamics import SingularAttitudeError, attitude_rates
from tiltship.outer_loop import (
    attitude_rates_cmd,
    c_frame_velocity,
    euler_to_body_rates,
    flight_path,
    stick_to_commands,
    turn_roll_angle,
    wind_compensation,
)


class TestStickMapping:
    def test_zero_sticks(self):
        cmd = stick_to_commands(np.zeros(3))
        assert cmd.u_C_cmd == 0.0
        assert cmd.w_C_cmd == 0.0
        assert cmd.psi_dot_cmd == 0.0

    def test_full_forward(self):
        assert stick_to_commands(np.array([1.0, 0, 0])).u_C_cmd == pytest.approx(10.0)

    def test_full_back(self):
        assert stick_to_commands(np.array([-1.0, 0, 0])).u_C_cmd == pytest.approx(-3.0)

    def test_max_climb(self):
        assert stick_to_commands(np.array([0, -1.0, 0])).w_C_cmd == pytest.approx(-3.0)

    def test_max_descent(self):
        assert stick_to_commands(np.array([0, 1.0, 0])).w_C_cmd == pytest.approx(1.0)

    def test_yaw_symmetric(self):
        assert stick_to_commands(np.array([0, 0, 1.0])).psi_dot_cmd == pytest.approx(
            math.radians(10.0)
        )
        assert stick_to_commands(np.array([0, 0, -1.0])).psi_dot_cmd == pytest.approx(
            -math.radians(10.0)
        )

    def test_out_of_range_clamped(self):
        assert stick_to_commands(np.array([5.0, 0, 0])).u_C_cmd == pytest.approx(10.0)

    def test_piecewise_linear_midpoints(self):
        assert stick_to_commands(np.array([0.5, 0, 0])).u_C_cmd == pytest.approx(5.0)
        assert stick_to_commands(np.array([-0.5, 0, 0])).u_C_cmd == pytest.approx(-1.5)


class TestFlightPath:
    def test_worked_climb_example(self):
        theta, V_B = flight_path(10.0, -3.0)
        assert math.degrees(theta) == pytest.approx(16.699, abs=0.01)
        assert V_B[0] == pytest.approx(10.44, abs=0.005)
        assert V_B[1] == 0.0
        assert V_B[2] == pytest.approx(0.0, abs=1e-12)

    def test_level(self):
        theta, V_B = flight_path(7.0, 0.0)
        assert theta == 0.0
        assert np.allclose(V_B, [7.0, 0.0, 0.0])

    def test_pure_descent(self):
        theta, V_B = flight_path(3.0, 1.0)
        assert math.degrees(theta) == pytest.approx(-18.435, abs=0.01)
        # The rotation preserves the norm and zeroes the z-component.
        assert np.linalg.norm(V_B) == pytest.approx(math.sqrt(10.0), rel=1e-12)
        assert V_B[2] == pytest.approx(0.0, abs=1e-12)

    def test_hover_convention(self):
        theta, V_B = flight_path(0.0, 0.0)
        assert theta == 0.0
        assert np.allclose(V_B, 0.0)

    def test_clamp_at_30_degrees(self):
        theta, _ = flight_path(1.0, -3.0)
        assert theta == pytest.approx(math.radians(30.0))

    def test_hover_fade(self):
        theta_full, _ = flight_path(0.2, -0.05)
        theta_faded, _ = flight_path(0.04, -0.01)
        # Same direction, reduced magnitude inside the fade region.
        assert 0 < theta_faded < theta_full

    def test_zero_body_z_property(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            u = rng.uniform(0.3, 10.0)
            w = rng.uniform(-0.57 * u, 0.57 * u)  # inside the 30 deg clamp
            _, V_B = flight_path(u, w)
            assert abs(V_B[2]) < 1e-12


class TestTurnRoll:
    def test_zero_turn(self):
        assert turn_roll_angle(10.0, 0.0, 9.81) == 0.0

    def test_formula_value(self):
        phi = turn_roll_angle(10.0, math.radians(10.0), 9.81)
        assert phi == pytest.approx(0.17791, abs=1e-5)
        assert math.degrees(phi) == pytest.approx(10.19, abs=0.01)

    def test_odd_in_turn_rate(self):
        assert turn_roll_angle(10.0, -0.1, 9.81) == -turn_roll_angle(10.0, 0.1, 9.81)


class TestAttitudeRates:
    def test_zero_error(self):
        out = attitude_rates_cmd(0.1, 0.2, 0.05, np.array([0.1, 0.2, 1.0]))
        assert out[0] == 0.0
        assert out[1] == 0.0
        assert out[2] == 0.05

    def test_proportional_gain(self):
        out = attitude_rates_cmd(
            0.0, math.radians(10.0), 0.0, np.zeros(3), K_phi=0.5, K_theta=0.5
        )
        assert math.degrees(out[1]) == pytest.approx(5.0)

    def test_psi_passthrough(self):
        out = attitude_rates_cmd(0.0, 0.0, 0.123, np.zeros(3))
        assert out[2] == 0.123


class TestEulerToBodyRates:
    def test_level_identity(self):
        out = euler_to_body_rates(np.zeros(3), 0.1, -0.2, 0.3)
        assert np.allclose(out, [0.1, -0.2, 0.3])

    def test_inverse_of_attitude_kinematics(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            Phi = np.array([rng.normal(0, 0.5), rng.uniform(-1.0, 1.0), rng.normal(0, 2)])
            rates = rng.normal(0, 0.5, 3)
            om = euler_to_body_rates(Phi, *rates)
            back = attitude_rates(Phi, om)
            assert np.allclose(back, rates, atol=1e-12)

    def test_pitched_pure_yaw(self):
        theta = math.radians(30.0)
        psi_dot = 0.2
        om = euler_to_body_rates(np.array([0.0, theta, 0.0]), 0.0, 0.0, psi_dot)
        assert om[0] == pytest.approx(-psi_dot * math.sin(theta))
        assert om[1] == pytest.approx(0.0)
        assert om[2] == pytest.approx(psi_dot * math.cos(theta))

    def test_singularity_guard(self):
        with pytest.raises(SingularAttitudeError):
            euler_to_body_rates(np.array([0.0, math.pi / 2 - 1e-4, 0.0]), 0.0, 0.0, 0.1)


class TestWindCompensation:
    def test_zero_load_factor(self):
        assert wind_compensation(0.0, 10.0, 0.0) == 0.0

    def test_disabled_during_commanded_turn(self):
        assert wind_compensation(0.1, 10.0, math.radians(5.0)) == 0.0

    def test_formula_value(self):
        out = wind_compensation(0.05, 10.0, 0.0, K_ny=1.0)
        assert out == pytest.approx(1.0 * (9.81 / 10.0) * 0.05, rel=1e-12)
        assert out == pytest.approx(0.049, abs=1e-3)

    def test_speed_floor(self):
        assert wind_compensation(0.1, 0.5, 0.0) == 0.0


def test_c_frame_velocity_heading_aligned():
    # Flying north at psi=0: C-frame velocity equals NED velocity.
    V = np.array([5.0, 0.3, -0.2])
    out = c_frame_velocity(V, np.zeros(3))
    assert np.allclose(out, V)
    # After a 90 deg right turn, forward velocity still maps to u_C.
    out = c_frame_velocity(V, np.array([0.0, 0.0, math.pi / 2.0]))
    assert out[0] == pytest.approx(5.0)
    assert out[1] == pytest.approx(0.3)
