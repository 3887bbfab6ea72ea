"""Outer loop: stick mapping, flight path, attitude, wind compensation.

The outer loop turns pilot commands (forward/vertical velocity in the
heading-aligned C-frame plus a turn rate) into body-frame velocity and
body-rate commands for the inner loop.

The C-frame is the NED frame rotated about its z-axis by the azimuth
angle, so its x-axis always points along the vehicle heading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import check_pitch_singularity, rotation_ned_to_body

U_MAX_FWD = 10.0      # m/s
U_MAX_BACK = 3.0      # m/s
W_MAX_CLIMB = 3.0     # m/s (negative w_C)
W_MAX_DESCENT = 1.0   # m/s
PSI_DOT_MAX = math.radians(10.0)


@dataclass
class OuterCommands:
    """Velocity commands in the C-frame plus the turn-rate command."""

    u_C_cmd: float = 0.0
    w_C_cmd: float = 0.0
    psi_dot_cmd: float = 0.0


def stick_to_commands(stick: np.ndarray) -> OuterCommands:
    """Piecewise-linear stick mapping, asymmetric per axis.

    Axes: [forward, heave, yaw], each in [-1, 1] (clamped).  Full
    forward stick gives 10 m/s, full back 3 m/s; heave covers -3 m/s
    (climb) to +1 m/s (descent); yaw is symmetric at 10 deg/s.
    """
    f, h, y = np.clip(np.asarray(stick, dtype=float), -1.0, 1.0)
    u = U_MAX_FWD * f if f >= 0.0 else U_MAX_BACK * f
    w = W_MAX_DESCENT * h if h >= 0.0 else W_MAX_CLIMB * h
    return OuterCommands(u, w, PSI_DOT_MAX * y)


def flight_path(
    u_C_cmd: float,
    w_C_cmd: float,
    theta_max: float = math.radians(30.0),
    hover_fade_speed: float = 0.1,
) -> tuple[float, np.ndarray]:
    """Desired pitch angle and the body-frame velocity command.

    theta_des = atan2(-w_C, u_C) aligns the body x-axis with the
    commanded velocity so the body-z velocity command is zero and no
    transient angle of attack builds up during climbs.  The angle is
    clamped to +-theta_max to stay clear of the pitch singularity, and
    faded out below ``hover_fade_speed`` where the direction of a
    near-zero velocity command carries no information.
    """
    speed = math.hypot(u_C_cmd, w_C_cmd)
    if speed < 1e-12:
        return 0.0, np.zeros(3)
    theta = math.atan2(-w_C_cmd, u_C_cmd)
    theta = max(-theta_max, min(theta_max, theta))
    if speed < hover_fade_speed:
        theta *= speed / hover_fade_speed
    c, s = math.cos(theta), math.sin(theta)
    V_B_cmd = np.array([c * u_C_cmd - s * w_C_cmd, 0.0, s * u_C_cmd + c * w_C_cmd])
    return theta, V_B_cmd


def turn_roll_angle(u_C_meas: float, psi_dot_cmd: float, g: float) -> float:
    """Natural roll angle in a steady coordinated turn: u * psi_dot / g.

    Fed forward so the attitude controller does not fight the roll that
    the turn itself produces.
    """
    return u_C_meas * psi_dot_cmd / g


def attitude_rates_cmd(
    phi_cmd: float,
    theta_cmd: float,
    psi_dot_cmd: float,
    Phi_meas: np.ndarray,
    K_phi: float = 0.5,
    K_theta: float = 0.5,
) -> tuple[float, float, float]:
    """Proportional attitude control; the azimuth rate passes through."""
    phi_dot = K_phi * (phi_cmd - Phi_meas[0])
    theta_dot = K_theta * (theta_cmd - Phi_meas[1])
    return phi_dot, theta_dot, psi_dot_cmd


def euler_to_body_rates(
    Phi_meas: np.ndarray, phi_dot_cmd: float, theta_dot_cmd: float, psi_dot_cmd: float
) -> np.ndarray:
    """Invert the attitude kinematics to get the body-rate command."""
    phi, theta = Phi_meas[0], Phi_meas[1]
    check_pitch_singularity(theta)
    cph, sph = math.cos(phi), math.sin(phi)
    cth, sth = math.cos(theta), math.sin(theta)
    return np.array(
        [
            phi_dot_cmd - psi_dot_cmd * sth,
            theta_dot_cmd * cph + psi_dot_cmd * sph * cth,
            -theta_dot_cmd * sph + psi_dot_cmd * cph * cth,
        ]
    )


def wind_compensation(
    n_y_C: float,
    u_C_meas: float,
    pilot_psi_dot_cmd: float,
    K_ny: float = 1.0,
    u_floor: float = 1.0,
    limit: float = PSI_DOT_MAX,
) -> float:
    """Restoring turn-rate command from the lateral load factor.

    Active only when the pilot is not commanding a turn (a commanded
    turn produces a lateral load factor by itself) and above a speed
    floor that keeps the 1/u term bounded.  The correction is clamped
    to the pilot turn-rate envelope so load-factor noise cannot command
    turns the vehicle would never fly.
    """
    if abs(pilot_psi_dot_cmd) > 1e-9 or u_C_meas < u_floor:
        return 0.0
    raw = K_ny * (9.81 / u_C_meas) * n_y_C
    return max(-limit, min(limit, raw))


def c_frame_velocity(V_body: np.ndarray, Phi: np.ndarray) -> np.ndarray:
    """Body velocity expressed in the C-frame."""
    V_ned = rotation_ned_to_body(Phi).T @ V_body
    psi = Phi[2]
    c, s = math.cos(psi), math.sin(psi)
    return np.array([c * V_ned[0] + s * V_ned[1], -s * V_ned[0] + c * V_ned[1], V_ned[2]])


def lateral_load_factor_c(f_G_body: np.ndarray, Phi: np.ndarray, g: float) -> float:
    """Lateral component of the CG specific force in the C-frame, in g."""
    f_ned = rotation_ned_to_body(Phi).T @ f_G_body
    psi = Phi[2]
    return (-math.sin(psi) * f_ned[0] + math.cos(psi) * f_ned[1]) / g
