"""Inner loop building blocks: inversion, reference models, hedging.

The inner loop tracks body-frame velocity (u, w) and body rates by
generating pseudo-control rate commands nu_dot_cmd that the allocator
turns into actuator rates.  Signal chain per controller cycle:

  1. Second-order, critically damped reference models shape the
     velocity and rate commands into smooth acceleration commands with
     a feedforward K_nu^-1 * xddot_ref that cancels the lag of the
     first-order nu reference model downstream.
  2. The acceleration commands are inverted through the generalized
     mass matrix into force/moment demands and reduced to the pseudo
     control vector nu_cmd = [L_P, M_P, N_P, X_P, Z_P].
  3. A first-order reference model produces nu_dot_ref; an error
     controller on the measured accelerations adds nu_dot_ec.
  4. Hedging: the unachieved part K_nu*(nu_ref - nu_ach) slows the nu
     reference model directly and, transformed into jerks through the
     reduced mass matrix, slows the acceleration reference models, so
     none of the integrators wind up past what the actuators can do.
  5. The inversion law u_cmd = u + K_act^-1 * u_dot converts allocated
     rates into absolute actuator commands, embedding the first-order
     actuator dynamics.

Acceleration channels are ordered [u_dot, w_dot, p_dot, q_dot, r_dot]
throughout; the matching nu components are [X_P, Z_P, L_P, M_P, N_P],
i.e. nu index map (3, 4, 0, 1, 2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

import math

from .dynamics import RigidState, cross3
from .params import AirshipParams, generalized_mass

# Selection matrix P: [F(3); M(3)] -> [L, M, N, X, Z]
P_SELECT = np.array(
    [
        [0, 0, 0, 1, 0, 0],
        [0, 0, 0, 0, 1, 0],
        [0, 0, 0, 0, 0, 1],
        [1, 0, 0, 0, 0, 0],
        [0, 0, 1, 0, 0, 0],
    ],
    dtype=float,
)

# P_tilde drops the lateral row/column of the 6x6 generalized mass
# matrix: the reduced vector is [u, w, p, q, r].
P_TILDE = np.array(
    [
        [1, 0, 0, 0, 0, 0],
        [0, 0, 1, 0, 0, 0],
        [0, 0, 0, 1, 0, 0],
        [0, 0, 0, 0, 1, 0],
        [0, 0, 0, 0, 0, 1],
    ],
    dtype=float,
)

# Reorders nu = [L, M, N, X, Z] into [X, Z, L, M, N] (acceleration order).
NU_TO_ACC_ORDER = np.array(
    [
        [0, 0, 0, 1, 0],
        [0, 0, 0, 0, 1],
        [1, 0, 0, 0, 0],
        [0, 1, 0, 0, 0],
        [0, 0, 1, 0, 0],
    ],
    dtype=float,
)


@dataclass
class ControllerGains:
    """Inner/outer loop gains; the paper-level structure is fixed, the
    numeric values are tuning choices (config-overridable)."""

    omega0_V: float = 0.8          # velocity reference model natural freq [rad/s]
    omega0_om: float = 2.0         # rate reference model natural freq [rad/s]
    K_nu: np.ndarray = field(default_factory=lambda: 5.0 * np.ones(5))
    K_nu_ec: np.ndarray = field(default_factory=lambda: 1.0 * np.ones(5))
    K_phi: float = 0.5
    K_theta: float = 0.5
    K_ny: float = 1.0
    K_act_opt: float = 0.5

    # Critically damped second-order gains: K1 = omega0/2, K2 = 2*omega0.
    @property
    def K_V1(self) -> float:
        return 0.5 * self.omega0_V

    @property
    def K_V2(self) -> float:
        return 2.0 * self.omega0_V

    @property
    def K_om1(self) -> float:
        return 0.5 * self.omega0_om

    @property
    def K_om2(self) -> float:
        return 2.0 * self.omega0_om


@dataclass
class ControllerState:
    """All integrator states needed for a pure controller step."""

    nu_ref: np.ndarray = field(default_factory=lambda: np.zeros(5))
    V_ref: np.ndarray = field(default_factory=lambda: np.zeros(2))       # u, w
    V_dot_ref: np.ndarray = field(default_factory=lambda: np.zeros(2))
    omega_ref: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega_dot_ref: np.ndarray = field(default_factory=lambda: np.zeros(3))
    acc_des: np.ndarray = field(default_factory=lambda: np.zeros(5))     # EC filter
    jerk_hedge: np.ndarray = field(default_factory=lambda: np.zeros(5))
    nu_dot_hedge: np.ndarray = field(default_factory=lambda: np.zeros(5))


def desired_forces_moments(
    V_dot_cmd: np.ndarray,
    omega_dot_cmd: np.ndarray,
    state: RigidState,
    params: AirshipParams,
    M_bar: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Invert the still-air equations of motion for (F_des, M_des).

    These are the total propulsion + surface force/moment that realize
    the commanded accelerations at the current state.  ``M_bar`` may
    carry a precomputed generalized mass matrix.
    """
    m, r = params.m, params.r_RG
    V, om = state.V, state.omega
    M_a = params.apparent_mass()
    J_a = params.apparent_inertia()
    if M_bar is None:
        M_bar = generalized_mass(params)
    # Buoyancy and weight both act along NED z: only the third column of
    # the NED-to-body rotation is needed.
    phi, theta = state.Phi[0], state.Phi[1]
    sph, cph = math.sin(phi), math.cos(phi)
    sth, cth = math.sin(theta), math.cos(theta)
    zcol = np.array([-sth, sph * cth, cph * cth])
    F_grav = (m * params.g) * zcol
    F_stat = F_grav - params.F_B_net * zcol
    M_grav = cross3(r, F_grav)

    acc = np.concatenate([V_dot_cmd, omega_dot_cmd])
    lhs = M_bar @ acc
    F_des = (
        lhs[0:3]
        - F_stat
        + m * cross3(om, cross3(om, r))
        + cross3(om, M_a @ V)
    )
    M_des = (
        lhs[3:6]
        - M_grav
        + cross3(om, J_a @ om)
        - cross3(r, m * cross3(V, om))
    )
    return F_des, M_des


def nu_cmd_from_accel(
    V_dot_cmd: np.ndarray,
    omega_dot_cmd: np.ndarray,
    state: RigidState,
    M_F: np.ndarray,
    params: AirshipParams,
) -> np.ndarray:
    """Pseudo control command with the achieved surface moment removed."""
    F_des, M_des = desired_forces_moments(V_dot_cmd, omega_dot_cmd, state, params)
    return P_SELECT @ np.concatenate([F_des, M_des - np.asarray(M_F, dtype=float)])


def nu_ref_step(
    ctrl: ControllerState,
    nu_cmd: np.ndarray,
    nu_ach: np.ndarray,
    K_nu: np.ndarray,
    dt: float,
    pch_enabled: bool = True,
    nu_dot_ec: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """First-order nu reference model with hedging.

    Returns (nu_ref, nu_dot_ref, nu_dot_hedge) evaluated at the current
    step.  The reference integrates everything that was commanded
    downstream (nu_dot_ref plus the error-controller share) minus the
    hedge.  With the error controller included, the hedge
    K_nu * (nu_ref - nu_ach) vanishes whenever the allocation realizes
    the command, and engages exactly by the unrealized portion when
    actuators saturate, pulling the reference back towards what was
    achieved.
    """
    nu_ref = ctrl.nu_ref
    nu_dot_ref = K_nu * (nu_cmd - nu_ref)
    if pch_enabled:
        # The error-controller share enters the integrator together
        # with the hedge anchor: the reference then tracks the realized
        # pseudo control exactly while the allocation keeps up, and the
        # hedge measures precisely the unrealized portion.  Without the
        # anchor this inclusion would let the reference drift until it
        # cancels the error controller, so the plain first-order
        # reference is kept when hedging is off.
        nu_dot_hedge = K_nu * (nu_ref - nu_ach)
        total = nu_dot_ref - nu_dot_hedge
        if nu_dot_ec is not None:
            total = total + nu_dot_ec
    else:
        nu_dot_hedge = np.zeros(5)
        total = nu_dot_ref
    ctrl.nu_ref = nu_ref + dt * total
    ctrl.nu_dot_hedge = nu_dot_hedge
    return nu_ref, nu_dot_ref, nu_dot_hedge


def nu_error_controller(
    V_dot_des: np.ndarray,
    V_dot_meas: np.ndarray,
    omega_dot_des: np.ndarray,
    omega_dot_meas: np.ndarray,
    params: AirshipParams,
    K_nu_ec: np.ndarray,
    M_bar: np.ndarray | None = None,
) -> np.ndarray:
    """Acceleration-error correction mapped into the pseudo-control domain.

    The desired accelerations must already carry the nu reference-model
    dynamics (first-order filtered) so that the comparison with the
    measured accelerations is consistent.  ``V_dot_des`` holds the u
    and w channels; the lateral error is zero by construction.
    """
    if M_bar is None:
        M_bar = generalized_mass(params)
    dV = np.array(
        [V_dot_des[0] - V_dot_meas[0], 0.0, V_dot_des[1] - V_dot_meas[2]]
    )
    dom = np.asarray(omega_dot_des, dtype=float) - np.asarray(omega_dot_meas, dtype=float)
    return K_nu_ec * (P_SELECT @ (M_bar @ np.concatenate([dV, dom])))


def accel_ref_step(
    x_ref: np.ndarray,
    x_dot_ref: np.ndarray,
    cmd: np.ndarray,
    meas: np.ndarray,
    K1: float,
    K2: float,
    K_nu_channels: np.ndarray,
    hedge: np.ndarray,
    dt: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """One Euler step of a critically damped second-order reference model.

    xddot_ref = K2 * (K1 * (cmd - x_ref) - x_dot_ref) - hedge

    The output acceleration command adds the feedforward
    K_nu^-1 * xddot_ref (cancels the downstream nu reference lag) and a
    proportional error correction K2 * (x_ref - meas).

    Returns (x_ref_new, x_dot_ref_new, x_dot_cmd, x_ddot_ref).
    """
    x_ddot_ref = K2 * (K1 * (cmd - x_ref) - x_dot_ref) - hedge
    x_dot_cmd = x_dot_ref + x_ddot_ref / K_nu_channels + K2 * (x_ref - meas)
    x_ref_new = x_ref + dt * x_dot_ref
    x_dot_ref_new = x_dot_ref + dt * x_ddot_ref
    return x_ref_new, x_dot_ref_new, x_dot_cmd, x_ddot_ref


def hedge_to_jerk(
    nu_dot_hedge: np.ndarray,
    params: AirshipParams,
    M_red_inv: np.ndarray | None = None,
) -> np.ndarray:
    """Transform the pseudo-control-rate hedge into acceleration-model jerks.

    jerk = (P~ M_bar P~^T)^-1 * reorder * nu_dot_hedge, with the lateral
    row/column removed; output order [u, w, p, q, r].
    """
    if M_red_inv is None:
        M_red_inv = reduced_mass_inverse(params)
    return M_red_inv @ (NU_TO_ACC_ORDER @ np.asarray(nu_dot_hedge, float))


def reduced_mass_inverse(params: AirshipParams) -> np.ndarray:
    """Inverse of the generalized mass matrix with the lateral axis removed."""
    M_red = P_TILDE @ generalized_mass(params) @ P_TILDE.T
    if abs(np.linalg.det(M_red)) < 1e-12:
        raise ValueError("reduced generalized mass matrix is singular")
    return np.linalg.inv(M_red)


def eindi_command(
    u_meas: np.ndarray, udot_alloc: np.ndarray, K_act: np.ndarray
) -> np.ndarray:
    """Inversion law u_cmd = u + K_act^-1 * u_dot.

    Commanding the increment that makes an ideal first-order actuator
    start moving at exactly the allocated rate.
    """
    return np.asarray(u_meas, float) + np.asarray(udot_alloc, float) / np.asarray(
        K_act, float
    )
