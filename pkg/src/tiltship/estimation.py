"""Angular-acceleration estimation and accelerometer kinematic correction.

Angular acceleration is not measured directly; it is estimated by
fusing two sources with a complementary filter pair:

  - a dirty derivative of the gyro signal, s / (tau_d s + 1), which is
    accurate at low frequency but noisy and lagged, and
  - a model-based estimate from the still-air equations of motion,
    which is fast and noise-free but trusts the mass model.

The measured branch goes through the low pass 1 / (tau_c s + 1) and the
model branch through the complementary high pass tau_c s / (tau_c s + 1),
so their frequency responses sum to one.  All filters are discretized
with the bilinear (Tustin) transform at the controller rate.

Accelerometer data is corrected from the CG to the reference point and
for gravity:  V_dot = f_G + g - omega_dot x r_RG - omega x V_G.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import Wrench, check_pitch_singularity, cross3
from .params import AirshipParams, generalized_mass

TAU_DERIVATIVE = 1.0 / 25.0   # dirty-derivative time constant [s]
TAU_COMPLEMENTARY = 1.0 / 15.0  # complementary-pair time constant [s]


@dataclass
class FilterState:
    """States of the Tustin-discretized filters, per axis (3,)."""

    deriv_in: np.ndarray = field(default_factory=lambda: np.zeros(3))
    deriv_out: np.ndarray = field(default_factory=lambda: np.zeros(3))
    lp_in: np.ndarray = field(default_factory=lambda: np.zeros(3))
    lp_out: np.ndarray = field(default_factory=lambda: np.zeros(3))
    hp_in: np.ndarray = field(default_factory=lambda: np.zeros(3))
    hp_out: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def reset(self) -> None:
        for name in ("deriv_in", "deriv_out", "lp_in", "lp_out", "hp_in", "hp_out"):
            getattr(self, name)[:] = 0.0


def dirty_derivative(
    omega_meas: np.ndarray, state: FilterState, dt: float, tau: float = TAU_DERIVATIVE
) -> np.ndarray:
    """Bilinear realization of s / (tau s + 1) applied to the gyro signal."""
    x = np.asarray(omega_meas, dtype=float)
    y = ((2.0 * tau - dt) * state.deriv_out + 2.0 * (x - state.deriv_in)) / (
        2.0 * tau + dt
    )
    state.deriv_in = x.copy()
    state.deriv_out = y
    return y


def complementary_omega_dot(
    omega_dot_meas: np.ndarray,
    omega_dot_mdl: np.ndarray,
    state: FilterState,
    dt: float,
    tau: float = TAU_COMPLEMENTARY,
) -> np.ndarray:
    """Low-passed measured branch plus high-passed model branch."""
    xm = np.asarray(omega_dot_meas, dtype=float)
    xd = np.asarray(omega_dot_mdl, dtype=float)
    den = 2.0 * tau + dt
    lp = ((2.0 * tau - dt) * state.lp_out + dt * (xm + state.lp_in)) / den
    hp = ((2.0 * tau - dt) * state.hp_out + 2.0 * tau * (xd - state.hp_in)) / den
    state.lp_in, state.lp_out = xm.copy(), lp
    state.hp_in, state.hp_out = xd.copy(), hp
    return lp + hp


def model_omega_dot(
    state, total_wrench: Wrench, params: AirshipParams,
    M_bar_inv: np.ndarray | None = None,
) -> np.ndarray:
    """Angular acceleration predicted by the still-air model.

    ``total_wrench`` must contain every force/moment the model knows
    about (buoyancy, gravity, propulsion, surfaces).  ``M_bar_inv`` may
    carry a precomputed generalized mass inverse.
    """
    check_pitch_singularity(state.Phi[1])
    m, r = params.m, params.r_RG
    V, om = state.V, state.omega
    M_a = params.apparent_mass()
    J_a = params.apparent_inertia()
    top = total_wrench.F - m * cross3(om, cross3(om, r)) - cross3(om, M_a @ V)
    bottom = (
        total_wrench.M - cross3(om, J_a @ om) + cross3(r, m * cross3(V, om))
    )
    rhs = np.concatenate([top, bottom])
    if M_bar_inv is None:
        acc = np.linalg.solve(generalized_mass(params), rhs)
    else:
        acc = M_bar_inv @ rhs
    return acc[3:6]


def accel_at_reference(
    f_G: np.ndarray,
    g_body: np.ndarray,
    omega: np.ndarray,
    omega_dot_est: np.ndarray,
    V_G: np.ndarray,
    r_RG: np.ndarray,
) -> np.ndarray:
    """Linear acceleration at the reference point from CG accelerometer data.

    ``f_G`` is the specific force at the CG, ``V_G`` the CG velocity,
    both body frame; ``g_body`` the gravity vector in body axes.
    """
    return f_G + g_body - cross3(omega_dot_est, r_RG) - cross3(omega, V_G)


def specific_force_at_cg(
    V_dot: np.ndarray,
    omega_dot: np.ndarray,
    V: np.ndarray,
    omega: np.ndarray,
    g_body: np.ndarray,
    r_RG: np.ndarray,
) -> np.ndarray:
    """Inverse of :func:`accel_at_reference`: synthesize the sensor reading.

    Used by the simulation harness to tap the plant truth.
    """
    V_G = V + cross3(omega, r_RG)
    return (
        V_dot
        + cross3(omega, V)
        + cross3(omega_dot, r_RG)
        + cross3(omega, cross3(omega, r_RG))
        - g_body
    )


class AngularAccelEstimator:
    """Stateful wrapper running the dirty derivative and the fusion pair."""

    def __init__(
        self,
        dt: float,
        tau_d: float = TAU_DERIVATIVE,
        tau_c: float = TAU_COMPLEMENTARY,
    ):
        self.dt = dt
        self.tau_d = tau_d
        self.tau_c = tau_c
        self.state = FilterState()

    def reset(self) -> None:
        self.state.reset()

    def update(self, omega_meas: np.ndarray, omega_dot_mdl: np.ndarray) -> np.ndarray:
        om_dot_meas = dirty_derivative(omega_meas, self.state, self.dt, self.tau_d)
        return complementary_omega_dot(
            om_dot_meas, omega_dot_mdl, self.state, self.dt, self.tau_c
        )
