"""Full cascaded flight controller: one pure step per control period.

Wires the outer loop (flight path / attitude / wind compensation), the
estimation filters, the inner-loop reference models with hedging, and
the rate allocator into a single ``step``.  The controller owns a model
parameter set that may deliberately differ from the plant (robustness
studies); everything model-based in here uses the model set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import allocation, estimation, inner_loop, outer_loop
from .actuators import ActuatorSuite
from .dynamics import (
    PlantModel,
    RigidState,
    Wrench,
    cross3,
    propulsion_nu,
    rotation_ned_to_body,
)
from .inner_loop import ControllerGains, ControllerState
from .outer_loop import OuterCommands
from .params import AirshipParams, generalized_mass

# Acceleration channel order [u, w, p, q, r] maps to these nu indices.
ACC_TO_NU = np.array([3, 4, 0, 1, 2])


@dataclass
class Measurements:
    """Sensor set the controller consumes each cycle (body frame)."""

    V: np.ndarray                    # velocity at reference point (3,)
    omega: np.ndarray                # body rates (3,)
    Phi: np.ndarray                  # Euler attitude (3,)
    f_G: np.ndarray                  # specific force at CG (3,)
    airspeed: float                  # |V - V_W|
    Omega: np.ndarray                # rotor speeds (4,)
    gamma: np.ndarray                # tilt angles (4,)
    eta: np.ndarray                  # surface deflections (3,)


@dataclass
class ControlOutput:
    commands: np.ndarray             # (11,) actuator commands
    diag: dict = field(default_factory=dict)


@dataclass
class ControllerToggles:
    pch: bool = True
    nullspace: bool = True
    wind_comp: bool = True
    surfaces: bool = True


class Autopilot:
    """Cascaded velocity/attitude controller for the tilt-rotor airship."""

    def __init__(
        self,
        model_params: AirshipParams,
        gains: ControllerGains | None = None,
        dt: float = 0.01,
        toggles: ControllerToggles | None = None,
        eta_alloc_limit: float = math.radians(35.0),
        surface_on_speed: float = 3.0,
    ):
        self.params = model_params
        self.gains = gains or ControllerGains()
        self.dt = dt
        self.toggles = toggles or ControllerToggles()
        self.eta_alloc_limit = eta_alloc_limit
        self.surface_on_speed = surface_on_speed
        # Fraction of the rate budget offered to the primary allocation
        # when the nullspace optimizer is on; the rest stays available
        # for actuator redistribution.
        self.ns_reserve = 0.8
        self.state = ControllerState()
        self.estimator = estimation.AngularAccelEstimator(dt)
        self._suite_tmpl = ActuatorSuite.from_params(model_params)
        self.K_act = np.array(
            [r.omega_bw for r in model_params.rotors]
            + [r.tilt_bw for r in model_params.rotors]
        )
        self._K_nu_acc = self.gains.K_nu[ACC_TO_NU]
        # Cached model context (mass matrices, rotor geometry); the
        # controller model never includes the synthetic damping.
        self._model = PlantModel(model_params)
        self._M_bar = generalized_mass(model_params)
        self._M_bar_inv = np.linalg.inv(self._M_bar)
        self._M_red_inv = inner_loop.reduced_mass_inverse(model_params)
        self._g_ned = np.array([0.0, 0.0, model_params.g])

    def reset(self, meas: Measurements) -> None:
        """Align all reference states with the current measurements."""
        s = self.state
        s.nu_ref = propulsion_nu(meas.Omega, meas.gamma, self.params)
        s.V_ref = meas.V[[0, 2]].copy()
        s.V_dot_ref = np.zeros(2)
        s.omega_ref = meas.omega.copy()
        s.omega_dot_ref = np.zeros(3)
        s.acc_des = np.zeros(5)
        s.jerk_hedge = np.zeros(5)
        s.nu_dot_hedge = np.zeros(5)
        self.estimator.reset()

    # -- estimation ---------------------------------------------------------

    def estimate(self, meas: Measurements) -> tuple[np.ndarray, np.ndarray]:
        """(V_dot_meas, omega_dot_est) at the reference point."""
        p = self.params
        rigid = RigidState(meas.V, meas.omega, meas.Phi)
        M_BO = rotation_ned_to_body(meas.Phi)
        Fb = M_BO @ self._model._Fb_ned
        Fg = M_BO @ self._model._Fg_ned
        Fp, Mp = self._model._propulsion(meas.Omega, meas.gamma)
        q_dyn = 0.5 * p.rho_air * meas.airspeed * meas.airspeed
        M_surf = (
            q_dyn * p.fins[0].S_ref * p.fins[0].l_ref
        ) * (self._model._B_surf_unit @ meas.eta)
        model_wrench = Wrench(Fb + Fg + Fp, cross3(p.r_RG, Fg) + Mp + M_surf)
        om_dot_mdl = estimation.model_omega_dot(
            rigid, model_wrench, p, self._M_bar_inv
        )
        om_dot_est = self.estimator.update(meas.omega, om_dot_mdl)

        g_body = M_BO @ self._g_ned
        V_G = meas.V + cross3(meas.omega, p.r_RG)
        V_dot = estimation.accel_at_reference(
            meas.f_G, g_body, meas.omega, om_dot_est, V_G, p.r_RG
        )
        return V_dot, om_dot_est

    # -- full step ------------------------------------------------------------

    def step(self, meas: Measurements, pilot: OuterCommands) -> ControlOutput:
        g = self.gains
        p = self.params
        dt = self.dt
        ctrl = self.state

        V_dot_meas, om_dot_est = self.estimate(meas)

        # ---- outer loop
        u_C = outer_loop.c_frame_velocity(meas.V, meas.Phi)[0]
        psi_dot_total = pilot.psi_dot_cmd
        if self.toggles.wind_comp:
            n_y = outer_loop.lateral_load_factor_c(meas.f_G, meas.Phi, p.g)
            psi_dot_total += outer_loop.wind_compensation(
                n_y, u_C, pilot.psi_dot_cmd, g.K_ny
            )
        theta_des, V_B_cmd = outer_loop.flight_path(pilot.u_C_cmd, pilot.w_C_cmd)
        phi_turn = outer_loop.turn_roll_angle(u_C, psi_dot_total, p.g)
        phi_dot, theta_dot, psi_dot = outer_loop.attitude_rates_cmd(
            phi_turn, theta_des, psi_dot_total, meas.Phi, g.K_phi, g.K_theta
        )
        omega_cmd = outer_loop.euler_to_body_rates(
            meas.Phi, phi_dot, theta_dot, psi_dot
        )

        # ---- acceleration reference models (hedge from previous cycle)
        V_ref, V_dot_ref, V_dot_cmd2, _ = inner_loop.accel_ref_step(
            ctrl.V_ref,
            ctrl.V_dot_ref,
            V_B_cmd[[0, 2]],
            meas.V[[0, 2]],
            g.K_V1,
            g.K_V2,
            self._K_nu_acc[[0, 1]],
            ctrl.jerk_hedge[[0, 1]],
            dt,
        )
        om_ref, om_dot_ref, om_dot_cmd, _ = inner_loop.accel_ref_step(
            ctrl.omega_ref,
            ctrl.omega_dot_ref,
            omega_cmd,
            meas.omega,
            g.K_om1,
            g.K_om2,
            self._K_nu_acc[[2, 3, 4]],
            ctrl.jerk_hedge[[2, 3, 4]],
            dt,
        )
        ctrl.V_ref, ctrl.V_dot_ref = V_ref, V_dot_ref
        ctrl.omega_ref, ctrl.omega_dot_ref = om_ref, om_dot_ref

        # ---- inversion to pseudo controls; surfaces take the moment part
        rigid = RigidState(meas.V, meas.omega, meas.Phi)
        # Lateral acceleration is not controllable; carry the measured
        # value through the inversion so the coupled rows stay consistent.
        V_dot_cmd3 = np.array([V_dot_cmd2[0], V_dot_meas[1], V_dot_cmd2[1]])
        F_des, M_des = inner_loop.desired_forces_moments(
            V_dot_cmd3, om_dot_cmd, rigid, p, self._M_bar
        )
        if self.toggles.surfaces:
            eta_cmd, M_F = allocation.surface_alloc(
                M_des, meas.airspeed, p, self.eta_alloc_limit, self.surface_on_speed
            )
        else:
            eta_cmd, M_F = np.zeros(3), np.zeros(3)
        nu_cmd = inner_loop.P_SELECT @ np.concatenate([F_des, M_des - M_F])

        # ---- error controller on filtered desired accelerations
        acc_cmd = np.concatenate([V_dot_cmd2, om_dot_cmd])
        acc_des = ctrl.acc_des
        nu_dot_ec = inner_loop.nu_error_controller(
            acc_des[[0, 1]], V_dot_meas, acc_des[[2, 3, 4]], om_dot_est, p,
            g.K_nu_ec, self._M_bar,
        )
        ctrl.acc_des = acc_des + dt * self._K_nu_acc * (acc_cmd - acc_des)

        # ---- nu reference model with hedging
        Fp, Mp = self._model._propulsion(meas.Omega, meas.gamma)
        nu_ach = np.array([Mp[0], Mp[1], Mp[2], Fp[0], Fp[2]])
        nu_ref, nu_dot_ref, nu_dot_hedge = inner_loop.nu_ref_step(
            ctrl, nu_cmd, nu_ach, g.K_nu, dt, self.toggles.pch, nu_dot_ec
        )
        ctrl.jerk_hedge = inner_loop.hedge_to_jerk(nu_dot_hedge, p, self._M_red_inv)

        nu_dot_cmd = nu_dot_ref + nu_dot_ec

        # ---- allocation
        suite = self._suite_tmpl.replace_positions(
            np.concatenate([meas.Omega, meas.gamma, meas.eta])
        )
        B = allocation.control_effectiveness(meas.Omega, meas.gamma, p)
        bounds = allocation.rate_bounds(suite, p)
        svd_B = np.linalg.svd(B, full_matrices=False)
        if self.toggles.nullspace:
            # Reserve a slice of the rate budget so the nullspace keeps
            # pulling actuators towards their preferred positions even
            # while the primary demand saturates; without that reserve
            # the incremental allocation is path dependent and can walk
            # tilts into awkward corners during long saturated phases.
            erp_bounds = allocation.RateBounds(
                self.ns_reserve * bounds.lower, self.ns_reserve * bounds.upper
            )
            result = allocation.erp_alloc(B, nu_dot_cmd, erp_bounds, svd0=svd_B)
            udot = allocation.add_nullspace_rates(
                result.udot, B, suite, meas.airspeed, g.K_act_opt, p, bounds
            )
            ns_leak = float(np.linalg.norm(B @ (udot - result.udot)))
        else:
            result = allocation.erp_alloc(B, nu_dot_cmd, bounds, svd0=svd_B)
            udot = result.udot
            ns_leak = 0.0
        nu_dot_ach = B @ udot

        # ---- inversion law
        u_prop_cmd = inner_loop.eindi_command(
            np.concatenate([meas.Omega, meas.gamma]), udot, self.K_act
        )
        commands = np.concatenate([u_prop_cmd, eta_cmd])

        diag = {
            "nu_cmd": nu_cmd,
            "nu_ref": nu_ref,
            "nu_ach": nu_ach,
            "nu_dot_cmd": nu_dot_cmd,
            "nu_dot_ref": nu_dot_ref,
            "nu_dot_ach": nu_dot_ach,
            "nu_dot_hedge": nu_dot_hedge,
            "alloc_c": result.c,
            "alloc_iterations": result.iterations,
            "alloc_saturated": len(result.saturated),
            "ns_leak": ns_leak,
            "V_ref": V_ref,
            "omega_ref": om_ref,
            "V_dot_cmd": V_dot_cmd2,
            "omega_dot_cmd": om_dot_cmd,
            "V_dot_meas": V_dot_meas,
            "omega_dot_est": om_dot_est,
            "V_B_cmd": V_B_cmd,
            "omega_cmd": omega_cmd,
            "theta_des": theta_des,
            "phi_cmd": phi_turn,
            "psi_dot_total": psi_dot_total,
            "u_C_meas": u_C,
            "eta_cmd": eta_cmd,
            "udot": udot,
        }
        return ControlOutput(commands, diag)
