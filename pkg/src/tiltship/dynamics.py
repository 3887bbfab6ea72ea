"""Rigid-body flight dynamics of the airship.

State (9): body-frame velocity V = [u, v, w] at the reference point,
body rates omega = [p, q, r], Euler attitude Phi = [phi, theta, psi].

Equations of motion (about the reference point, body frame)::

    [M_a     -m*r_x] [V_dot]   [F_T - m*w x (w x r) - w x M_a V       ]
    [m*r_x    J_a  ] [w_dot] = [M_T - w x J_a w - w x (r x mV) + mV x (r x w)]
                               + wind coupling terms

where M_a = m*I + M_v and J_a = J + J_v include the added mass/inertia
of the displaced air, and r = r_RG is the CG offset.  In still air the
angular Coriolis terms collapse via the Jacobi identity to
``+ r x (mV x w)`` (the "simple" form); both forms are implemented and
agree in still air.

Wind enters through the apparent mass/inertia of the displaced air:
``M_Ba V_W_dot + w x M_Ba V_W`` (and the angular analog).  All wind
vectors here are body-frame.

The total external wrench sums buoyancy, gravity, propulsion, control
surface moments, and (optionally) the synthetic linear damping model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import AirshipParams, FinParams, RotorParams, generalized_mass, skew

# Pitch attitudes closer than this to +-90 deg abort the simulation
# instead of producing NaNs from the kinematic singularity.
THETA_SINGULARITY_GUARD = 1e-3  # rad


class SingularAttitudeError(RuntimeError):
    """Pitch angle within the guard band of the +-90 deg singularity."""


@dataclass
class RigidState:
    """Body-frame velocity, body rates, Euler attitude."""

    V: np.ndarray
    omega: np.ndarray
    Phi: np.ndarray

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        self.Phi = np.asarray(self.Phi, dtype=float)

    @classmethod
    def at_rest(cls) -> "RigidState":
        return cls(np.zeros(3), np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "RigidState":
        return cls(x[0:3].copy(), x[3:6].copy(), x[6:9].copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.V, self.omega, self.Phi])


@dataclass
class WindState:
    """Wind velocity/rates and their body-frame derivatives."""

    V_W: np.ndarray = field(default_factory=lambda: np.zeros(3))
    V_W_dot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega_W: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega_W_dot: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.V_W = np.asarray(self.V_W, dtype=float)
        self.V_W_dot = np.asarray(self.V_W_dot, dtype=float)
        self.omega_W = np.asarray(self.omega_W, dtype=float)
        self.omega_W_dot = np.asarray(self.omega_W_dot, dtype=float)

    @classmethod
    def calm(cls) -> "WindState":
        return cls()


# Shared calm-air singleton; the integrator skips the wind coupling terms
# when it receives exactly this object.
CALM_WIND = WindState()


@dataclass
class Wrench:
    """Force and moment about the reference point, body frame."""

    F: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        self.F = np.asarray(self.F, dtype=float)
        self.M = np.asarray(self.M, dtype=float)

    def __add__(self, other: "Wrench") -> "Wrench":
        return Wrench(self.F + other.F, self.M + other.M)

    @classmethod
    def zero(cls) -> "Wrench":
        return cls(np.zeros(3), np.zeros(3))


# ---------------------------------------------------------------------------
# Attitude kinematics
# ---------------------------------------------------------------------------

def rotation_ned_to_body(Phi: np.ndarray) -> np.ndarray:
    """M_BO for the Euler sequence psi -> theta -> phi (aerospace 3-2-1)."""
    phi, theta, psi = Phi
    cph, sph = math.cos(phi), math.sin(phi)
    cth, sth = math.cos(theta), math.sin(theta)
    cps, sps = math.cos(psi), math.sin(psi)
    return np.array(
        [
            [cth * cps, cth * sps, -sth],
            [sph * sth * cps - cph * sps, sph * sth * sps + cph * cps, sph * cth],
            [cph * sth * cps + sph * sps, cph * sth * sps - sph * cps, cph * cth],
        ]
    )


def attitude_rates(Phi: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Euler angle rates from body rates; singular at theta = +-90 deg."""
    phi, theta = Phi[0], Phi[1]
    check_pitch_singularity(theta)
    cph, sph = math.cos(phi), math.sin(phi)
    tth = math.tan(theta)
    cth = math.cos(theta)
    p, q, r = omega
    return np.array(
        [
            p + sph * tth * q + cph * tth * r,
            cph * q - sph * r,
            (sph / cth) * q + (cph / cth) * r,
        ]
    )


def check_pitch_singularity(theta: float) -> None:
    if abs(abs(theta) - math.pi / 2.0) < THETA_SINGULARITY_GUARD:
        raise SingularAttitudeError(
            f"pitch angle {math.degrees(theta):.2f} deg within guard band of +-90 deg"
        )


# ---------------------------------------------------------------------------
# External wrenches
# ---------------------------------------------------------------------------

def buoyancy_force_net(params: AirshipParams) -> float:
    """g * V_helium * (rho_air - rho_helium)."""
    return params.g * params.V_helium * (params.rho_air - params.rho_helium)


def buoyancy_wrench(params: AirshipParams, Phi: np.ndarray) -> Wrench:
    """Buoyancy acts at the reference point: no moment."""
    F = rotation_ned_to_body(Phi) @ np.array([0.0, 0.0, -params.F_B_net])
    return Wrench(F, np.zeros(3))


def gravity_wrench(params: AirshipParams, Phi: np.ndarray) -> Wrench:
    """Weight at the CG, moment from the CG offset."""
    F = rotation_ned_to_body(Phi) @ np.array([0.0, 0.0, params.m * params.g])
    return Wrench(F, np.cross(params.r_RG, F))


def rotor_wrench(rotor: RotorParams, gamma: float, Omega: float, rho_air: float) -> Wrench:
    """Thrust and torque of one rotor, evaluated at the reference point.

    Tilt 0 = thrust up (-z); the 180 deg frame flip between the nacelle
    frame and the body frame is already folded into the signs.
    """
    sg, cg = math.sin(gamma), math.cos(gamma)
    thrust = rho_air * rotor.k_T * Omega * Omega
    torque = rho_air * rotor.k_N * rotor.sigma_dir * Omega * Omega
    x, y, z = rotor.r_RP
    F = np.array([sg * thrust, 0.0, -cg * thrust])
    M = np.array(
        [
            -sg * torque - y * cg * thrust,
            (z * sg + x * cg) * thrust,
            cg * torque - y * sg * thrust,
        ]
    )
    return Wrench(F, M)


def propulsion_wrench(params: AirshipParams, Omega: np.ndarray, gamma: np.ndarray) -> Wrench:
    """Sum of the four rotor wrenches (vectorized)."""
    sg, cg = np.sin(gamma), np.cos(gamma)
    kT = np.array([r.k_T for r in params.rotors])
    kN = np.array([r.k_N for r in params.rotors])
    sig = np.array([r.sigma_dir for r in params.rotors])
    pos = np.array([r.r_RP for r in params.rotors])   # (4, 3)
    thrust = params.rho_air * kT * Omega * Omega
    torque = params.rho_air * kN * sig * Omega * Omega
    x, y, z = pos[:, 0], pos[:, 1], pos[:, 2]
    F = np.array([np.sum(sg * thrust), 0.0, -np.sum(cg * thrust)])
    M = np.array(
        [
            np.sum(-sg * torque - y * cg * thrust),
            np.sum((z * sg + x * cg) * thrust),
            np.sum(cg * torque - y * sg * thrust),
        ]
    )
    return Wrench(F, M)


NU_LABELS = ("L_P", "M_P", "N_P", "X_P", "Z_P")


def propulsion_nu(Omega: np.ndarray, gamma: np.ndarray, params: AirshipParams) -> np.ndarray:
    """Pseudo-control vector nu = [L_P, M_P, N_P, X_P, Z_P].

    The propulsion moments and the x/z forces; the side force row is
    omitted since the rotors only thrust in the body x-z plane.
    Broadcasts over leading axes: (..., 4) inputs give (..., 5) output.
    """
    Omega = np.asarray(Omega, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    sg, cg = np.sin(gamma), np.cos(gamma)
    kT = np.array([r.k_T for r in params.rotors])
    kN_sig = np.array([r.k_N * r.sigma_dir for r in params.rotors])
    pos = np.array([r.r_RP for r in params.rotors])
    x, y, z = pos[:, 0], pos[:, 1], pos[:, 2]
    thrust = params.rho_air * kT * Omega * Omega
    torque = params.rho_air * kN_sig * Omega * Omega
    return np.stack(
        [
            np.sum(-sg * torque - y * cg * thrust, axis=-1),
            np.sum((z * sg + x * cg) * thrust, axis=-1),
            np.sum(cg * torque - y * sg * thrust, axis=-1),
            np.sum(sg * thrust, axis=-1),
            np.sum(-cg * thrust, axis=-1),
        ],
        axis=-1,
    )


def surface_effectiveness(fins: list[FinParams]) -> np.ndarray:
    """Constant part of the fin moment map (before dynamic pressure).

    Rows L, M, N; columns eta_1..3.  The pitch entry of the third fin
    (varphi = 270 deg) is identically zero: the rudder cannot pitch.
    """
    B = np.zeros((3, 3))
    for j, fin in enumerate(fins):
        c, s = math.cos(fin.varphi), math.sin(fin.varphi)
        if abs(c) < 1e-12:
            c = 0.0
        if abs(s) < 1e-12:
            s = 0.0
        B[0, j] = fin.c_l_eta
        B[1, j] = c * fin.c_m_eta
        B[2, j] = s * fin.c_m_eta
    return B


def surface_moment(
    etas: np.ndarray, airspeed: float, rho_air: float, fins: list[FinParams]
) -> np.ndarray:
    """Moment increment from the control surfaces, body frame.

    Uses the relative airspeed for dynamic pressure; forces are
    neglected (moments dominate through the fin lever arm).
    """
    if airspeed < 0.0:
        raise ValueError("airspeed must be non-negative")
    q_dyn = 0.5 * rho_air * airspeed * airspeed
    scale = q_dyn * fins[0].S_ref * fins[0].l_ref
    return scale * (surface_effectiveness(fins) @ np.asarray(etas, dtype=float))


def damping_wrench(params: AirshipParams, state: RigidState, wind: WindState) -> Wrench:
    """Synthetic linear damping in relative velocity and body rates."""
    d = params.damping
    if not d.enabled:
        return Wrench.zero()
    return Wrench(-d.D_force * (state.V - wind.V_W), -d.D_moment * state.omega)


# ---------------------------------------------------------------------------
# Plant model and integration
# ---------------------------------------------------------------------------

def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product of two 3-vectors; faster than np.cross for singles."""
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


_cross = cross3


class PlantModel:
    """Caches mass matrices and rotor geometry for fast derivative calls."""

    def __init__(self, params: AirshipParams):
        params.validate()
        self.params = params
        self.M_bar = generalized_mass(params)
        self.M_bar_inv = np.linalg.inv(self.M_bar)
        self.M_a = params.apparent_mass()
        self.J_a = params.apparent_inertia()
        self.M_Ba, self.J_Ba = params.buoyant_air_matrices()
        self._kT = np.array([r.k_T for r in params.rotors])
        self._kN_sig = np.array([r.k_N * r.sigma_dir for r in params.rotors])
        pos = np.array([r.r_RP for r in params.rotors])
        self._rx, self._ry, self._rz = pos[:, 0], pos[:, 1], pos[:, 2]
        self._B_surf_unit = surface_effectiveness(params.fins)
        self._surf_scale = 0.5 * params.rho_air * params.fins[0].S_ref * params.fins[0].l_ref
        self._Fg_ned = np.array([0.0, 0.0, params.m * params.g])
        self._Fb_ned = np.array([0.0, 0.0, -params.F_B_net])
        # Scalar constant cache for derivative_vector.
        self._c = {
            "m": float(params.m),
            "r": tuple(float(x) for x in params.r_RG),
            "rho": float(params.rho_air),
            "Fgz": float(params.m * params.g),
            "Fbz": float(-params.F_B_net),
            "kT": tuple(float(x) for x in self._kT),
            "kNs": tuple(float(x) for x in self._kN_sig),
            "px": tuple(float(x) for x in self._rx),
            "py": tuple(float(x) for x in self._ry),
            "pz": tuple(float(x) for x in self._rz),
            "surf": float(self._surf_scale),
            "Bs": tuple(float(x) for x in self._B_surf_unit.ravel()),
            "Ma": tuple(float(x) for x in self.M_a.ravel()),
            "Ja": tuple(float(x) for x in self.J_a.ravel()),
            "damp": bool(params.damping.enabled),
            "Df": tuple(float(x) for x in params.damping.D_force),
            "Dm": tuple(float(x) for x in params.damping.D_moment),
        }

    def _propulsion(self, Omega: np.ndarray, gamma: np.ndarray):
        rho = self.params.rho_air
        sg, cg = np.sin(gamma), np.cos(gamma)
        thrust = rho * self._kT * Omega * Omega
        torque = rho * self._kN_sig * Omega * Omega
        sg_t, cg_t = sg @ thrust, cg @ thrust
        F = np.array([sg_t, 0.0, -cg_t])
        M = np.array(
            [
                -(sg @ torque) - (self._ry * cg) @ thrust,
                (self._rz * sg + self._rx * cg) @ thrust,
                (cg @ torque) - (self._ry * sg) @ thrust,
            ]
        )
        return F, M

    def total_wrench(
        self,
        state: RigidState,
        Omega: np.ndarray,
        gamma: np.ndarray,
        eta: np.ndarray,
        wind: WindState,
    ) -> Wrench:
        p = self.params
        M_BO = rotation_ned_to_body(state.Phi)
        F = M_BO @ (self._Fb_ned + self._Fg_ned)
        M = _cross(p.r_RG, M_BO @ self._Fg_ned)
        Fp, Mp = self._propulsion(Omega, gamma)
        F = F + Fp
        M = M + Mp
        v_rel = state.V - wind.V_W
        q_dyn = self._surf_scale * float(v_rel @ v_rel)
        M = M + q_dyn * (self._B_surf_unit @ eta)
        d = p.damping
        if d.enabled:
            F = F - d.D_force * v_rel
            M = M - d.D_moment * state.omega
        return Wrench(F, M)

    def derivative(
        self,
        state: RigidState,
        Omega: np.ndarray,
        gamma: np.ndarray,
        eta: np.ndarray,
        wind: WindState,
        form: str = "full",
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(V_dot, omega_dot, Phi_dot) for the given inputs.

        ``form="full"`` keeps the wind coupling and the expanded angular
        Coriolis terms; ``form="simple"`` uses the Jacobi-reduced still
        air equations.
        """
        p = self.params
        check_pitch_singularity(state.Phi[1])
        V, om = state.V, state.omega
        m, r = p.m, p.r_RG
        wr = self.total_wrench(state, Omega, gamma, eta, wind)

        top = wr.F - m * _cross(om, _cross(om, r)) - _cross(om, self.M_a @ V)
        if form == "full":
            bottom = (
                wr.M
                - _cross(om, self.J_a @ om)
                - _cross(om, _cross(r, m * V))
                + m * _cross(V, _cross(r, om))
            )
            top = top + self.M_Ba @ wind.V_W_dot + _cross(om, self.M_Ba @ wind.V_W)
            bottom = (
                bottom
                + self.J_Ba @ wind.omega_W_dot
                + _cross(om, self.J_Ba @ wind.omega_W)
            )
        elif form == "simple":
            bottom = (
                wr.M
                - _cross(om, self.J_a @ om)
                + _cross(r, m * _cross(V, om))
            )
        else:
            raise ValueError(f"unknown form {form!r}")

        acc = self.M_bar_inv @ np.concatenate([top, bottom])
        return acc[0:3], acc[3:6], attitude_rates(state.Phi, om)

    def derivative_vector(self, x: np.ndarray, inputs, wind: WindState) -> np.ndarray:
        """Flat 9-state derivative, scalarized (hot integration path).

        Same physics as :meth:`derivative` in full form; kept in exact
        agreement by the dynamics test suite.
        """
        Omega, gamma, eta = inputs
        u, v, w = x[0], x[1], x[2]
        pq, qq, rq = x[3], x[4], x[5]
        phi, theta = x[6], x[7]
        if abs(abs(theta) - 1.5707963267948966) < THETA_SINGULARITY_GUARD:
            raise SingularAttitudeError(
                f"pitch angle {math.degrees(theta):.2f} deg within guard band of +-90 deg"
            )
        c = self._c  # cached scalar constants
        m = c["m"]
        rx_, ry_, rz_ = c["r"]

        sph, cph = math.sin(phi), math.cos(phi)
        sth, cth = math.sin(theta), math.cos(theta)
        # Third column of M_BO: both weight and buoyancy act along NED z.
        zc0, zc1, zc2 = -sth, sph * cth, cph * cth
        fz = c["Fgz"] + c["Fbz"]
        F0, F1, F2 = fz * zc0, fz * zc1, fz * zc2
        gx, gy, gz = c["Fgz"] * zc0, c["Fgz"] * zc1, c["Fgz"] * zc2
        M0 = ry_ * gz - rz_ * gy
        M1 = rz_ * gx - rx_ * gz
        M2 = rx_ * gy - ry_ * gx

        # Propulsion, scalar loop over the four rotors.
        rho = c["rho"]
        kT, kNs = c["kT"], c["kNs"]
        px, py, pz = c["px"], c["py"], c["pz"]
        for i in range(4):
            om_i = Omega[i]
            sg, cg = math.sin(gamma[i]), math.cos(gamma[i])
            thrust = rho * kT[i] * om_i * om_i
            torque = rho * kNs[i] * om_i * om_i
            F0 += sg * thrust
            F2 -= cg * thrust
            M0 += -sg * torque - py[i] * cg * thrust
            M1 += (pz[i] * sg + px[i] * cg) * thrust
            M2 += cg * torque - py[i] * sg * thrust

        if wind is CALM_WIND:
            vr0, vr1, vr2 = u, v, w
        else:
            vw = wind.V_W
            vr0, vr1, vr2 = u - vw[0], v - vw[1], w - vw[2]
        q_dyn = c["surf"] * (vr0 * vr0 + vr1 * vr1 + vr2 * vr2)
        bs = c["Bs"]
        e0, e1, e2 = eta[0], eta[1], eta[2]
        M0 += q_dyn * (bs[0] * e0 + bs[1] * e1 + bs[2] * e2)
        M1 += q_dyn * (bs[3] * e0 + bs[4] * e1 + bs[5] * e2)
        M2 += q_dyn * (bs[6] * e0 + bs[7] * e1 + bs[8] * e2)
        if c["damp"]:
            df, dm = c["Df"], c["Dm"]
            F0 -= df[0] * vr0
            F1 -= df[1] * vr1
            F2 -= df[2] * vr2
            M0 -= dm[0] * pq
            M1 -= dm[1] * qq
            M2 -= dm[2] * rq

        # omega x r and omega x (omega x r)
        a0 = qq * rz_ - rq * ry_
        a1 = rq * rx_ - pq * rz_
        a2 = pq * ry_ - qq * rx_
        wxa0 = qq * a2 - rq * a1
        wxa1 = rq * a0 - pq * a2
        wxa2 = pq * a1 - qq * a0
        # omega x (M_a V)
        ma = c["Ma"]
        mv0 = ma[0] * u + ma[1] * v + ma[2] * w
        mv1 = ma[3] * u + ma[4] * v + ma[5] * w
        mv2 = ma[6] * u + ma[7] * v + ma[8] * w
        top0 = F0 - m * wxa0 - (qq * mv2 - rq * mv1)
        top1 = F1 - m * wxa1 - (rq * mv0 - pq * mv2)
        top2 = F2 - m * wxa2 - (pq * mv1 - qq * mv0)

        # omega x (J_a omega)
        ja = c["Ja"]
        jw0 = ja[0] * pq + ja[1] * qq + ja[2] * rq
        jw1 = ja[3] * pq + ja[4] * qq + ja[5] * rq
        jw2 = ja[6] * pq + ja[7] * qq + ja[8] * rq
        # r x mV, then omega x (r x mV)
        b0 = m * (ry_ * w - rz_ * v)
        b1 = m * (rz_ * u - rx_ * w)
        b2 = m * (rx_ * v - ry_ * u)
        # r x omega, then m V x (r x omega)
        d0 = ry_ * rq - rz_ * qq
        d1 = rz_ * pq - rx_ * rq
        d2 = rx_ * qq - ry_ * pq
        bot0 = (
            M0
            - (qq * jw2 - rq * jw1)
            - (qq * b2 - rq * b1)
            + m * (v * d2 - w * d1)
        )
        bot1 = (
            M1
            - (rq * jw0 - pq * jw2)
            - (rq * b0 - pq * b2)
            + m * (w * d0 - u * d2)
        )
        bot2 = (
            M2
            - (pq * jw1 - qq * jw0)
            - (pq * b1 - qq * b0)
            + m * (u * d1 - v * d0)
        )

        rhs = np.empty(6)
        rhs[0], rhs[1], rhs[2] = top0, top1, top2
        rhs[3], rhs[4], rhs[5] = bot0, bot1, bot2
        if wind is not CALM_WIND:
            om3 = x[3:6]
            rhs[0:3] += self.M_Ba @ wind.V_W_dot + _cross(om3, self.M_Ba @ wind.V_W)
            rhs[3:6] += self.J_Ba @ wind.omega_W_dot + _cross(
                om3, self.J_Ba @ wind.omega_W
            )
        acc = self.M_bar_inv @ rhs

        tth = sth / cth
        out = np.empty(9)
        out[0:6] = acc
        out[6] = pq + sph * tth * qq + cph * tth * rq
        out[7] = cph * qq - sph * rq
        out[8] = (sph * qq + cph * rq) / cth
        return out

    def rk4_step(self, x: np.ndarray, inputs, wind: WindState, dt: float) -> np.ndarray:
        """Classical RK4 with inputs and wind held over the step."""
        f = self.derivative_vector
        k1 = f(x, inputs, wind)
        k2 = f(x + 0.5 * dt * k1, inputs, wind)
        k3 = f(x + 0.5 * dt * k2, inputs, wind)
        k4 = f(x + dt * k3, inputs, wind)
        return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def state_derivative(
    state: RigidState,
    actuators,
    wind: WindState,
    params: AirshipParams,
    form: str = "full",
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-shot derivative evaluation (see :class:`PlantModel`).

    ``actuators`` is anything with Omega/gamma/eta attributes or a
    (Omega, gamma, eta) tuple.
    """
    Omega, gamma, eta = _unpack_actuators(actuators)
    return PlantModel(params).derivative(state, Omega, gamma, eta, wind, form=form)


def integrate_step(
    state: RigidState,
    actuators,
    wind: WindState,
    params: AirshipParams,
    dt: float,
) -> RigidState:
    """Advance the rigid state by one RK4 step of size ``dt``."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    Omega, gamma, eta = _unpack_actuators(actuators)
    model = PlantModel(params)
    x = model.rk4_step(state.as_vector(), (Omega, gamma, eta), wind, dt)
    return RigidState.from_vector(x)


def _unpack_actuators(actuators):
    if hasattr(actuators, "Omega"):
        return actuators.Omega, actuators.gamma, actuators.eta
    return actuators
