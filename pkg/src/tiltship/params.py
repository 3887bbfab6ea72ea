"""Physical parameters of the tilt-rotor airship and config file I/O.

The vehicle is a 16 m x 3.2 m helium airship with four tiltable rotors
(two forward, two aft, mounted on outriggers below the hull) and three
fins at 120 deg spacing carrying one control surface each.

Mass and inertia values are synthesized from the hull geometry: the hull
is treated as a prolate spheroid (semi-axes 8 m / 1.6 m), the vehicle is
trimmed 2 % heavy relative to the displaced air, and the structural
inertia uses a thin-shell approximation.  All of these are plain config
values and can be overridden from a JSON parameter file.

Conventions:
    - Body frame: x forward, y right, z down (NED-aligned at rest).
    - The reference point for all forces/moments is the center of
      buoyancy; ``r_RG`` points from it to the center of gravity.
    - SI units internally; config files carry angles in degrees.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

GRAVITY = 9.81          # m/s^2
RHO_AIR = 1.225         # kg/m^3, sea level
RHO_HELIUM = 0.1786     # kg/m^3, sea level

# Ellipsoid inertia factors for the default hull (a=8, b=1.6), frozen from
# ellipsoid_inertia_factors() so the default config is self-contained.
K1_DEFAULT = 0.059121
K2_DEFAULT = 0.894261
K3_DEFAULT = 0.699851


class ConfigError(ValueError):
    """A parameter set violates its physical invariants."""


def ellipsoid_inertia_factors(a: float, b: float) -> tuple[float, float, float]:
    """Potential-flow inertia factors of a prolate spheroid.

    Returns (k1, k2, k3): axial and transverse added-mass factors and the
    transverse added-inertia factor.  Closed-form evaluation of the
    classical Lamb/Munk expressions.

    Args:
        a: semi-major axis [m] (along body x).
        b: semi-minor axis [m].

    Raises:
        ConfigError: if not a > b > 0.
    """
    if not (a > b > 0.0):
        raise ConfigError(f"prolate spheroid requires a > b > 0, got a={a}, b={b}")
    e2 = 1.0 - (b / a) ** 2
    e = math.sqrt(e2)
    if e < 1e-4:
        # Sphere limit: k1 = k2 = 1/2, no added inertia.  The closed
        # form cancels catastrophically for tiny eccentricities.
        return 0.5, 0.5, 0.0
    log_term = math.log((1.0 + e) / (1.0 - e))
    alpha0 = 2.0 * (1.0 - e2) / e**3 * (0.5 * log_term - e)
    beta0 = 1.0 / e2 - (1.0 - e2) / (2.0 * e**3) * log_term
    k1 = alpha0 / (2.0 - alpha0)
    k2 = beta0 / (2.0 - beta0)
    k3 = (e2**2 * (beta0 - alpha0)) / (
        (2.0 - e2) * (2.0 * e2 - (2.0 - e2) * (beta0 - alpha0))
    )
    return k1, k2, k3


@dataclass
class RotorParams:
    """One tiltable rotor: geometry, coefficients, actuator limits.

    Tilt angle convention: 0 deg = rotor axis up (thrust along -z body),
    positive tilt rotates the nacelle towards +x (forward thrust).
    """

    r_RP: np.ndarray                    # installation position [m], (3,)
    sigma_dir: float = 1.0              # rotation direction, +1 or -1
    k_T: float = 5.0e-4                 # thrust coefficient
    k_N: float = 1.7e-5                 # torque coefficient
    omega_bw: float = 20.0              # motor bandwidth [rad/s]
    tilt_bw: float = 5.0                # tilt bandwidth [rad/s]
    omega_min: float = 0.0              # [rad/s]
    omega_max: float = 340.0            # [rad/s]
    omega_dot_min: float = -135.0       # [rad/s^2]
    omega_dot_max: float = 156.0        # [rad/s^2]
    gamma_min: float = math.radians(-75.0)
    gamma_max: float = math.radians(255.0)
    gamma_dot_min: float = math.radians(-45.0)
    gamma_dot_max: float = math.radians(45.0)

    def __post_init__(self):
        self.r_RP = np.asarray(self.r_RP, dtype=float)
        if self.k_T <= 0.0 or self.k_N <= 0.0:
            raise ConfigError("rotor coefficients k_T, k_N must be positive")
        if abs(abs(self.sigma_dir) - 1.0) > 1e-12:
            raise ConfigError("sigma_dir must be +1 or -1")


@dataclass
class FinParams:
    """One fin with its control surface.

    ``varphi`` is the fin rotation about body x (0 deg = fin pointing
    down in the body y-z plane per the moment transform convention).
    """

    varphi: float                       # fin rotation angle [rad]
    S_ref: float = 17.93                # reference area [m^2]
    l_ref: float = 14.53                # reference length [m]
    c_l_eta: float = -2.61e-3           # roll moment derivative [1/rad]
    c_m_eta: float = -1.28e-2           # pitch moment derivative [1/rad]
    eta_bw: float = 25.0                # servo bandwidth [rad/s]
    eta_min: float = math.radians(-40.0)
    eta_max: float = math.radians(40.0)
    eta_dot_min: float = math.radians(-300.0)
    eta_dot_max: float = math.radians(300.0)

    def __post_init__(self):
        if self.S_ref <= 0.0 or self.l_ref <= 0.0:
            raise ConfigError("fin reference area and length must be positive")


@dataclass
class DampingParams:
    """Synthetic aerodynamic damping, linear in relative velocity and rates.

    Stands in for the hull/fin aerodynamics so that wind disturbances
    decay; disabled by default for controller verification runs.
    """

    enabled: bool = False
    D_force: np.ndarray = field(default_factory=lambda: np.array([4.0, 40.0, 40.0]))
    D_moment: np.ndarray = field(default_factory=lambda: np.array([150.0, 600.0, 600.0]))

    def __post_init__(self):
        self.D_force = np.asarray(self.D_force, dtype=float)
        self.D_moment = np.asarray(self.D_moment, dtype=float)


@dataclass
class AirshipParams:
    """All physical constants of the airship plant.

    ``J``, ``M_v`` and ``J_v`` are full 3x3 matrices about the reference
    point.  Invariants are checked by :meth:`validate`.
    """

    m: float                            # total mass [kg]
    J: np.ndarray                       # inertia about reference point [kg m^2]
    M_v: np.ndarray                     # virtual (added) mass [kg]
    J_v: np.ndarray                     # virtual (added) inertia [kg m^2]
    r_RG: np.ndarray                    # reference point -> CG [m]
    F_B_net: float                      # net buoyancy force [N]
    rho_air: float = RHO_AIR
    rho_helium: float = RHO_HELIUM
    V_helium: float = 85.786            # lifting gas volume [m^3]
    g: float = GRAVITY
    semi_axes: tuple[float, float] = (8.0, 1.6)
    rotors: list[RotorParams] = field(default_factory=list)
    fins: list[FinParams] = field(default_factory=list)
    damping: DampingParams = field(default_factory=DampingParams)

    def __post_init__(self):
        self.J = np.asarray(self.J, dtype=float)
        self.M_v = np.asarray(self.M_v, dtype=float)
        self.J_v = np.asarray(self.J_v, dtype=float)
        self.r_RG = np.asarray(self.r_RG, dtype=float)

    # -- derived quantities -------------------------------------------------

    @property
    def hull_volume(self) -> float:
        """Volume of the prolate spheroid hull [m^3]."""
        a, b = self.semi_axes
        return 4.0 / 3.0 * math.pi * a * b * b

    def apparent_mass(self) -> np.ndarray:
        """M_a = m*I + M_v."""
        return self.m * np.eye(3) + self.M_v

    def apparent_inertia(self) -> np.ndarray:
        """J_a = J + J_v."""
        return self.J + self.J_v

    def buoyant_air_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """Apparent mass/inertia of the displaced air (wind coupling terms).

        The displaced air is modelled as a solid spheroid of ambient air.
        """
        a, b = self.semi_axes
        m_B = self.rho_air * self.hull_volume
        J_B = m_B * np.diag(
            [2.0 * b * b / 5.0, (a * a + b * b) / 5.0, (a * a + b * b) / 5.0]
        )
        return m_B * np.eye(3) + self.M_v, J_B + self.J_v

    def validate(self) -> None:
        """Raise ConfigError on invariant violations."""
        if self.m <= 0.0:
            raise ConfigError("mass must be positive")
        if self.F_B_net < 0.0:
            raise ConfigError("net buoyancy must be non-negative")
        for name, mat in (("J", self.J), ("M_v", self.M_v), ("J_v", self.J_v)):
            if mat.shape != (3, 3):
                raise ConfigError(f"{name} must be 3x3")
            if not np.allclose(mat, mat.T, atol=1e-9):
                raise ConfigError(f"{name} must be symmetric")
            if np.any(np.linalg.eigvalsh(mat) < -1e-9):
                raise ConfigError(f"{name} must be positive semidefinite")
        if len(self.rotors) != 4:
            raise ConfigError("exactly 4 rotors expected")
        if len(self.fins) != 3:
            raise ConfigError("exactly 3 fins expected")
        gm = generalized_mass(self)
        if abs(np.linalg.det(gm)) < 1e-9:
            raise ConfigError("generalized mass matrix is singular")


def generalized_mass(params: AirshipParams) -> np.ndarray:
    """6x6 generalized mass matrix [[M_a, -m*r_x], [m*r_x, J_a]].

    ``r_x`` is the skew matrix of the CG offset; the off-diagonal blocks
    couple linear and angular acceleration when the CG is off the
    reference point.
    """
    m = params.m
    rx = skew(params.r_RG)
    top = np.hstack([params.apparent_mass(), -m * rx])
    bottom = np.hstack([m * rx, params.apparent_inertia()])
    return np.vstack([top, bottom])


def skew(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric cross-product matrix of a 3-vector."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


# ---------------------------------------------------------------------------
# Default parameter set
# ---------------------------------------------------------------------------

_ROTOR_POSITIONS = (
    (4.0, 1.338, 1.49),     # front left
    (-4.0, 1.338, 1.38),    # aft left
    (-4.0, -1.338, 1.38),   # aft right
    (4.0, -1.338, 1.49),    # front right
)

_FIN_ANGLES_DEG = (30.0, 150.0, 270.0)


def default_params() -> AirshipParams:
    """Build the default airship parameter set.

    Mass model: hull volume from the spheroid, vehicle 2 % heavier than
    the displaced air, net buoyancy equal to the displaced-air weight,
    CG 1 m below the reference point.  Structural inertia from a thin
    prolate shell shifted to the reference point.  Added mass/inertia
    from the ellipsoid inertia factors.
    """
    a, b = 8.0, 1.6
    volume = 4.0 / 3.0 * math.pi * a * b * b
    m_displaced = RHO_AIR * volume
    m = 1.02 * m_displaced
    F_B_net = m_displaced * GRAVITY

    r_RG = np.array([0.0, 0.0, 1.0])
    # Thin-shell inertia about the hull centroid, then parallel axis to
    # the reference point (offset along z only affects Jxx, Jyy).
    J_shell_x = 2.0 / 3.0 * m * b * b
    J_shell_t = 1.0 / 3.0 * m * (a * a + b * b)
    z2 = r_RG[2] ** 2
    J = np.diag([J_shell_x + m * z2, J_shell_t + m * z2, J_shell_t])

    k1, k2, k3 = K1_DEFAULT, K2_DEFAULT, K3_DEFAULT
    M_v = m_displaced * np.diag([k1, k2, k2])
    # Added inertia uses the displaced-fluid moment arm (a^2+b^2)/5.
    J_v = m_displaced * (a * a + b * b) / 5.0 * np.diag([0.0, k3, k3])

    rotors = [RotorParams(r_RP=np.array(p)) for p in _ROTOR_POSITIONS]
    fins = [FinParams(varphi=math.radians(phi)) for phi in _FIN_ANGLES_DEG]

    return AirshipParams(
        m=m,
        J=J,
        M_v=M_v,
        J_v=J_v,
        r_RG=r_RG,
        F_B_net=F_B_net,
        V_helium=volume,
        semi_axes=(a, b),
        rotors=rotors,
        fins=fins,
    )


# ---------------------------------------------------------------------------
# Config file I/O (JSON, angles in degrees)
# ---------------------------------------------------------------------------

def params_to_config(params: AirshipParams) -> dict:
    """Serialize to a plain dict with angles in degrees."""
    deg = math.degrees
    return {
        "m": params.m,
        "J": params.J.tolist(),
        "M_v": params.M_v.tolist(),
        "J_v": params.J_v.tolist(),
        "r_RG": params.r_RG.tolist(),
        "F_B_net": params.F_B_net,
        "rho_air": params.rho_air,
        "rho_helium": params.rho_helium,
        "V_helium": params.V_helium,
        "g": params.g,
        "semi_axes": list(params.semi_axes),
        "damping": {
            "enabled": params.damping.enabled,
            "D_force": params.damping.D_force.tolist(),
            "D_moment": params.damping.D_moment.tolist(),
        },
        "rotors": [
            {
                "r_RP": r.r_RP.tolist(),
                "sigma_dir": r.sigma_dir,
                "k_T": r.k_T,
                "k_N": r.k_N,
                "omega_bw": r.omega_bw,
                "tilt_bw": r.tilt_bw,
                "omega_min": r.omega_min,
                "omega_max": r.omega_max,
                "omega_dot_min": r.omega_dot_min,
                "omega_dot_max": r.omega_dot_max,
                "gamma_min_deg": deg(r.gamma_min),
                "gamma_max_deg": deg(r.gamma_max),
                "gamma_dot_min_deg": deg(r.gamma_dot_min),
                "gamma_dot_max_deg": deg(r.gamma_dot_max),
            }
            for r in params.rotors
        ],
        "fins": [
            {
                "varphi_deg": deg(f.varphi),
                "S_ref": f.S_ref,
                "l_ref": f.l_ref,
                "c_l_eta": f.c_l_eta,
                "c_m_eta": f.c_m_eta,
                "eta_bw": f.eta_bw,
                "eta_min_deg": deg(f.eta_min),
                "eta_max_deg": deg(f.eta_max),
                "eta_dot_min_deg": deg(f.eta_dot_min),
                "eta_dot_max_deg": deg(f.eta_dot_max),
            }
            for f in params.fins
        ],
    }


def params_from_config(cfg: dict) -> AirshipParams:
    """Inverse of :func:`params_to_config`; validates the result.

    If ``F_B_net`` is absent it is computed from the lifting-gas volume
    and densities: g * V_helium * (rho_air - rho_helium).
    """
    rad = math.radians
    rho_air = cfg.get("rho_air", RHO_AIR)
    rho_helium = cfg.get("rho_helium", RHO_HELIUM)
    V_helium = cfg.get("V_helium", 85.786)
    g = cfg.get("g", GRAVITY)
    F_B_net = cfg.get("F_B_net")
    if F_B_net is None:
        F_B_net = g * V_helium * (rho_air - rho_helium)

    rotors = [
        RotorParams(
            r_RP=np.array(rc["r_RP"]),
            sigma_dir=rc.get("sigma_dir", 1.0),
            k_T=rc.get("k_T", 5.0e-4),
            k_N=rc.get("k_N", 1.7e-5),
            omega_bw=rc.get("omega_bw", 20.0),
            tilt_bw=rc.get("tilt_bw", 5.0),
            omega_min=rc.get("omega_min", 0.0),
            omega_max=rc.get("omega_max", 340.0),
            omega_dot_min=rc.get("omega_dot_min", -135.0),
            omega_dot_max=rc.get("omega_dot_max", 156.0),
            gamma_min=rad(rc.get("gamma_min_deg", -75.0)),
            gamma_max=rad(rc.get("gamma_max_deg", 255.0)),
            gamma_dot_min=rad(rc.get("gamma_dot_min_deg", -45.0)),
            gamma_dot_max=rad(rc.get("gamma_dot_max_deg", 45.0)),
        )
        for rc in cfg["rotors"]
    ]
    fins = [
        FinParams(
            varphi=rad(fc["varphi_deg"]),
            S_ref=fc.get("S_ref", 17.93),
            l_ref=fc.get("l_ref", 14.53),
            c_l_eta=fc.get("c_l_eta", -2.61e-3),
            c_m_eta=fc.get("c_m_eta", -1.28e-2),
            eta_bw=fc.get("eta_bw", 25.0),
            eta_min=rad(fc.get("eta_min_deg", -40.0)),
            eta_max=rad(fc.get("eta_max_deg", 40.0)),
            eta_dot_min=rad(fc.get("eta_dot_min_deg", -300.0)),
            eta_dot_max=rad(fc.get("eta_dot_max_deg", 300.0)),
        )
        for fc in cfg["fins"]
    ]
    dc = cfg.get("damping", {})
    damping = DampingParams(
        enabled=dc.get("enabled", False),
        D_force=np.array(dc.get("D_force", [4.0, 40.0, 40.0])),
        D_moment=np.array(dc.get("D_moment", [150.0, 600.0, 600.0])),
    )
    params = AirshipParams(
        m=cfg["m"],
        J=np.array(cfg["J"]),
        M_v=np.array(cfg["M_v"]),
        J_v=np.array(cfg["J_v"]),
        r_RG=np.array(cfg["r_RG"]),
        F_B_net=F_B_net,
        rho_air=rho_air,
        rho_helium=rho_helium,
        V_helium=V_helium,
        g=g,
        semi_axes=tuple(cfg.get("semi_axes", (8.0, 1.6))),
        rotors=rotors,
        fins=fins,
        damping=damping,
    )
    params.validate()
    return params


def load_params(path: str | Path) -> AirshipParams:
    with open(path) as fh:
        return params_from_config(json.load(fh))


def save_params(params: AirshipParams, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(params_to_config(params), fh, indent=2)


def apply_overrides(params: AirshipParams, overrides: dict) -> AirshipParams:
    """Return a copy of ``params`` with scale/replace overrides applied.

    Keys are parameter names; values are either absolute replacements or,
    with a ``*`` suffix on the key, multiplicative factors.  Matrix
    parameters are scaled elementwise.  Examples::

        {"m*": 1.5}                  # plant mass 50 % higher
        {"c_l_eta*": 0.5}            # fin derivatives halved
        {"gamma_dot_max*": 1.3}      # faster assumed tilt rate
    """
    out = copy.deepcopy(params)
    for key, value in overrides.items():
        scale = key.endswith("*")
        name = key[:-1] if scale else key
        if hasattr(out, name):
            cur = getattr(out, name)
            setattr(out, name, cur * value if scale else value)
        elif hasattr(out.rotors[0], name):
            for r in out.rotors:
                cur = getattr(r, name)
                setattr(r, name, cur * value if scale else value)
        elif hasattr(out.fins[0], name):
            for f in out.fins:
                cur = getattr(f, name)
                setattr(f, name, cur * value if scale else value)
        elif hasattr(out.damping, name):
            cur = getattr(out.damping, name)
            setattr(out.damping, name, cur * value if scale else value)
        else:
            raise ConfigError(f"unknown parameter override: {key}")
    out.validate()
    return out
