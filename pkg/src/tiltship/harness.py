"""Scenario definition, closed-loop execution, logging, and metrics.

A scenario couples a command schedule with wind disturbances, plant or
controller parameter overrides (robustness studies run the plant on
different numbers than the controller model), controller toggles, and a
seed.  Runs are fully deterministic: same scenario + seed = bit
identical logs.

Timing: the controller runs at 100 Hz with zero-order-hold commands;
the rigid body integrates with RK4 at 500 Hz (5 substeps per control
period).  Actuator states advance once per control period with the
realized rate held constant across the substeps, which is exactly the
rate model the allocator's phase-plane bounds assume.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .actuators import ActuatorSuite, actuator_step
from .autopilot import Autopilot, ControllerToggles, Measurements
from .dynamics import (
    CALM_WIND,
    PlantModel,
    RigidState,
    SingularAttitudeError,
    WindState,
    attitude_rates,
    cross3,
    rotation_ned_to_body,
)
from .environment import DrydenTurbulence, GustSpec, TurbulenceSpec, gust_wind
from .estimation import specific_force_at_cg
from .inner_loop import ControllerGains
from .outer_loop import OuterCommands, c_frame_velocity, stick_to_commands
from .params import AirshipParams, apply_overrides, default_params, params_to_config


@dataclass
class ScheduleEntry:
    t: float
    commands: OuterCommands


@dataclass
class Scenario:
    name: str = "unnamed"
    duration: float = 60.0
    seed: int = 0
    dt_ctrl: float = 0.01
    plant_substeps: int = 5
    schedule: list[ScheduleEntry] = field(default_factory=list)
    gust: GustSpec | None = None
    turbulence: TurbulenceSpec | None = None
    plant_overrides: dict = field(default_factory=dict)
    model_overrides: dict = field(default_factory=dict)
    toggles: ControllerToggles = field(default_factory=ControllerToggles)
    damping: bool = False
    gains: dict = field(default_factory=dict)
    init: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")
        times = [e.t for e in self.schedule]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("schedule times must be monotone")

    def commands_at(self, t: float) -> OuterCommands:
        """Zero-order hold over the schedule."""
        current = OuterCommands()
        for entry in self.schedule:
            if entry.t <= t:
                current = entry.commands
            else:
                break
        return current

    @classmethod
    def from_dict(cls, cfg: dict) -> "Scenario":
        schedule = []
        for item in cfg.get("schedule", []):
            if "stick" in item:
                cmds = stick_to_commands(np.array(item["stick"], dtype=float))
            else:
                cmds = OuterCommands(
                    u_C_cmd=float(item.get("u", 0.0)),
                    w_C_cmd=float(item.get("w", 0.0)),
                    psi_dot_cmd=math.radians(float(item.get("psi_dot_deg", 0.0))),
                )
            schedule.append(ScheduleEntry(float(item["t"]), cmds))

        gust = None
        if cfg.get("gust"):
            gc = cfg["gust"]
            kwargs = {
                k: gc[k] for k in ("t_start", "amplitude", "length") if k in gc
            }
            if "direction" in gc:
                kwargs["direction"] = np.array(gc["direction"], dtype=float)
            gust = GustSpec(**kwargs)

        turbulence = None
        if cfg.get("turbulence"):
            tc = cfg["turbulence"]
            turbulence = TurbulenceSpec(
                sigma=np.array(tc.get("sigma", [0.8, 0.8, 0.8]), dtype=float),
                length_scale=np.array(
                    tc.get("length_scale", [50.0, 50.0, 50.0]), dtype=float
                ),
                seed=int(cfg.get("seed", 0)),
            )

        tg = cfg.get("toggles", {})
        toggles = ControllerToggles(
            pch=tg.get("pch", True),
            nullspace=tg.get("nullspace", True),
            wind_comp=tg.get("wind_comp", True),
            surfaces=tg.get("surfaces", True),
        )
        return cls(
            name=cfg.get("name", "unnamed"),
            duration=float(cfg.get("duration", 60.0)),
            seed=int(cfg.get("seed", 0)),
            dt_ctrl=float(cfg.get("dt_ctrl", 0.01)),
            plant_substeps=int(cfg.get("plant_substeps", 5)),
            schedule=schedule,
            gust=gust,
            turbulence=turbulence,
            plant_overrides=dict(cfg.get("plant_overrides", {})),
            model_overrides=dict(cfg.get("model_overrides", {})),
            toggles=toggles,
            damping=bool(cfg.get("damping", False)),
            gains=dict(cfg.get("gains", {})),
            init=dict(cfg.get("init", {})),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Run log
# ---------------------------------------------------------------------------

_VEC_FIELDS = [
    ("state", ["u", "v", "w", "p", "q", "r", "phi", "theta", "psi"]),
    ("nu_cmd", ["nu_cmd_L", "nu_cmd_M", "nu_cmd_N", "nu_cmd_X", "nu_cmd_Z"]),
    ("nu_ref", ["nu_ref_L", "nu_ref_M", "nu_ref_N", "nu_ref_X", "nu_ref_Z"]),
    ("nu_ach", ["nu_ach_L", "nu_ach_M", "nu_ach_N", "nu_ach_X", "nu_ach_Z"]),
    (
        "nu_dot_cmd",
        ["nu_dot_cmd_L", "nu_dot_cmd_M", "nu_dot_cmd_N", "nu_dot_cmd_X", "nu_dot_cmd_Z"],
    ),
    (
        "nu_dot_ach",
        ["nu_dot_ach_L", "nu_dot_ach_M", "nu_dot_ach_N", "nu_dot_ach_X", "nu_dot_ach_Z"],
    ),
    (
        "nu_dot_hedge",
        ["hedge_L", "hedge_M", "hedge_N", "hedge_X", "hedge_Z"],
    ),
]


class RunLog:
    """Column store of one run plus its manifest."""

    def __init__(self, columns: dict[str, np.ndarray], manifest: dict):
        self.columns = columns
        self.manifest = manifest

    def __getitem__(self, key: str) -> np.ndarray:
        return self.columns[key]

    def __len__(self) -> int:
        return len(self.columns["t"])

    @property
    def aborted(self) -> bool:
        return self.manifest.get("abort") is not None

    def save(self, out_dir: str | Path, stem: str | None = None) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = stem or self.manifest.get("scenario", {}).get("name", "run")
        csv_path = out_dir / f"{stem}.csv"
        names = list(self.columns.keys())
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            rows = np.column_stack([self.columns[n] for n in names])
            for row in rows:
                writer.writerow([repr(float(v)) for v in row])
        with open(out_dir / f"{stem}.manifest.json", "w") as fh:
            json.dump(self.manifest, fh, indent=2)
        return csv_path

    @classmethod
    def load(cls, csv_path: str | Path) -> "RunLog":
        csv_path = Path(csv_path)
        data = np.genfromtxt(csv_path, delimiter=",", names=True)
        columns = {name: np.atleast_1d(data[name]) for name in data.dtype.names}
        manifest_path = csv_path.with_suffix("").with_suffix(".manifest.json")
        manifest = {}
        if manifest_path.exists():
            with open(manifest_path) as fh:
                manifest = json.load(fh)
        return cls(columns, manifest)


# ---------------------------------------------------------------------------
# Closed-loop runner
# ---------------------------------------------------------------------------

def trim_rotor_speed(params: AirshipParams, tilt: np.ndarray) -> float:
    """Rotor speed that balances the net weight at the given tilt angles."""
    residual = max(params.m * params.g - params.F_B_net, 0.0)
    vertical = float(np.sum(np.cos(tilt)))
    if vertical <= 1e-6:
        return 0.0
    thrust = residual / vertical
    return math.sqrt(thrust / (params.rho_air * params.rotors[0].k_T))


def _initial_conditions(scenario: Scenario, plant_params: AirshipParams):
    init = scenario.init
    tilt_cfg = init.get("tilt_deg", [45.0, -45.0, -45.0, 45.0])
    if np.isscalar(tilt_cfg):
        tilt = math.radians(float(tilt_cfg)) * np.ones(4)
    else:
        tilt = np.radians(np.array(tilt_cfg, dtype=float))
    Omega0 = init.get("Omega0")
    if Omega0 is None:
        Omega0 = trim_rotor_speed(plant_params, tilt)
    suite = ActuatorSuite.from_params(
        plant_params, Omega=Omega0 * np.ones(4), gamma=tilt, eta=np.zeros(3)
    )
    state = RigidState(
        V=np.array([float(init.get("u0", 0.0)), 0.0, float(init.get("w0", 0.0))]),
        omega=np.zeros(3),
        Phi=np.array([0.0, math.radians(float(init.get("theta0_deg", 0.0))), 0.0]),
    )
    return state, suite


def _wind_to_body(wind_ned: WindState, Phi: np.ndarray, omega: np.ndarray) -> WindState:
    M_BO = rotation_ned_to_body(Phi)
    V_W = M_BO @ wind_ned.V_W
    V_W_dot = M_BO @ wind_ned.V_W_dot - cross3(omega, V_W)
    return WindState(V_W=V_W, V_W_dot=V_W_dot)


def run_scenario(
    scenario: Scenario, base_params: AirshipParams | None = None
) -> RunLog:
    """Execute one closed-loop run and return the full log."""
    base = base_params or default_params()
    plant_params = apply_overrides(base, scenario.plant_overrides)
    plant_params.damping.enabled = scenario.damping
    model_params = apply_overrides(base, scenario.model_overrides)
    model_params.damping.enabled = False

    gain_kwargs = dict(scenario.gains)
    for key in ("K_nu", "K_nu_ec", "K_act_opt"):
        if key in gain_kwargs and np.isscalar(gain_kwargs[key]):
            n = 8 if key == "K_act_opt" else 5
            gain_kwargs[key] = float(gain_kwargs[key]) * np.ones(n)
    gains = ControllerGains(**gain_kwargs) if gain_kwargs else ControllerGains()
    autopilot = Autopilot(
        model_params, gains=gains, dt=scenario.dt_ctrl, toggles=scenario.toggles
    )
    plant = PlantModel(plant_params)
    state, suite = _initial_conditions(scenario, plant_params)
    x = state.as_vector()

    dt_c = scenario.dt_ctrl
    dt_p = dt_c / scenario.plant_substeps
    n_steps = int(round(scenario.duration / dt_c))

    turb = (
        DrydenTurbulence(scenario.turbulence, dt_p) if scenario.turbulence else None
    )
    gust_airspeed = None  # frozen at gust onset
    has_wind = scenario.gust is not None or turb is not None

    rows: list[list[float]] = []
    names = _column_names()
    abort = None
    wind_body = CALM_WIND

    for k in range(n_steps):
        t = k * dt_c
        st = RigidState.from_vector(x)
        try:
            # Truth derivatives for the sensor taps.
            xdot = plant.derivative_vector(
                x, (suite.Omega, suite.gamma, suite.eta), wind_body
            )
            V_dot_true, om_dot_true = xdot[0:3], xdot[3:6]
        except SingularAttitudeError as exc:
            abort = {"t": t, "reason": str(exc)}
            break
        if not np.all(np.isfinite(x)):
            abort = {"t": t, "reason": "non-finite state"}
            break

        g_body = rotation_ned_to_body(st.Phi) @ np.array([0.0, 0.0, plant_params.g])
        f_G = specific_force_at_cg(
            V_dot_true, om_dot_true, st.V, st.omega, g_body, plant_params.r_RG
        )
        airspeed = float(np.linalg.norm(st.V - wind_body.V_W))
        meas = Measurements(
            V=st.V,
            omega=st.omega,
            Phi=st.Phi,
            f_G=f_G,
            airspeed=airspeed,
            Omega=suite.Omega,
            gamma=suite.gamma,
            eta=suite.eta,
        )
        if k == 0:
            autopilot.reset(meas)
        pilot = scenario.commands_at(t)
        try:
            out = autopilot.step(meas, pilot)
        except SingularAttitudeError as exc:
            abort = {"t": t, "reason": str(exc)}
            break

        new_suite = actuator_step(suite, out.commands, dt_c)
        rates = (new_suite.positions - suite.positions) / dt_c

        rows.append(
            _log_row(t, st, pilot, out, suite, wind_body, airspeed)
        )

        # Plant substeps with linearly advancing actuators.
        if scenario.gust and gust_airspeed is None and t + dt_c >= scenario.gust.t_start:
            gust_airspeed = max(airspeed, 0.5)
        try:
            positions = suite.positions
            for j in range(scenario.plant_substeps):
                tau = t + j * dt_p
                if has_wind:
                    wind_ned = (
                        gust_wind(scenario.gust, tau + 0.5 * dt_p, gust_airspeed)
                        if scenario.gust is not None and gust_airspeed is not None
                        else WindState.calm()
                    )
                    wind_body = _wind_to_body(wind_ned, x[6:9], x[3:6])
                    if turb is not None:
                        turb_w = turb.step(
                            float(np.linalg.norm(x[0:3] - wind_body.V_W))
                        )
                        wind_body = WindState(
                            V_W=wind_body.V_W + turb_w.V_W,
                            V_W_dot=wind_body.V_W_dot + turb_w.V_W_dot,
                        )
                u_mid = positions + rates * ((j + 0.5) * dt_p)
                inputs = (u_mid[0:4], u_mid[4:8], u_mid[8:11])
                x = plant.rk4_step(x, inputs, wind_body, dt_p)
        except SingularAttitudeError as exc:
            abort = {"t": t, "reason": str(exc)}
            break
        suite = new_suite

    columns = {
        name: np.array([row[i] for row in rows]) for i, name in enumerate(names)
    }
    manifest = {
        "columns": names,
        "scenario": _scenario_manifest(scenario),
        "seed": scenario.seed,
        "dt_ctrl": dt_c,
        "plant_substeps": scenario.plant_substeps,
        "config_hash": _config_hash(plant_params, model_params),
        "abort": abort,
        "completed_time": rows[-1][0] + dt_c if rows else 0.0,
        "units": _column_units(),
    }
    return RunLog(columns, manifest)


def _scenario_manifest(scenario: Scenario) -> dict:
    return {
        "name": scenario.name,
        "duration": scenario.duration,
        "seed": scenario.seed,
        "damping": scenario.damping,
        "plant_overrides": scenario.plant_overrides,
        "model_overrides": scenario.model_overrides,
        "gust": scenario.gust is not None,
        "turbulence": scenario.turbulence is not None,
        "toggles": {
            "pch": scenario.toggles.pch,
            "nullspace": scenario.toggles.nullspace,
            "wind_comp": scenario.toggles.wind_comp,
            "surfaces": scenario.toggles.surfaces,
        },
    }


def _config_hash(plant_params: AirshipParams, model_params: AirshipParams) -> str:
    blob = json.dumps(
        {
            "plant": params_to_config(plant_params),
            "model": params_to_config(model_params),
        },
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _column_names() -> list[str]:
    names = ["t"]
    for _, cols in _VEC_FIELDS:
        names.extend(cols)
    names += [
        "u_C_cmd", "w_C_cmd", "psi_dot_cmd",
        "u_C_meas", "w_C_meas", "psi_dot_meas",
        "u_ref", "w_ref", "p_ref", "q_ref", "r_ref",
        "p_cmd", "q_cmd", "r_cmd",
        "theta_des", "phi_cmd", "psi_dot_total",
        "vdot_meas_x", "vdot_meas_y", "vdot_meas_z",
        "omdot_est_p", "omdot_est_q", "omdot_est_r",
        "alloc_c", "alloc_iterations", "alloc_saturated", "ns_leak",
        "angle_nu_dot",
        "Omega_1", "Omega_2", "Omega_3", "Omega_4",
        "gamma_1", "gamma_2", "gamma_3", "gamma_4",
        "eta_1", "eta_2", "eta_3",
        "cmd_Omega_1", "cmd_Omega_2", "cmd_Omega_3", "cmd_Omega_4",
        "cmd_gamma_1", "cmd_gamma_2", "cmd_gamma_3", "cmd_gamma_4",
        "cmd_eta_1", "cmd_eta_2", "cmd_eta_3",
        "wind_bx", "wind_by", "wind_bz", "airspeed",
    ]
    return names


def _column_units() -> dict:
    return {
        "t": "s",
        "u|v|w|u_*|w_*": "m/s",
        "p|q|r|psi_dot*": "rad/s",
        "phi|theta|psi|gamma_*|eta_*": "rad",
        "Omega_*": "rad/s",
        "nu_*_L|M|N": "N*m",
        "nu_*_X|Z": "N",
        "nu_dot_*": "N/s or N*m/s",
        "angle_nu_dot": "rad",
    }


def angle_between(a: np.ndarray, b: np.ndarray, floor: float = 1e-9) -> float:
    """Angle between two vectors; zero when either is negligible."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < floor or nb < floor:
        return 0.0
    cosv = float(np.dot(a, b) / (na * nb))
    return math.acos(max(-1.0, min(1.0, cosv)))


def _log_row(t, st, pilot, out, suite, wind_body, airspeed) -> list[float]:
    d = out.diag
    V_C = c_frame_velocity(st.V, st.Phi)
    psi_dot_meas = attitude_rates(st.Phi, st.omega)[2]
    row = [t]
    row += list(st.as_vector())
    for key in ("nu_cmd", "nu_ref", "nu_ach", "nu_dot_cmd", "nu_dot_ach", "nu_dot_hedge"):
        row += list(d[key])
    row += [
        pilot.u_C_cmd, pilot.w_C_cmd, pilot.psi_dot_cmd,
        d["u_C_meas"], V_C[2], psi_dot_meas,
        d["V_ref"][0], d["V_ref"][1],
        d["omega_ref"][0], d["omega_ref"][1], d["omega_ref"][2],
        d["omega_cmd"][0], d["omega_cmd"][1], d["omega_cmd"][2],
        d["theta_des"], d["phi_cmd"], d["psi_dot_total"],
        d["V_dot_meas"][0], d["V_dot_meas"][1], d["V_dot_meas"][2],
        d["omega_dot_est"][0], d["omega_dot_est"][1], d["omega_dot_est"][2],
        d["alloc_c"], float(d["alloc_iterations"]), float(d["alloc_saturated"]),
        d["ns_leak"],
        angle_between(d["nu_dot_cmd"], d["nu_dot_ach"]),
    ]
    row += list(suite.Omega) + list(suite.gamma) + list(suite.eta)
    row += list(out.commands)
    row += [wind_body.V_W[0], wind_body.V_W[1], wind_body.V_W[2], airspeed]
    return row


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def compute_metrics(log: RunLog) -> dict:
    """Tracking/allocation metrics from a run log."""
    if len(log) == 0:
        raise ValueError("empty log")
    dt = float(log["t"][1] - log["t"][0]) if len(log) > 1 else 0.0

    def rms(x):
        return float(np.sqrt(np.mean(np.square(x))))

    metrics: dict = {}
    for chan, meas, cmd in [
        ("u_C", "u_C_meas", "u_C_cmd"),
        ("w_C", "w_C_meas", "w_C_cmd"),
        ("psi_dot", "psi_dot_meas", "psi_dot_cmd"),
    ]:
        err = log[meas] - log[cmd]
        metrics[f"rms_err_{chan}"] = rms(err)
        metrics[f"max_err_{chan}"] = float(np.max(np.abs(err)))

    for chan, meas, ref in [
        ("u_B", "u", "u_ref"),
        ("w_B", "w", "w_ref"),
        ("p", "p", "p_ref"),
        ("q", "q", "q_ref"),
        ("r", "r", "r_ref"),
    ]:
        err = log[meas] - log[ref]
        metrics[f"rms_ref_err_{chan}"] = rms(err)

    angles = np.array(
        [
            angle_between(
                np.array([log[f"nu_dot_cmd_{c}"][i] for c in "LMNXZ"]),
                np.array([log[f"nu_dot_ach_{c}"][i] for c in "LMNXZ"]),
            )
            for i in range(len(log))
        ]
    )
    metrics["angle_max"] = float(np.max(angles))
    metrics["angle_mean"] = float(np.mean(angles))
    metrics["angle_frac_nonzero"] = float(np.mean(angles > 1e-6))

    hedge = np.abs(
        np.column_stack([log[f"hedge_{c}"] for c in "LMNXZ"])
    )
    metrics["pch_activity"] = float(np.sum(hedge) * dt)

    sat = {}
    for i in range(1, 5):
        om = log[f"Omega_{i}"]
        sat[f"Omega_{i}"] = float(np.sum((om >= 340.0 - 1e-6) | (om <= 1e-6)) * dt)
    for i in range(1, 5):
        ga = np.degrees(log[f"gamma_{i}"])
        sat[f"gamma_{i}"] = float(np.sum((ga >= 255.0 - 1e-4) | (ga <= -75.0 + 1e-4)) * dt)
    for i in range(1, 4):
        et = np.degrees(log[f"eta_{i}"])
        sat[f"eta_{i}"] = float(np.sum(np.abs(et) >= 40.0 - 1e-4) * dt)
    metrics["saturation_s"] = sat
    metrics["alloc_c_min"] = float(np.min(log["alloc_c"]))
    metrics["alloc_iterations_max"] = float(np.max(log["alloc_iterations"]))
    metrics["aborted"] = log.aborted
    return metrics
