"""Render figure sets from tiltship run logs.

Couples only to the log file contract: a CSV with named columns and an
optional JSON manifest next to it.  Six figure kinds mirror the usual
evaluation plots: outer/inner loop tracking, pseudo-control tracking
and rates, the allocation angle metric, and actuator positions with
their physical limits drawn as reference lines.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURE_KINDS = ("outer", "inner", "nu", "nu_dot", "angle", "actuators")

# Actuator limit lines [min, max] drawn in the actuators figure.
OMEGA_LIMITS = (0.0, 340.0)           # rad/s
GAMMA_LIMITS_DEG = (-75.0, 255.0)
ETA_LIMITS_DEG = (-40.0, 40.0)


class MissingColumnError(KeyError):
    """The log lacks a column a figure kind needs."""


@dataclass
class FigureSpec:
    log_path: str | Path
    kind: str
    out_path: str | Path

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; expected one of {FIGURE_KINDS}"
            )


def load_log(csv_path: str | Path) -> tuple[dict, dict]:
    """Read a run log CSV and its manifest sidecar (if present)."""
    csv_path = Path(csv_path)
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    if data.size == 0:
        raise ValueError(f"empty log: {csv_path}")
    columns = {name: np.atleast_1d(data[name]) for name in data.dtype.names}
    manifest = {}
    manifest_path = csv_path.with_suffix("").with_suffix(".manifest.json")
    if manifest_path.exists():
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    return columns, manifest


def _need(log: dict, *names: str) -> list[np.ndarray]:
    out = []
    for name in names:
        if name not in log:
            raise MissingColumnError(f"log is missing column {name!r}")
        out.append(log[name])
    return out


def _new_fig(n_rows: int, title: str):
    fig, axes = plt.subplots(
        n_rows, 1, figsize=(9.0, 2.2 * n_rows + 0.8), sharex=True
    )
    if n_rows == 1:
        axes = [axes]
    fig.suptitle(title)
    return fig, axes


def _finish(fig, axes, out_path: str | Path) -> Path:
    axes[-1].set_xlabel("t [s]")
    for ax in axes:
        ax.grid(True, alpha=0.3)
        ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=110, metadata={"Software": "tiltship-plots"})
    plt.close(fig)
    return out_path


def _plot_outer(log, axes):
    t = log["t"]
    axes[0].plot(t, log["u_C_cmd"], "k--", lw=1, label="cmd")
    axes[0].plot(t, log["u_C_meas"], lw=1.2, label="meas")
    axes[0].set_ylabel("u_C [m/s]")
    axes[1].plot(t, log["w_C_cmd"], "k--", lw=1, label="cmd")
    axes[1].plot(t, log["w_C_meas"], lw=1.2, label="meas")
    axes[1].set_ylabel("w_C [m/s]")
    axes[2].plot(t, np.degrees(log["psi_dot_cmd"]), "k--", lw=1, label="cmd")
    axes[2].plot(t, np.degrees(log["psi_dot_meas"]), lw=1.2, label="meas")
    axes[2].set_ylabel("psi rate [deg/s]")


def _plot_inner(log, axes):
    t = log["t"]
    pairs = [
        ("u", "u_ref", "u [m/s]"),
        ("w", "w_ref", "w [m/s]"),
        ("p", "p_ref", "p [rad/s]"),
        ("q", "q_ref", "q [rad/s]"),
        ("r", "r_ref", "r [rad/s]"),
    ]
    for ax, (meas, ref, label) in zip(axes, pairs):
        ax.plot(t, log[ref], "k--", lw=1, label="ref")
        ax.plot(t, log[meas], lw=1.2, label="meas")
        ax.set_ylabel(label)


_NU_LABELS = [
    ("L", "L_P [N m]"),
    ("M", "M_P [N m]"),
    ("N", "N_P [N m]"),
    ("X", "X_P [N]"),
    ("Z", "Z_P [N]"),
]


def _plot_nu(log, axes):
    t = log["t"]
    for ax, (c, label) in zip(axes, _NU_LABELS):
        ax.plot(t, log[f"nu_cmd_{c}"], ":", color="gray", lw=1, label="cmd")
        ax.plot(t, log[f"nu_ref_{c}"], "k--", lw=1, label="ref")
        ax.plot(t, log[f"nu_ach_{c}"], lw=1.2, label="achieved")
        ax.set_ylabel(label)


def _plot_nu_dot(log, axes):
    t = log["t"]
    for ax, (c, label) in zip(axes, _NU_LABELS):
        ax.plot(t, log[f"nu_dot_cmd_{c}"], "k--", lw=1, label="cmd")
        ax.plot(t, log[f"nu_dot_ach_{c}"], lw=1.2, label="achieved")
        ax.set_ylabel(label + "/s")


def _plot_angle(log, axes):
    t = log["t"]
    axes[0].plot(t, np.degrees(log["angle_nu_dot"]), lw=1.2, label="angle")
    axes[0].set_ylabel("angle(cmd, ach) [deg]")
    axes[1].plot(t, log["alloc_saturated"], lw=1.0, label="saturated channels")
    axes[1].set_ylabel("count")


def _plot_actuators(log, axes):
    t = log["t"]
    for i in range(1, 5):
        axes[0].plot(t, log[f"Omega_{i}"], lw=1.0, label=f"rotor {i}")
    for y in OMEGA_LIMITS:
        axes[0].axhline(y, color="red", ls=":", lw=0.8)
    axes[0].set_ylabel("Omega [rad/s]")
    for i in range(1, 5):
        axes[1].plot(t, np.degrees(log[f"gamma_{i}"]), lw=1.0, label=f"tilt {i}")
    for y in GAMMA_LIMITS_DEG:
        axes[1].axhline(y, color="red", ls=":", lw=0.8)
    axes[1].set_ylabel("tilt [deg]")
    for i in range(1, 4):
        axes[2].plot(t, np.degrees(log[f"eta_{i}"]), lw=1.0, label=f"surface {i}")
    for y in ETA_LIMITS_DEG:
        axes[2].axhline(y, color="red", ls=":", lw=0.8)
    axes[2].set_ylabel("deflection [deg]")


_RENDERERS = {
    "outer": (_plot_outer, 3, ["u_C_cmd", "u_C_meas", "w_C_cmd", "w_C_meas", "psi_dot_cmd", "psi_dot_meas"]),
    "inner": (_plot_inner, 5, ["u", "u_ref", "w", "w_ref", "p", "p_ref", "q", "q_ref", "r", "r_ref"]),
    "nu": (_plot_nu, 5, [f"nu_{k}_{c}" for k in ("cmd", "ref", "ach") for c in "LMNXZ"]),
    "nu_dot": (_plot_nu_dot, 5, [f"nu_dot_{k}_{c}" for k in ("cmd", "ach") for c in "LMNXZ"]),
    "angle": (_plot_angle, 2, ["angle_nu_dot", "alloc_saturated"]),
    "actuators": (
        _plot_actuators,
        3,
        [f"Omega_{i}" for i in range(1, 5)]
        + [f"gamma_{i}" for i in range(1, 5)]
        + [f"eta_{i}" for i in range(1, 4)],
    ),
}


def render(spec: FigureSpec) -> Path:
    """Render one figure kind from a run log to an image file."""
    log, manifest = load_log(spec.log_path)
    renderer, n_rows, required = _RENDERERS[spec.kind]
    _need(log, "t", *required)
    name = manifest.get("scenario", {}).get("name", Path(spec.log_path).stem)
    fig, axes = _new_fig(n_rows, f"{name}: {spec.kind}")
    renderer(log, axes)
    return _finish(fig, axes, spec.out_path)
