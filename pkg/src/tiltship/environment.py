"""Wind disturbance generation: discrete gust and Dryden-style turbulence.

The gust is a classic "1 - cosine" pulse defined in the NED frame; the
harness rotates it into body axes before it reaches the plant.  Spatial
gust length is converted to a duration by frozen-field advection at the
airspeed when the gust is sampled.

Turbulence uses the standard Dryden shaping filters (first order along
x, second order in y/z), bilinear-discretized and driven by seeded
Gaussian noise, so identical seeds reproduce identical wind sequences.
Outputs are body-frame velocity components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import WindState


@dataclass
class GustSpec:
    """One discrete gust event ("from below and from the left")."""

    t_start: float = 15.0
    amplitude: float = 3.0          # m/s
    length: float = 3.0             # m
    # NED components: up (-z) and left-to-right (+y), equal magnitudes.
    direction: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 1.0, -1.0]) / math.sqrt(2.0)
    )

    def __post_init__(self):
        self.direction = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(self.direction)
        if n > 0.0:
            self.direction = self.direction / n
        if self.amplitude < 0.0 or self.length <= 0.0:
            raise ValueError("gust amplitude must be >= 0 and length > 0")


def gust_wind(spec: GustSpec, t: float, airspeed: float) -> WindState:
    """NED-frame gust wind with its analytic time derivative.

    V_W(t) = A/2 * (1 - cos(2 pi (t - t0) / T)) * dir over one period T,
    zero outside; T = length / max(airspeed, 0.5).
    """
    T = spec.length / max(airspeed, 0.5)
    tau = t - spec.t_start
    if tau < 0.0 or tau > T:
        return WindState.calm()
    phase = 2.0 * math.pi * tau / T
    mag = 0.5 * spec.amplitude * (1.0 - math.cos(phase))
    mag_dot = 0.5 * spec.amplitude * (2.0 * math.pi / T) * math.sin(phase)
    return WindState(V_W=mag * spec.direction, V_W_dot=mag_dot * spec.direction)


@dataclass
class TurbulenceSpec:
    sigma: np.ndarray = field(default_factory=lambda: 0.8 * np.ones(3))  # m/s
    length_scale: np.ndarray = field(default_factory=lambda: 50.0 * np.ones(3))  # m
    seed: int = 0

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.length_scale = np.asarray(self.length_scale, dtype=float)
        if np.any(self.sigma < 0.0) or np.any(self.length_scale <= 0.0):
            raise ValueError("sigma must be >= 0 and length scales > 0")


class _Tustin2(object):
    """Bilinear-discretized (a1 s + a0) / (s^2 + b1 s + b0) filter."""

    def __init__(self):
        self.x1 = 0.0
        self.x2 = 0.0
        self.y1 = 0.0
        self.y2 = 0.0

    def step(self, x: float, a1: float, a0: float, b1: float, b0: float, dt: float):
        k = 2.0 / dt
        den0 = k * k + b1 * k + b0
        # y(z) coefficients from s -> k (1 - z^-1)/(1 + z^-1)
        c0 = (a1 * k + a0) / den0
        c1 = (2.0 * a0) / den0
        c2 = (a0 - a1 * k) / den0
        d1 = (2.0 * b0 - 2.0 * k * k) / den0
        d2 = (k * k - b1 * k + b0) / den0
        y = c0 * x + c1 * self.x1 + c2 * self.x2 - d1 * self.y1 - d2 * self.y2
        self.x2, self.x1 = self.x1, x
        self.y2, self.y1 = self.y1, y
        return y


class _Tustin1(object):
    """Bilinear-discretized a0 / (s + b0) filter."""

    def __init__(self):
        self.x1 = 0.0
        self.y1 = 0.0

    def step(self, x: float, a0: float, b0: float, dt: float):
        k = 2.0 / dt
        y = (a0 * (x + self.x1) - (b0 - k) * self.y1) / (k + b0)
        self.y1 = y
        self.x1 = x
        return y


class DrydenTurbulence:
    """Stateful Dryden turbulence generator at a fixed step size.

    Shaping filters (unit-PSD white noise input):

        H_u(s) = sigma_u sqrt(2 V / L_u) / (s + V/L_u)
        H_vw(s) = sigma sqrt(V / L) (s + V/(sqrt(3) L)) * sqrt(3) / (s + V/L)^2

    both normalized so the stationary output variance equals sigma^2.
    Driven by N(0, 1/dt) samples approximating continuous white noise.

    The reported wind acceleration is a band-limited derivative: the
    raw finite difference of shaped noise is white-like and would slam
    the plant's added-mass wind coupling with unphysical spikes.
    """

    DERIV_TAU = 0.1  # s, smoothing of the reported wind acceleration

    def __init__(self, spec: TurbulenceSpec, dt: float):
        self.spec = spec
        self.dt = dt
        self.rng = np.random.default_rng(spec.seed)
        self._fu = _Tustin1()
        self._fv = _Tustin2()
        self._fw = _Tustin2()
        self._prev = np.zeros(3)
        self._vdot = np.zeros(3)

    def step(self, airspeed: float) -> WindState:
        """Advance one step; returns body-frame turbulence velocity."""
        spec, dt = self.spec, self.dt
        V = max(airspeed, 0.5)
        n = self.rng.standard_normal(3) / math.sqrt(dt)

        out = np.zeros(3)
        if spec.sigma[0] > 0.0:
            a = V / spec.length_scale[0]
            out[0] = self._fu.step(n[0], spec.sigma[0] * math.sqrt(2.0 * a), a, dt)
        for idx, filt in ((1, self._fv), (2, self._fw)):
            if spec.sigma[idx] <= 0.0:
                continue
            a = V / spec.length_scale[idx]
            # sqrt(3)*sigma*sqrt(a) * (s + a/sqrt(3)) / (s + a)^2
            gain = math.sqrt(3.0 * a) * spec.sigma[idx]
            out[idx] = filt.step(
                n[idx], gain, gain * a / math.sqrt(3.0), 2.0 * a, a * a, dt
            )

        fd = (out - self._prev) / dt
        self._prev = out.copy()
        self._vdot = self._vdot + (fd - self._vdot) * (dt / self.DERIV_TAU)
        return WindState(V_W=out, V_W_dot=self._vdot.copy())


def dryden_step(
    turb: DrydenTurbulence, airspeed: float
) -> WindState:
    """Functional wrapper around :meth:`DrydenTurbulence.step`."""
    return turb.step(airspeed)
