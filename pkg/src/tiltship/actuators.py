"""First-order actuator models with rate and absolute limits.

All eleven actuators (4 rotor speeds, 4 tilt angles, 3 surface
deflections) follow the same discrete law per control period::

    rate = clip(bw * (cmd - x), rate_min, rate_max)
    x   += rate * dt
    x    = clip(x, pos_min, pos_max)

The rate limit is applied to the first-order demanded rate before
integration (limit-then-integrate).  This matches the phase-plane bound
model used by the rate allocator: the rate the allocator budgets for is
exactly the rate the actuator realizes over the period.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import AirshipParams


@dataclass
class ActuatorSuite:
    """Positions of all actuators plus their limit/bandwidth tables.

    Channel order within the flat vectors: Omega1..4, gamma1..4, eta1..3.
    """

    Omega: np.ndarray                 # rotor speeds [rad/s], (4,)
    gamma: np.ndarray                 # tilt angles [rad], (4,)
    eta: np.ndarray                   # surface deflections [rad], (3,)
    bw: np.ndarray = field(repr=False, default=None)        # (11,)
    pos_min: np.ndarray = field(repr=False, default=None)
    pos_max: np.ndarray = field(repr=False, default=None)
    rate_min: np.ndarray = field(repr=False, default=None)
    rate_max: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self.Omega = np.asarray(self.Omega, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.eta = np.asarray(self.eta, dtype=float)

    @classmethod
    def from_params(
        cls,
        params: AirshipParams,
        Omega=None,
        gamma=None,
        eta=None,
    ) -> "ActuatorSuite":
        rotors, fins = params.rotors, params.fins
        suite = cls(
            Omega=np.zeros(4) if Omega is None else np.array(Omega, dtype=float),
            gamma=np.zeros(4) if gamma is None else np.array(gamma, dtype=float),
            eta=np.zeros(3) if eta is None else np.array(eta, dtype=float),
            bw=np.array(
                [r.omega_bw for r in rotors]
                + [r.tilt_bw for r in rotors]
                + [f.eta_bw for f in fins]
            ),
            pos_min=np.array(
                [r.omega_min for r in rotors]
                + [r.gamma_min for r in rotors]
                + [f.eta_min for f in fins]
            ),
            pos_max=np.array(
                [r.omega_max for r in rotors]
                + [r.gamma_max for r in rotors]
                + [f.eta_max for f in fins]
            ),
            rate_min=np.array(
                [r.omega_dot_min for r in rotors]
                + [r.gamma_dot_min for r in rotors]
                + [f.eta_dot_min for f in fins]
            ),
            rate_max=np.array(
                [r.omega_dot_max for r in rotors]
                + [r.gamma_dot_max for r in rotors]
                + [f.eta_dot_max for f in fins]
            ),
        )
        return suite

    @property
    def positions(self) -> np.ndarray:
        """Flat (11,) position vector [Omega, gamma, eta]."""
        return np.concatenate([self.Omega, self.gamma, self.eta])

    def replace_positions(self, x: np.ndarray) -> "ActuatorSuite":
        return ActuatorSuite(
            Omega=x[0:4].copy(),
            gamma=x[4:8].copy(),
            eta=x[8:11].copy(),
            bw=self.bw,
            pos_min=self.pos_min,
            pos_max=self.pos_max,
            rate_min=self.rate_min,
            rate_max=self.rate_max,
        )


def actuator_step(suite: ActuatorSuite, commands: np.ndarray, dt: float) -> ActuatorSuite:
    """Advance all actuators by one period towards ``commands`` (11,).

    Commands outside the absolute limits are effectively clamped, never
    rejected.  Returns a new suite; the realized rates are
    ``(new.positions - suite.positions) / dt``.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    x = suite.positions
    rate = np.clip(suite.bw * (commands - x), suite.rate_min, suite.rate_max)
    x_new = np.clip(x + rate * dt, suite.pos_min, suite.pos_max)
    return suite.replace_positions(x_new)
