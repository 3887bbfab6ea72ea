"""Tilt-rotor airship flight dynamics simulator and flight control library."""

from .actuators import ActuatorSuite, actuator_step
from .autopilot import Autopilot, ControllerToggles, Measurements
from .dynamics import (
    PlantModel,
    RigidState,
    SingularAttitudeError,
    WindState,
    Wrench,
    integrate_step,
    propulsion_nu,
    state_derivative,
)
from .harness import RunLog, Scenario, compute_metrics, run_scenario
from .inner_loop import ControllerGains, ControllerState
from .outer_loop import OuterCommands, stick_to_commands
from .params import (
    AirshipParams,
    ConfigError,
    DampingParams,
    FinParams,
    RotorParams,
    default_params,
    ellipsoid_inertia_factors,
    load_params,
    save_params,
)

__version__ = "0.1.0"
