"""Visual-inertial navigation filter and Monte-Carlo simulation tools.

The package simulates a fixed-wing aircraft losing GNSS mid-flight and
compares two recovery strategies run by the same 27-state manifold EKF:
pure inertial/magnetic dead reckoning ("ins") and dead reckoning aided by
position/velocity pseudo-measurements derived from a visual-odometry
surrogate ("vins").  See the README for the command-line entry points.
"""

from .filter import FilterState, NavFilter, NoiseConfig, initial_state
from .montecarlo import (
    AggregateStats,
    RunError,
    RunResult,
    aggregate,
    emit_outputs,
    load_results,
    run_monte_carlo,
    run_single,
    write_report,
)
from .scenario import (
    Ramp,
    ScenarioConfig,
    Turn,
    generate_truth,
    sample_scenario,
)
from .sensors import SensorConfig, generate_sensors
from .vvs import SurrogateVo, VoConfig, VvsConverter, VvsObservation

__version__ = "0.1.0"

__all__ = [
    "AggregateStats",
    "FilterState",
    "NavFilter",
    "NoiseConfig",
    "Ramp",
    "RunError",
    "RunResult",
    "ScenarioConfig",
    "SensorConfig",
    "SurrogateVo",
    "Turn",
    "VoConfig",
    "VvsConverter",
    "VvsObservation",
    "aggregate",
    "emit_outputs",
    "generate_sensors",
    "generate_truth",
    "initial_state",
    "load_results",
    "run_monte_carlo",
    "run_single",
    "sample_scenario",
    "write_report",
    "__version__",
]
