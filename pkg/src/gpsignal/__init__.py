"""Evolved phase urgency functions for traffic signal control.

The core is importable directly; :mod:`gpsignal.api` wraps it in an HTTP
service and :mod:`gpsignal.cli` is a thin client of that service.
"""

from .controllers import (FixedTimeController, MaxPressureController, UrgencyController,
                          controller_from_config, mp_as_tree)
from .errors import GPSignalError
from .experiment import ExperimentConfig, RunReport, compute_gap, run_experiment
from .features import extract_features, feature_matrix
from .flow import FlowSpec, generate_flow, load_flow
from .network import RoadNetwork, enumerate_phases, generate_grid, load_roadnet
from .sim import SimConfig, SimState, run_episode, step

__version__ = "0.1.0"

__all__ = [
    "FixedTimeController", "MaxPressureController", "UrgencyController", "controller_from_config",
    "mp_as_tree", "GPSignalError", "ExperimentConfig", "RunReport", "compute_gap", "run_experiment",
    "extract_features", "feature_matrix", "FlowSpec", "generate_flow", "load_flow", "RoadNetwork",
    "enumerate_phases", "generate_grid", "load_roadnet", "SimConfig", "SimState", "run_episode",
    "step", "__version__",
]
