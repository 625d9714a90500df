"""Geometric phases of mixed quantum states along density-matrix trajectories."""

from .errors import GeoPhaseError, NumericalError, ValidationError
from .evolve import LindbladModel, TimeGrid, evolve
from .phases import (
    ancilla_from_policy,
    degenerate_phase,
    generalized_phase,
    kinematic_phase,
    uhlmann_phase_discrete,
)
from .scenario import builtin, emit_report, parse_scenario, run_scenario
from .spectral import track_spectrum

__version__ = "0.1.0"

__all__ = [
    "GeoPhaseError", "NumericalError", "ValidationError",
    "LindbladModel", "TimeGrid", "evolve", "track_spectrum",
    "ancilla_from_policy", "kinematic_phase", "generalized_phase", "degenerate_phase",
    "uhlmann_phase_discrete", "builtin", "parse_scenario", "run_scenario", "emit_report",
]
