"""Simulation of symmetric two-atom Rydberg CZ gates driven by adiabatic pulses."""

from rydsim.errors import CheckpointError, ConfigurationError, IntegrationError, RydsimError
from rydsim.quantum import (
    DensityMatrix,
    LevelScheme,
    Observable,
    StateSpace,
    apply_hadamard,
    arp_scheme,
    bell_fidelity,
    build_space,
    expectation,
    stirap_scheme,
)

__version__ = "0.1.0"

__all__ = [
    "CheckpointError",
    "ConfigurationError",
    "DensityMatrix",
    "IntegrationError",
    "LevelScheme",
    "Observable",
    "RydsimError",
    "StateSpace",
    "apply_hadamard",
    "arp_scheme",
    "bell_fidelity",
    "build_space",
    "expectation",
    "stirap_scheme",
]
