"""Two-resonator optomechanical heat-engine simulator.

Three model tiers of the same machine: a full Lindblad master equation on
a truncated Fock space (local or dressed dissipators), an exactly closed
moment ODE system, and a classical stochastic quadrature ensemble, plus
Otto-cycle thermodynamics extracted from any of them.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ConvergenceError,
    DensityMatrixError,
    DimensionError,
    DomainError,
    OttosimError,
    PropagationError,
    RegimeError,
    StatisticsError,
)
from .params import DriveSchedule, EngineParams, planck_occupancy

__all__ = [
    "__version__",
    "ConfigError",
    "ConvergenceError",
    "DensityMatrixError",
    "DimensionError",
    "DomainError",
    "DriveSchedule",
    "EngineParams",
    "OttosimError",
    "PropagationError",
    "RegimeError",
    "StatisticsError",
    "planck_occupancy",
]
