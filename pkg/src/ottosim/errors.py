"""Exception types shared across the package."""


class OttosimError(Exception):
    """Base class for package errors."""


class DimensionError(OttosimError, ValueError):
    """Operator or state dimensions are invalid or inconsistent."""


class DomainError(OttosimError, ValueError):
    """A physical parameter is outside its admissible domain."""


class DensityMatrixError(OttosimError):
    """A matrix violates the density-matrix invariants beyond tolerance."""


class PropagationError(OttosimError):
    """Time propagation diverged or broke an invariant.

    Carries the time at which the violation was detected.
    """

    def __init__(self, message, t=None):
        super().__init__(message if t is None else f"{message} (at t={t:g})")
        self.t = t


class ConvergenceError(OttosimError):
    """An iterative computation failed to converge within its horizon."""


class RegimeError(OttosimError, ValueError):
    """An approximation was requested outside its validity regime."""


class StatisticsError(OttosimError, ValueError):
    """Not enough trajectories (or samples) for the requested statistic."""


class ConfigError(OttosimError, ValueError):
    """Scenario configuration failed validation.

    ``field`` holds the dotted path of the offending entry.
    """

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
