"""Exception and warning classes shared across the package."""


class TpsError(Exception):
    """Base class for all errors raised by tpspec."""


class DimensionError(TpsError, ValueError):
    """Operators or superoperators of incompatible sizes were combined."""


class SteadyStateError(TpsError):
    """The generator has no unique steady state, or the solve is ill-conditioned."""


class ConvergenceError(TpsError):
    """The vanishing-coupling limit of the sensor method did not settle.

    Attributes
    ----------
    residuals : list of float
        Relative change between consecutive coupling strengths, in the order
        they were tried.
    """

    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


class ResolutionError(TpsError, ValueError):
    """A discretization is too coarse (or too short) for the requested dynamics."""


class ConfigError(TpsError, ValueError):
    """Invalid or unparsable run configuration."""


class MaskedPointsError(ConvergenceError):
    """Too many points of a spectral map failed to converge."""


class SensorBackActionWarning(UserWarning):
    """Sensor coupling is not small compared to the filter bandwidth."""


class UndersampledWarning(UserWarning):
    """Delay grid is too coarse to resolve the fastest oscillation."""
