"""Exception types shared across the package."""


class SpatialLogisticError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(SpatialLogisticError, ValueError):
    """A numeric parameter is outside its admissible range."""


class InvalidKernelError(SpatialLogisticError, ValueError):
    """A kernel is malformed (negative values, singular moment matrix, ...)."""


class AssumptionViolationError(SpatialLogisticError):
    """A modelling assumption on the kernels or parameters does not hold."""


class IntegrandError(SpatialLogisticError, FloatingPointError):
    """An integrand returned a non-finite value."""

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


class IntegrationError(SpatialLogisticError, FloatingPointError):
    """Time integration failed (NaN state or step-size underflow)."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class BracketError(SpatialLogisticError):
    """The competition ceiling of the root bracket was hit."""


class NoRootError(SpatialLogisticError):
    """The extinction residual does not change sign over the bracket."""

    def __init__(self, message, h_lo=None, h_hi=None):
        super().__init__(message)
        self.h_lo = h_lo
        self.h_hi = h_hi


class ResolutionError(SpatialLogisticError, ValueError):
    """A requested evaluation lies beyond what the frequency grid resolves."""


class ConfigError(SpatialLogisticError, ValueError):
    """A run configuration could not be parsed or validated."""
