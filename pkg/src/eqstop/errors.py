"""Exception types shared across the package."""


class EqStopError(Exception):
    """Base class for all package-specific errors."""


class DomainError(EqStopError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class MissingDerivativeError(EqStopError, ValueError):
    """A required derivative callback was not supplied."""


class ParameterConditionError(EqStopError, ValueError):
    """Model parameters violate a solvability condition."""


class DivergentMomentError(EqStopError, ValueError):
    """A requested moment does not exist for the given parameters."""


class SingularityError(EqStopError, ArithmeticError):
    """A formula hit a zero denominator (e.g. h(x) = psi(x) or g''(psi) = 0)."""


class BoundaryEscapeError(EqStopError, RuntimeError):
    """An Euler step could not be kept inside the state interval."""


class HorizonExceededError(EqStopError, RuntimeError):
    """A simulation that must terminate did not do so before the horizon."""


class TargetNotReachedError(EqStopError, ValueError):
    """A cumulative-value inversion target exceeds the final value."""


class ConfigError(EqStopError, ValueError):
    """A run-configuration document failed validation."""
