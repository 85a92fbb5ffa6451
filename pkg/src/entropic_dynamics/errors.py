"""Exception hierarchy shared by all engines."""


class EntropicDynamicsError(Exception):
    """Base class for every error raised by this package."""


class ArgumentError(EntropicDynamicsError, ValueError):
    """Inputs have incompatible shapes, grids or parameter values."""


class DomainError(EntropicDynamicsError, ValueError):
    """A value lies outside the mathematical domain of an operation."""


class PrecisionError(EntropicDynamicsError):
    """The discretization cannot deliver the requested accuracy."""


class ConvergenceError(EntropicDynamicsError):
    """An iterative solver hit its iteration cap.

    The best available estimate of the residual is kept on ``gap``.
    """

    def __init__(self, message, gap=float("nan")):
        super().__init__(message)
        self.gap = gap


class NumericalError(EntropicDynamicsError, ArithmeticError):
    """A time stepper produced non-finite values."""

    def __init__(self, message, engine=None, step=None):
        super().__init__(message)
        self.engine = engine
        self.step = step


class PhaseUnwrapError(EntropicDynamicsError):
    """The wave amplitude vanishes along the phase unwrapping path."""


class ConfigError(EntropicDynamicsError):
    """A scenario configuration failed validation."""


class PrecisionWarning(UserWarning):
    """Density floor was active on a noticeable fraction of the grid."""
