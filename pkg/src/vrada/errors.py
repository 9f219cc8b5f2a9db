"""Exception types raised across the package."""


class VradaError(Exception):
    """Base class for every error raised by this package."""


class InputShapeError(VradaError, ValueError):
    """A vector or dataset does not have the expected shape."""


class NumericOverflowError(VradaError, ArithmeticError):
    """A computation produced NaN or Inf."""


class LabelError(VradaError, ValueError):
    """A sample label is outside the admissible class range."""


class ParseError(VradaError, ValueError):
    """Malformed LibSVM input. ``lineno`` is 1-based (0 when not line specific)."""

    def __init__(self, message, lineno=0):
        self.lineno = lineno
        if lineno:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ScheduleSaturated(VradaError):
    """The epoch weight A_s would exceed the representable range.

    Raised by the schedule instead of producing Inf; a solver that receives it
    stops with a ``saturated`` status, since the gap bound is already below
    floating point resolution.
    """


class AuditError(VradaError, AssertionError):
    """A runtime audit of a convergence guarantee failed.

    ``check`` names the bound family, ``epoch`` the epoch index.
    """

    def __init__(self, check, epoch, detail):
        self.check = check
        self.epoch = epoch
        super().__init__(f"{check} violated at epoch {epoch}: {detail}")


class ConfigError(VradaError, ValueError):
    """Invalid solver or experiment configuration."""


class ReferenceInconsistency(VradaError):
    """Two independent reference computations disagree."""


class TuningError(VradaError):
    """Every value of an L-parameter grid diverged."""
