"""Exception hierarchy shared by all modules."""


class WavetomoError(Exception):
    """Base class for every error raised by the package."""


class UsageError(WavetomoError, ValueError):
    """An operation was called with arguments of the wrong kind or shape."""


class PreconditionError(WavetomoError, ValueError):
    """Inputs violate a documented precondition (support, admissibility, ...)."""


class ResolutionError(WavetomoError, ValueError):
    """The grid is too coarse for the requested feature or kernel."""


class CFLError(WavetomoError, ValueError):
    """Time step too large for the explicit scheme."""


class OverflowGuardError(WavetomoError, ValueError):
    """Exponential weights would leave the double-precision range."""


class InstabilityError(WavetomoError, RuntimeError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"non-finite values at time step {step}")


class LogBranchError(WavetomoError, ArithmeticError):
    """1 - f left the domain of the guarded logarithm."""

    def __init__(self, message: str, location=None):
        self.location = location
        super().__init__(message)


class ConfigError(WavetomoError, ValueError):
    """Invalid experiment configuration; the message names the field."""
