"""Exception types raised across the package."""


class OkflowError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(OkflowError, ValueError):
    pass


class CannotCoarsenError(OkflowError, ValueError):
    pass


class InvalidMatrixError(OkflowError, ValueError):
    """Matrix lacks a property the caller relies on (e.g. positive definiteness)."""


class ConfigurationError(OkflowError, ValueError):
    pass


class InconsistentStateError(OkflowError, ValueError):
    pass


class NumericalFailure(OkflowError, RuntimeError):
    pass


class StepFailure(OkflowError, RuntimeError):
    """A timestep could not be completed; ``stats`` holds what was gathered."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats
