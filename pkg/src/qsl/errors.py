"""Exception hierarchy. CLI exit codes are attached to the classes."""


class QSLError(Exception):
    """Base class for all errors raised by the package."""

    exit_code = 4


class DimensionError(QSLError, ValueError):
    pass


class NormalizationError(QSLError, ValueError):
    pass


class NonHermitianError(QSLError, ValueError):
    pass


class NumericalError(QSLError, ArithmeticError):
    """NaN/Inf in a generator, or a numerically inconsistent intermediate."""


class DegeneracyError(QSLError):
    """Spectral gap closes where a non-degenerate spectrum is required."""


class ConvergenceError(QSLError):
    """A refinement check failed. ``estimates`` holds the compared values."""

    exit_code = 3

    def __init__(self, message, estimates=None):
        super().__init__(message)
        self.estimates = estimates


class ConfigError(QSLError):
    exit_code = 2
