"""Exception hierarchy shared across the package."""


class FracBandsError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FracBandsError, ValueError):
    """Invalid grid, potential or run configuration."""


class DomainError(FracBandsError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class PreconditionError(FracBandsError, ValueError):
    """Inputs violate a stated precondition of an operation."""


class NumericalError(FracBandsError, ArithmeticError):
    """A factorization or eigen-decomposition failed."""


class ConvergenceError(FracBandsError, RuntimeError):
    """Iterative solve did not converge.

    ``residual`` holds the last relative energy change and ``iterations``
    the number of steps taken.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegenerateFitError(FracBandsError, ValueError):
    """Too few points survive outlier rejection to define a fit."""


class InsufficientDataError(FracBandsError, ValueError):
    """Not enough accepted fits to report a statistic."""


class SchemaError(ConfigurationError):
    """Configuration file does not follow the documented schema."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
