"""Exception hierarchy shared across the package."""


class MvshrinkError(Exception):
    """Base class for all package errors."""


class DomainError(MvshrinkError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ConfigError(MvshrinkError, ValueError):
    """Invalid configuration: bad flag value, inconsistent dimensions, parse failure."""


class DataError(MvshrinkError, ValueError):
    """Malformed input data (CSV parse failures, shape mismatches)."""


class NumericalError(MvshrinkError, RuntimeError):
    """A numerical routine failed (factorization, non-finite values, divergence)."""


class NormalizationError(NumericalError):
    """Adaptive quadrature failed to normalize a density to tolerance."""


class LogicError(MvshrinkError, RuntimeError):
    """An operation was called in a state that its contract forbids."""
