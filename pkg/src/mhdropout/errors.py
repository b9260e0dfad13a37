"""Exception types raised across the package."""


class MHDropoutError(Exception):
    """Base class for all package errors."""


class DimensionError(MHDropoutError, ValueError):
    """Operand shapes do not agree for an operation."""


class ValidationError(MHDropoutError, ValueError):
    """An argument violates an operation's precondition."""


class CapacityError(MHDropoutError):
    """A request would enumerate too many objects."""


class DegenerateSampleError(MHDropoutError, ValueError):
    """Too few samples to compute a statistic."""


class ConfigError(MHDropoutError):
    """An experiment configuration is malformed."""


class NumericError(MHDropoutError, ArithmeticError):
    """A computation produced a non-finite value."""
