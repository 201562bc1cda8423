"""Exception types shared across the package."""


class RulegradError(Exception):
    """Base class for all package errors."""


class ShapeError(RulegradError, ValueError):
    """Operand shapes are incompatible."""


class NumericError(RulegradError, ArithmeticError):
    """A numeric guard tripped (zero norm, log of non-positive, NaN...)."""


class ContractError(RulegradError, ValueError):
    """A precondition of an operation was violated."""


class DataError(RulegradError, ValueError):
    """A dataset on disk or in memory failed validation."""


class ConfigError(RulegradError, ValueError):
    """Invalid configuration value or key."""
