"""Exception types raised across the package."""


class CunecError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(CunecError, ValueError):
    pass


class InvalidPositionError(CunecError, ValueError):
    """A terminal lies outside every street corridor of the grid."""


class OutOfRangeError(CunecError, ValueError):
    """A distance falls below the model reference distance."""


class UnsampledParameterError(CunecError, KeyError):
    """No street-parameter realization exists for a (street, order) key."""


class ConditioningError(CunecError, ValueError):
    pass


class ResourceLimitError(CunecError, MemoryError):
    pass


class NumericalFailureError(CunecError, ArithmeticError):
    pass


class DegenerateFieldError(CunecError, ValueError):
    pass


class InsufficientDataError(CunecError, ValueError):
    pass


class RankDeficiencyError(CunecError, ValueError):
    pass


class ConfigError(CunecError, ValueError):
    pass
