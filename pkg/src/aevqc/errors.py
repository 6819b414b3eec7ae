"""Exception types raised across the package."""


class AEVQCError(Exception):
    """Base class for all package errors."""


class CapacityError(AEVQCError, ValueError):
    pass


class QubitIndexError(AEVQCError, IndexError):
    pass


class ParameterError(AEVQCError, ValueError):
    pass


class ShapeError(AEVQCError, ValueError):
    pass


class UnsupportedGradientError(AEVQCError, TypeError):
    pass


class DegenerateInputError(AEVQCError, ValueError):
    pass


class DomainError(AEVQCError, ValueError):
    pass


class ConfigError(AEVQCError, ValueError):
    pass


class DataError(AEVQCError, ValueError):
    pass


class DivergenceError(AEVQCError, RuntimeError):
    pass


class FormatError(AEVQCError, ValueError):
    pass
