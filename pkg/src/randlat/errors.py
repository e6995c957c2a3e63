"""Exception hierarchy shared by every randlat module."""


class RandlatError(Exception):
    pass


class NonSquare(RandlatError, ValueError):
    pass


class NonUnimodular(RandlatError, ValueError):
    pass


class NumericalFailure(RandlatError, ArithmeticError):
    pass


class DimensionMismatch(RandlatError, ValueError):
    pass


class EnumerationOverflow(RandlatError, OverflowError):
    """Raised when an enumeration would visit more than the allowed number of points."""


class CoverageError(RandlatError, ValueError):
    pass


class RejectionStall(RandlatError, RuntimeError):
    pass


class NotPrime(RandlatError, ValueError):
    pass


class DomainError(RandlatError, ValueError):
    pass


class ConfigError(RandlatError, ValueError):
    pass


class TimeBudgetExceeded(RandlatError, RuntimeError):
    pass
