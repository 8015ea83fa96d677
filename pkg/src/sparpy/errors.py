"""Exception and warning types raised by sparpy."""


class SparError(Exception):
    """Base class for all sparpy errors."""


class DimensionMismatch(SparError, ValueError):
    pass


class ZeroVarianceResponse(SparError, ValueError):
    pass


class SingularSystem(SparError, ArithmeticError):
    pass


class SingularGram(SparError, ArithmeticError):
    """Gram matrix is numerically singular and no jitter was supplied."""


class AllZeroValues(SparError, ValueError):
    pass


class InconsistentTau(SparError, ValueError):
    pass


class FoldTooSmall(SparError, ValueError):
    pass


class DegenerateDenominator(SparError, ZeroDivisionError):
    pass


class DegenerateReducedFit(SparError, ArithmeticError):
    pass


class NonPositiveDefinite(SparError, ValueError):
    pass


class ConfigError(SparError, ValueError):
    pass


class InsufficientPositiveScores(UserWarning):
    """Requested screening size exceeds the number of positive scores."""
