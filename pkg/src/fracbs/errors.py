"""Exception hierarchy shared by all pricing modules."""


class FracBSError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FracBSError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(FracBSError, ValueError):
    """Inconsistent option/grid/run configuration."""


class SolverError(FracBSError, ArithmeticError):
    """A linear solve broke down (zero pivot or non-finite values)."""


class ParityViolation(FracBSError, ArithmeticError):
    """Knock-out leg exceeds the vanilla leg beyond tolerance."""


class RegressionError(FracBSError, ArithmeticError):
    """Continuation-value regression is underdetermined or rank deficient."""
