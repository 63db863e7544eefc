"""Exception hierarchy shared by the whole package."""


class DynvoterError(Exception):
    """Base class for all package errors."""


class ParameterError(DynvoterError, ValueError):
    """An argument violates a documented precondition."""


class NumericalFailure(DynvoterError, ArithmeticError):
    """An iterative numerical procedure failed to converge."""


class DegenerateHeightError(ParameterError):
    """The tree height floor(delta * log_d n) came out below 1."""
