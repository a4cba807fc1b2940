"""Exception types raised across the package."""


class SNBandsError(Exception):
    """Base class for all package errors."""


class DomainError(SNBandsError, ValueError):
    """An argument lies outside the domain where a function is defined."""


class RangeError(SNBandsError, ValueError):
    """A curve inversion target lies outside the attainable range.

    Attributes
    ----------
    attainable : tuple of float
        The ``(low, high)`` log-range the curve covers on its working domain.
    """

    def __init__(self, message, attainable=None):
        super().__init__(message)
        self.attainable = attainable


class DegenerateDataError(SNBandsError, ValueError):
    """The data carry no information about some parameter (e.g. no failures)."""


class OptimizationError(SNBandsError, RuntimeError):
    """An optimizer failed; ``diagnostics`` holds per-attempt details."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class SingularInformationError(SNBandsError, ArithmeticError):
    """The observed information matrix is not positive definite."""


class PreconditionError(SNBandsError, ValueError):
    """A call was made on an object in the wrong state."""
