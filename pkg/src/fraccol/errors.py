"""Exception hierarchy shared by all fraccol modules."""


class FraccolError(Exception):
    """Base class for all library errors."""


class DomainError(FraccolError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class SingularMatrixError(FraccolError, ArithmeticError):
    """A linear system is (numerically) singular.

    ``index`` is the elimination step (or time step) at which the zero pivot
    was detected, when known.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConvergenceError(FraccolError, RuntimeError):
    """An iteration did not converge within its cap."""

    def __init__(self, message, index=None, report=None):
        super().__init__(message)
        self.index = index
        self.report = report


class CertificateError(FraccolError):
    """A well-posedness certificate failed (e.g. a real negative eigenvalue)."""


class ConfigError(FraccolError, ValueError):
    """A problem configuration is malformed or references unknown entries."""
