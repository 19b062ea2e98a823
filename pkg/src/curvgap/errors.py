"""Exception types shared across the package."""

from __future__ import annotations


class ParameterError(ValueError):
    """A configuration or argument value is outside its documented domain."""


class NotPositiveDefinite(ValueError):
    """A Hermitian field that must be positive definite is not.

    Carries the worst grid point and the offending eigenvalue so the caller
    can report where positivity failed.
    """

    def __init__(self, message: str, point: tuple | None = None,
                 eigenvalue: float | None = None):
        super().__init__(message)
        self.point = point
        self.eigenvalue = eigenvalue


class SingularMetric(ValueError):
    """A metric determinant hit zero or a non-finite value."""


class PositivityLoss(RuntimeError):
    """A damped update could not keep the solution metric positive."""


class MaxIterExceeded(RuntimeError):
    """An iteration budget ran out before the requested tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class LinearSolveFailure(RuntimeError):
    """A Krylov solve did not reach its tolerance."""


class FieldChecksumError(IOError):
    """A binary field dump does not match the checksum in its metadata."""
