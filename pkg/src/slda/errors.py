"""Exception hierarchy shared by all slda modules."""


class SldaError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SldaError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ShapeError(SldaError, ValueError):
    """Array dimensions do not match what an operation requires."""


class DataError(SldaError, ValueError):
    """Input data violates a dataset invariant (labels, finiteness, counts)."""


class NotPositiveDefiniteError(SldaError):
    """Cholesky factorization hit a non-positive pivot.

    ``pivot_index`` is the 0-based index of the failing pivot.
    """

    def __init__(self, pivot_index, message=None):
        self.pivot_index = pivot_index
        super().__init__(message or f"matrix is not positive definite (pivot {pivot_index})")


class NumericalError(SldaError):
    """An iterative numerical routine failed to converge or produced garbage."""


class UnusableMatrixError(SldaError):
    """A matrix has no usable positive part (largest eigenvalue <= 0)."""
