"""Exception types shared across the package."""

__all__ = [
    "StochTaylorError",
    "DomainError",
    "NumericRangeError",
    "NotSampleableError",
    "FitFailure",
    "DataError",
]


class StochTaylorError(Exception):
    """Base class for all package-specific errors."""


class DomainError(StochTaylorError, ValueError):
    """An argument lies outside the mathematical domain of an operation.

    Raised for evaluation points not strictly above the expansion origin,
    negative scale parameters, non-finite inputs, and similar violations.
    """


class NumericRangeError(StochTaylorError, ArithmeticError):
    """A result's magnitude exceeds the largest finite double.

    The usual remedy is to divide inputs and outputs by suitable positive
    factors before fitting (see the ``rescale`` field of the model) so that
    exponents stay inside floating-point range.
    """


class NotSampleableError(DomainError):
    """A component's implied covariance matrix is not positive semidefinite.

    Simulation requires sum(rho[r]**2) <= 1 per component; closed-form
    evaluation has no such restriction.
    """


class FitFailure(StochTaylorError, RuntimeError):
    """No optimization start produced a usable model."""


class DataError(StochTaylorError, ValueError):
    """A data file is malformed: wrong shape, non-numeric cells, or empty."""
