"""Exception hierarchy shared by every module."""

from __future__ import annotations


class BahcError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(BahcError, ValueError):
    pass


class InvalidDegreesOfFreedomError(InvalidArgumentError):
    pass


class DegenerateVarianceError(InvalidArgumentError):
    pass


class ConfigurationError(BahcError, ValueError):
    """A measure and its inputs (scatter kind, hyperparameters) do not fit together."""


class NumericalError(BahcError, ArithmeticError):
    """Base class for failures of the numerical kernels."""


class NotPositiveDefiniteError(NumericalError):
    """Raised when a triangular factorization hits a non-positive pivot.

    Attributes
    ----------
    pivot : int
        Zero-based index of the failing pivot.
    """

    def __init__(self, message: str, pivot: int):
        super().__init__(message)
        self.pivot = pivot


class SmallSampleError(NotPositiveDefiniteError):
    """A plug-in estimator needed a full-rank sample covariance that is singular."""


class DegenerateNormalizerError(NumericalError):
    pass


class MeasureEvaluationError(NumericalError):
    """Wraps a measure failure with the cluster pair that triggered it."""

    def __init__(self, message: str, measure: str, pair: tuple, cause: Exception):
        super().__init__(message)
        self.measure = measure
        self.pair = pair
        self.cause = cause


class UnreachableLevelError(BahcError, LookupError):
    pass


class UnsupportedMeasureError(BahcError, ValueError):
    pass
