"""Exception hierarchy shared by the estimation, simulation and CLI layers."""

from __future__ import annotations


class IVImputeError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(IVImputeError, ValueError):
    """Input data or configuration violates a documented invariant."""

    def __init__(self, message: str, *, row: int | None = None, field: str | None = None):
        super().__init__(message)
        self.row = row
        self.field = field


class EstimationError(IVImputeError, ArithmeticError):
    """An estimator cannot be evaluated on the given data."""


class RankDeficientError(EstimationError):
    """A design matrix is numerically rank deficient."""


class SimulationError(IVImputeError):
    """Too many Monte Carlo replications failed."""


class NegativeVarianceWarning(RuntimeWarning):
    """A sandwich variance came out negative and was clamped to zero."""
