"""Data containers for an IV sample with a partially missing endogenous regressor.

Missingness is carried by an explicit boolean mask; NaN never marks a missing
value once data is inside these types.  Entries of ``x`` on missing rows are
stored as NaN only so that accidental use fails loudly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, ValidationError
from .linalg import lstsq_qr


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float if a.dtype != bool else bool, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class IVDataset:
    """Outcome ``y``, endogenous regressor ``x``, instruments ``Z`` and the x-missingness mask."""

    y: np.ndarray
    x: np.ndarray
    Z: np.ndarray
    missing: np.ndarray

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def L(self) -> int:
        return int(self.Z.shape[1])

    @property
    def n_missing(self) -> int:
        return int(self.missing.sum())


def make_dataset(y, x, Z, missing=None) -> IVDataset:
    """Build and validate an :class:`IVDataset` from array-likes.

    ``missing`` defaults to "nothing missing".  A one-dimensional ``Z`` is
    read as a single instrument column.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if missing is None:
        missing = np.zeros(x.shape, dtype=bool)
    missing = np.asarray(missing, dtype=bool)
    return validate(IVDataset(y, x, Z, missing))


def _first_bad_row(a: np.ndarray) -> int | None:
    bad = ~np.isfinite(a)
    if a.ndim > 1:
        bad = bad.any(axis=1)
    idx = np.flatnonzero(bad)
    return int(idx[0]) if idx.size else None


def validate(raw: IVDataset) -> IVDataset:
    """Check every dataset invariant and return a normalized, read-only copy.

    Raises :class:`ValidationError` naming the first violated invariant.
    Row numbers in messages are 1-based.
    """
    y, x, Z, missing = (np.asarray(a) for a in (raw.y, raw.x, raw.Z, raw.missing))
    if y.ndim != 1 or x.ndim != 1 or missing.ndim != 1:
        raise ValidationError("y, x and the missing mask must be one-dimensional")
    if Z.ndim != 2:
        raise ValidationError("Z must be a two-dimensional n-by-L matrix")
    n = y.shape[0]
    if n < 1:
        raise ValidationError("dataset has no rows")
    if Z.shape[1] < 1:
        raise ValidationError("Z has no instrument columns")
    for name, length in (("x", x.shape[0]), ("Z", Z.shape[0]), ("missing mask", missing.shape[0])):
        if length != n:
            raise ValidationError(f"length mismatch: y has {n} rows but {name} has {length}")

    for name, arr in (("y", y), ("Z", Z)):
        row = _first_bad_row(arr.astype(float))
        if row is not None:
            raise ValidationError(f"non-finite {name} at row {row + 1}", row=row + 1, field=name)
    observed = np.where(missing, 0.0, x.astype(float))
    row = _first_bad_row(observed)
    if row is not None:
        raise ValidationError(f"non-finite x at row {row + 1}", row=row + 1, field="x")

    x_clean = np.where(missing, np.nan, x.astype(float))
    return IVDataset(_frozen(y), _frozen(x_clean), _frozen(Z), _frozen(missing.astype(bool)))


@dataclass(frozen=True, eq=False)
class SplitDataset:
    """Complete rows ``(y0, x0, Z0)`` and incomplete rows ``(y1, Z1)``.

    ``complete_rows`` and ``incomplete_rows`` hold the source positions of
    each block, in their original relative order.
    """

    y0: np.ndarray
    x0: np.ndarray
    Z0: np.ndarray
    y1: np.ndarray
    Z1: np.ndarray
    complete_rows: np.ndarray
    incomplete_rows: np.ndarray

    @property
    def n0(self) -> int:
        return int(self.y0.shape[0])

    @property
    def n1(self) -> int:
        return int(self.y1.shape[0])

    @property
    def n(self) -> int:
        return self.n0 + self.n1

    @property
    def L(self) -> int:
        return int(self.Z0.shape[1])

    @property
    def p_hat(self) -> float:
        return self.n1 / self.n

    @property
    def original_index_map(self) -> np.ndarray:
        """Source row of each stacked row (complete block first)."""
        return np.concatenate([self.complete_rows, self.incomplete_rows])


def split(d: IVDataset) -> SplitDataset:
    """Partition a validated dataset by x-missingness."""
    complete = np.flatnonzero(~d.missing)
    incomplete = np.flatnonzero(d.missing)
    if complete.size == 0:
        raise EstimationError("no complete cases: every x value is missing")
    return SplitDataset(
        y0=_frozen(d.y[complete]),
        x0=_frozen(d.x[complete]),
        Z0=_frozen(d.Z[complete]),
        y1=_frozen(d.y[incomplete]),
        Z1=_frozen(d.Z[incomplete]),
        complete_rows=_frozen_index(complete),
        incomplete_rows=_frozen_index(incomplete),
    )


def _frozen_index(idx: np.ndarray) -> np.ndarray:
    idx = idx.astype(np.intp, copy=True)
    idx.setflags(write=False)
    return idx


def merge(s: SplitDataset) -> IVDataset:
    """Inverse of :func:`split`: restore the source row order."""
    n, L = s.n, s.L
    y = np.empty(n)
    x = np.full(n, np.nan)
    Z = np.empty((n, L))
    missing = np.zeros(n, dtype=bool)
    y[s.complete_rows], y[s.incomplete_rows] = s.y0, s.y1
    x[s.complete_rows] = s.x0
    Z[s.complete_rows], Z[s.incomplete_rows] = s.Z0, s.Z1
    missing[s.incomplete_rows] = True
    return IVDataset(_frozen(y), _frozen(x), _frozen(Z), _frozen(missing))


@dataclass(frozen=True, eq=False)
class ImputedDataset:
    """Sample with missing x replaced by complete-case first-stage predictions."""

    y: np.ndarray
    x_tilde: np.ndarray
    Z: np.ndarray
    imputed: np.ndarray
    pi_cc: np.ndarray

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def L(self) -> int:
        return int(self.Z.shape[1])

    @property
    def n1(self) -> int:
        return int(self.imputed.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1


def complete_case_coef(s: SplitDataset) -> np.ndarray:
    """``(Z0'Z0)^{-1} Z0'x0`` via QR; raises if Z0 is short or rank deficient."""
    if s.n0 < s.L:
        raise EstimationError(f"need at least L={s.L} complete cases, have n0={s.n0}")
    return lstsq_qr(s.Z0, s.x0, what="Z0")


def impute(s: SplitDataset, pi_cc: np.ndarray | None = None) -> ImputedDataset:
    """Regression imputation of the missing x values.

    The imputed first-stage residual ``x_tilde - Z @ pi_cc`` is exactly zero
    on imputed rows because both sides come from the same product ``Z @ pi_cc``.
    """
    if pi_cc is None:
        pi_cc = complete_case_coef(s)
    full = merge(s)
    fitted = full.Z @ pi_cc
    x_tilde = np.where(full.missing, fitted, full.x)
    return ImputedDataset(
        y=full.y,
        x_tilde=_frozen(x_tilde),
        Z=full.Z,
        imputed=full.missing,
        pi_cc=_frozen(np.asarray(pi_cc, dtype=float)),
    )
