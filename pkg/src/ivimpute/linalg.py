"""Dense linear-algebra helpers built on thin QR factorizations.

Nothing here forms ``(Z'Z)^{-1}`` or the n-by-n projection matrix ``P_Z``.
Cross moments of the form ``a'P_Z b`` are evaluated as ``(Q'a)'(Q'b)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import RankDeficientError

#: Smallest admissible ratio of extreme singular values of a design matrix.
RANK_TOL = 1e-10


def condition_ratio(R: np.ndarray) -> float:
    """Return ``s_min / s_max`` for the triangular factor of a design."""
    s = np.linalg.svd(R, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0.0
    return float(s[-1] / s[0])


@dataclass(frozen=True)
class Projection:
    """Thin QR factorization ``Z = QR`` of an instrument matrix."""

    Q: np.ndarray
    R: np.ndarray

    @classmethod
    def of(cls, Z: np.ndarray, *, what: str = "Z") -> "Projection":
        n, L = Z.shape
        if n < L:
            raise RankDeficientError(f"{what} has {n} rows but {L} columns")
        Q, R = np.linalg.qr(Z, mode="reduced")
        ratio = condition_ratio(R)
        if ratio < RANK_TOL:
            raise RankDeficientError(
                f"{what} is rank deficient (singular value ratio {ratio:.3g} < {RANK_TOL:g})"
            )
        return cls(Q, R)

    def coords(self, a: np.ndarray) -> np.ndarray:
        """Coordinates ``Q'a`` of ``a`` in the column space of Z."""
        return self.Q.T @ a

    def solve(self, a: np.ndarray) -> np.ndarray:
        """Least-squares coefficients ``(Z'Z)^{-1} Z'a``."""
        return sla.solve_triangular(self.R, self.Q.T @ a, lower=False)

    def coef_from_coords(self, qa: np.ndarray) -> np.ndarray:
        """Map ``Q'a`` to ``(Z'Z)^{-1} Z'a``."""
        return sla.solve_triangular(self.R, qa, lower=False)


def lstsq_qr(Z: np.ndarray, a: np.ndarray, *, what: str = "Z") -> np.ndarray:
    """Solve ``min ||Z b - a||`` by Householder QR with a rank check."""
    return Projection.of(Z, what=what).solve(a)


def weighted_gram(Z: np.ndarray, w: np.ndarray | None = None) -> np.ndarray:
    """Return ``sum_i w_i Z_i Z_i'`` (``w = 1`` when omitted)."""
    if Z.shape[0] == 0:
        return np.zeros((Z.shape[1], Z.shape[1]))
    if w is None:
        return Z.T @ Z
    return (Z * w[:, None]).T @ Z


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)
