"""Variance of 2SLS after regression imputation.

Four objects live here:

* :func:`w_ri` / :func:`variance_robust_ri` -- the heteroskedasticity-robust
  sandwich that accounts for imputation,
* :func:`variance_conventional` -- what software reports when imputed values
  are treated as observed,
* :func:`corollary1_variance` -- the homoskedastic MCAR asymptotic variance,
* :func:`conventional_limit` -- the probability limit of the conventional
  estimator under the same assumptions.

Empirical moments are plain sums; no degrees-of-freedom corrections.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg as sla

from .errors import EstimationError, NegativeVarianceWarning, RankDeficientError, ValidationError
from .linalg import Projection, symmetrize, weighted_gram
from .model import ImputedDataset

if TYPE_CHECKING:
    from .estimators import FirstStageFit


@dataclass(frozen=True, eq=False)
class MomentBlocks:
    """Cross-product sums entering the robust meat.

    ``S_quartic_1`` is ``sum_{i incomplete} Z_i Z_i' A Z_i Z_i'`` with
    ``A = S_zz_0^{-1} S_vv_0 S_zz_0^{-1}``.
    """

    S_zz_full: np.ndarray
    S_zz_0: np.ndarray
    S_zz_1: np.ndarray
    S_uu: np.ndarray
    S_uv_0: np.ndarray
    S_vv_0: np.ndarray
    S_quartic_1: np.ndarray


class _SPDSolver:
    def __init__(self, S: np.ndarray, what: str):
        try:
            self._cho = sla.cho_factor(S, lower=True, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise RankDeficientError(f"{what} is singular") from exc
        d = np.diag(self._cho[0])
        if d.min() <= 1e-10 * d.max():
            raise RankDeficientError(f"{what} is singular")

    def __call__(self, B: np.ndarray) -> np.ndarray:
        return sla.cho_solve(self._cho, B)


def moment_blocks(d: ImputedDataset, u_tilde: np.ndarray, v_tilde: np.ndarray) -> MomentBlocks:
    """Accumulate all sums over rows for the robust meat."""
    obs = ~d.imputed
    Z0, Z1 = d.Z[obs], d.Z[d.imputed]
    u0, v0 = u_tilde[obs], v_tilde[obs]
    S0 = weighted_gram(Z0)
    S1 = weighted_gram(Z1)
    S_vv0 = weighted_gram(Z0, v0 * v0)
    if Z1.shape[0]:
        inv0 = _SPDSolver(S0, "S_zz_0")
        A = inv0(inv0(S_vv0).T)
        A = symmetrize(A)
        w = np.einsum("ij,jk,ik->i", Z1, A, Z1)
        S_q = weighted_gram(Z1, w)
    else:
        S_q = np.zeros_like(S0)
    return MomentBlocks(
        S_zz_full=S0 + S1,
        S_zz_0=S0,
        S_zz_1=S1,
        S_uu=weighted_gram(d.Z, u_tilde * u_tilde),
        S_uv_0=weighted_gram(Z0, u0 * v0),
        S_vv_0=S_vv0,
        S_quartic_1=S_q,
    )


def w_ri(blocks: MomentBlocks, beta_hat: float) -> np.ndarray:
    """Imputation-corrected meat matrix, symmetrized.

    HC0 meat over all rows, minus ``2 b S_uv0 S0^{-1} S1``, plus
    ``b^2 S1 S0^{-1} S_vv0 S0^{-1} S1``, minus ``b^2 S_quartic_1``.
    """
    inv0 = _SPDSolver(blocks.S_zz_0, "S_zz_0")
    C = inv0(blocks.S_zz_1)
    b = float(beta_hat)
    W = (
        blocks.S_uu
        - 2.0 * b * (blocks.S_uv_0 @ C)
        + b * b * (C.T @ blocks.S_vv_0 @ C)
        - b * b * blocks.S_quartic_1
    )
    return symmetrize(W)


def robust_ri_variance_with_note(
    d: ImputedDataset,
    fit: "FirstStageFit",
    beta_hat: float,
    *,
    projection: Projection | None = None,
) -> tuple[float, str | None]:
    """Like :func:`variance_robust_ri` but returns the clamp note instead of warning."""
    proj = projection if projection is not None else Projection.of(d.Z)
    qx = proj.coords(d.x_tilde)
    bread = float(qx @ qx)
    if bread == 0.0:
        raise EstimationError("x'P_Z x is zero: sandwich bread is singular")
    g = proj.coef_from_coords(qx)
    u = d.y - d.x_tilde * beta_hat
    v = d.x_tilde - d.Z @ fit.pi_cc
    blocks = moment_blocks(d, u, v)
    W = w_ri(blocks, beta_hat)
    value = float(g @ W @ g) / bread**2
    if value < 0.0:
        scale = float(g @ blocks.S_uu @ g) / bread**2
        rel = -value / scale if scale > 0 else float("inf")
        return 0.0, f"robust RI variance was negative ({value:.3g}, {rel:.2g} relative) and was clamped to 0"
    return value, None


def variance_robust_ri(d: ImputedDataset, fit: "FirstStageFit", beta_hat: float) -> float:
    """Imputation-aware robust sandwich variance of the 2SLS coefficient.

    ``V = (x'P x)^{-1} x'Z (Z'Z)^{-1} W (Z'Z)^{-1} Z'x (x'P x)^{-1}`` with
    ``x`` the imputed regressor and ``W`` from :func:`w_ri`.  This is the
    finite-sample variance, not the ``sqrt(n)``-scaled one.  A negative value
    (possible in very small samples) is clamped to zero with a
    :class:`NegativeVarianceWarning`.
    """
    value, note = robust_ri_variance_with_note(d, fit, beta_hat)
    if note:
        warnings.warn(note, NegativeVarianceWarning, stacklevel=2)
    return value


def variance_conventional(
    d: ImputedDataset, beta_hat: float, *, projection: Projection | None = None
) -> float:
    """Non-robust 2SLS variance treating imputed x as data: ``sigma2 / x'P_Z x``, ``sigma2 = mean(u^2)``."""
    proj = projection if projection is not None else Projection.of(d.Z)
    qx = proj.coords(d.x_tilde)
    bread = float(qx @ qx)
    if bread == 0.0:
        raise EstimationError("x'P_Z x is zero: sandwich bread is singular")
    u = d.y - d.x_tilde * beta_hat
    return float(u @ u) / d.n / bread


@dataclass(frozen=True)
class PopulationMoments:
    """Population quantities for the homoskedastic closed forms.

    ``q_zz_0`` defaults to ``q_zz`` (MCAR).
    """

    q_xz: np.ndarray
    q_zz: np.ndarray
    sigma_u2: float
    sigma_v2: float
    sigma_uv: float
    p: float
    beta: float
    q_zz_0: np.ndarray | None = None

    def __post_init__(self):
        q_xz = np.atleast_1d(np.asarray(self.q_xz, dtype=float))
        q_zz = np.atleast_2d(np.asarray(self.q_zz, dtype=float))
        q_zz_0 = q_zz if self.q_zz_0 is None else np.atleast_2d(np.asarray(self.q_zz_0, dtype=float))
        object.__setattr__(self, "q_xz", q_xz)
        object.__setattr__(self, "q_zz", q_zz)
        object.__setattr__(self, "q_zz_0", q_zz_0)
        L = q_xz.shape[0]
        if q_zz.shape != (L, L) or q_zz_0.shape != (L, L):
            raise ValidationError("q_zz and q_zz_0 must be L-by-L with L = len(q_xz)")
        for name, q in (("q_zz", q_zz), ("q_zz_0", q_zz_0)):
            if not np.allclose(q, q.T, rtol=1e-12, atol=0.0):
                raise ValidationError(f"{name} is not symmetric", field=name)
        if not (self.sigma_u2 > 0 and self.sigma_v2 > 0):
            raise ValidationError("sigma_u2 and sigma_v2 must be positive")
        if abs(self.sigma_uv) > np.sqrt(self.sigma_u2 * self.sigma_v2) * (1 + 1e-12):
            raise ValidationError("|sigma_uv| exceeds sqrt(sigma_u2 * sigma_v2)", field="sigma_uv")
        if not 0.0 <= self.p < 1.0:
            raise ValidationError(f"p must lie in [0, 1), got {self.p}", field="p")


def _concentration(q_xz: np.ndarray, q: np.ndarray, what: str) -> float:
    """``q_xz' q^{-1} q_xz``."""
    return float(q_xz @ _SPDSolver(q, what)(q_xz))


def corollary1_variance(m: PopulationMoments, *, mcar: bool = True) -> float:
    """Asymptotic variance of the RI estimator under homoskedasticity.

    With ``mcar=True``::

        sigma_u2 / a + p / (1 - p) * sigma_v2 * beta^2 / a,   a = Q_xZ Q_ZZ^{-1} Q_Zx

    With ``mcar=False`` the complete-case instrument moment ``q_zz_0`` enters::

        sigma_u2 / a - sigma_v2 beta^2 / a + (Q_xZ Q_Z0Z0^{-1} Q_Zx) sigma_v2 beta^2 / ((1 - p) a^2)

    which reduces to the first form when ``q_zz_0 == q_zz``.
    """
    a = _concentration(m.q_xz, m.q_zz, "q_zz")
    sv_b2 = m.sigma_v2 * m.beta**2
    if mcar:
        return m.sigma_u2 / a + (m.p / (1.0 - m.p)) * sv_b2 / a
    a0 = _concentration(m.q_xz, m.q_zz_0, "q_zz_0")
    return m.sigma_u2 / a - sv_b2 / a + a0 * sv_b2 / ((1.0 - m.p) * a * a)


def conventional_limit(m: PopulationMoments) -> float:
    """Probability limit of ``n`` times the conventional variance under homoskedastic MCAR.

    ``(sigma_u2 + p (2 sigma_uv beta + sigma_v2 beta^2)) / a``.
    """
    a = _concentration(m.q_xz, m.q_zz, "q_zz")
    return m.sigma_u2 / a + m.p * (2.0 * m.sigma_uv * m.beta + m.sigma_v2 * m.beta**2) / a
