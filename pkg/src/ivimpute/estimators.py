"""Point estimators: complete-case first stage, plain 2SLS and 2SLS after regression imputation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EstimationError
from .linalg import RANK_TOL, Projection
from .model import IVDataset, ImputedDataset, SplitDataset, impute, split, validate
from .variance import robust_ri_variance_with_note, variance_conventional


@dataclass(frozen=True, eq=False)
class FirstStageFit:
    """OLS of x on Z over the complete cases."""

    pi_cc: np.ndarray
    residuals_cc: np.ndarray
    f_statistic: float
    n0: int
    L: int


def _first_stage_fit(s: SplitDataset, *, need_dof: bool) -> FirstStageFit:
    n0, L = s.n0, s.L
    if n0 < L or (need_dof and n0 == L):
        raise EstimationError(f"first stage needs n0 > L complete cases (n0={n0}, L={L})")
    proj = Projection.of(s.Z0, what="Z0")
    q = proj.coords(s.x0)
    pi = proj.coef_from_coords(q)
    resid = s.x0 - s.Z0 @ pi
    if n0 == L:
        f = float("nan")
    else:
        explained = float(q @ q) / L
        s2 = float(resid @ resid) / (n0 - L)
        if s2 > 0.0:
            f = explained / s2
        else:
            f = float("inf") if explained > 0.0 else float("nan")
    return FirstStageFit(pi_cc=pi, residuals_cc=resid, f_statistic=f, n0=n0, L=L)


def first_stage(s: SplitDataset) -> FirstStageFit:
    """Complete-case first stage with the homoskedastic joint F for ``pi = 0``.

    ``F = (pi' Z0'Z0 pi / L) / (RSS / (n0 - L))``.
    """
    return _first_stage_fit(s, need_dof=True)


def _tsls_projected(proj: Projection, y: np.ndarray, x: np.ndarray) -> tuple[float, np.ndarray, float]:
    """Return ``(beta, Q'x, x'P_Z x)``."""
    qx = proj.coords(x)
    denom = float(qx @ qx)
    scale = float(x @ x)
    if not denom > (RANK_TOL**2) * scale or denom == 0.0:
        raise EstimationError("x'P_Z x is numerically zero: instruments have no first-stage relevance")
    beta = float(qx @ proj.coords(y)) / denom
    return beta, qx, denom


def tsls(y, x, Z) -> float:
    """Two-stage least squares coefficient ``(x'P_Z x)^{-1} x'P_Z y`` for a scalar regressor."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    return _tsls_projected(Projection.of(Z), y, x)[0]


def tsls_complete_case(s: SplitDataset) -> float:
    """2SLS on the complete cases only."""
    return tsls(s.y0, s.x0, s.Z0)


@dataclass(frozen=True, eq=False)
class RIEstimate:
    """2SLS after regression imputation, with the robust and conventional variances."""

    beta_hat: float
    variance_robust_ri: float
    variance_conventional: float
    n: int
    n0: int
    n1: int
    residuals_u_tilde: np.ndarray
    residuals_v_tilde: np.ndarray
    first_stage: FirstStageFit
    warnings: tuple[str, ...] = field(default=())

    @property
    def se_robust_ri(self) -> float:
        return float(np.sqrt(self.variance_robust_ri))

    @property
    def se_conventional(self) -> float:
        return float(np.sqrt(self.variance_conventional))

    @property
    def p_hat(self) -> float:
        return self.n1 / self.n


def imputation_residuals(d: ImputedDataset, beta_hat: float) -> tuple[np.ndarray, np.ndarray]:
    """Residuals ``y - x_tilde*beta`` and ``x_tilde - Z pi_cc`` of the imputed model."""
    u = d.y - d.x_tilde * beta_hat
    v = d.x_tilde - d.Z @ d.pi_cc
    return u, v


def tsls_ri(d: IVDataset) -> RIEstimate:
    """Impute missing x from the complete-case first stage, then run 2SLS on all rows."""
    d = validate(d)
    s = split(d)
    fit = _first_stage_fit(s, need_dof=False)
    imp = impute(s, fit.pi_cc)
    proj = Projection.of(imp.Z)
    beta, _, _ = _tsls_projected(proj, imp.y, imp.x_tilde)
    u, v = imputation_residuals(imp, beta)
    notes = []
    if s.n0 == s.L:
        notes.append("complete-case first stage is exactly identified (n0 == L); F statistic undefined")
    v_rob, note = robust_ri_variance_with_note(imp, fit, beta, projection=proj)
    if note:
        notes.append(note)
    v_conv = variance_conventional(imp, beta, projection=proj)
    return RIEstimate(
        beta_hat=beta,
        variance_robust_ri=v_rob,
        variance_conventional=v_conv,
        n=s.n,
        n0=s.n0,
        n1=s.n1,
        residuals_u_tilde=u,
        residuals_v_tilde=v,
        first_stage=fit,
        warnings=tuple(notes),
    )
