"""Slow literal implementations used as oracles by ``ivimpute check``.

Dense ``P_Z``, explicit inverses and per-row loops; nothing here is shared
with the estimators it checks.
"""

from __future__ import annotations

import numpy as np


def dense_tsls(y, x, Z) -> float:
    P = Z @ np.linalg.inv(Z.T @ Z) @ Z.T
    return float((x @ P @ y) / (x @ P @ x))


def naive_robust_ri(y, x, Z, missing) -> tuple[float, float, np.ndarray]:
    """Return ``(beta, V_robust, W)`` with every sum written out row by row."""
    n, L = Z.shape
    obs = ~missing
    pi = np.linalg.inv(Z[obs].T @ Z[obs]) @ Z[obs].T @ x[obs]
    xt = np.array([Z[i] @ pi if missing[i] else x[i] for i in range(n)])
    P = Z @ np.linalg.inv(Z.T @ Z) @ Z.T
    xpx = xt @ P @ xt
    beta = (xt @ P @ y) / xpx
    S = {k: np.zeros((L, L)) for k in ("uu", "uv0", "vv0", "zz0", "zz1")}
    for i in range(n):
        zz = np.outer(Z[i], Z[i])
        ui = y[i] - xt[i] * beta
        vi = xt[i] - Z[i] @ pi
        S["uu"] += ui * ui * zz
        if missing[i]:
            S["zz1"] += zz
        else:
            S["zz0"] += zz
            S["uv0"] += ui * vi * zz
            S["vv0"] += vi * vi * zz
    inv0 = np.linalg.inv(S["zz0"])
    quartic = np.zeros((L, L))
    for i in range(n):
        if missing[i]:
            zz = np.outer(Z[i], Z[i])
            quartic += zz @ inv0 @ S["vv0"] @ inv0 @ zz
    W = (
        S["uu"]
        - 2 * S["uv0"] @ inv0 @ S["zz1"] * beta
        + (S["zz1"] @ inv0 @ S["vv0"] @ inv0 @ S["zz1"] - quartic) * beta**2
    )
    g = xt @ Z @ np.linalg.inv(Z.T @ Z)
    return float(beta), float(g @ W @ g / xpx**2), W
