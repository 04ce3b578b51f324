"""Independent reference implementations used only by the tests.

These deliberately take the slow, literal route: dense ``P_Z``, explicit
inverses, per-row Python loops.  They share no code with the package.
"""

from fractions import Fraction

import numpy as np


def dense_pz(Z):
    return Z @ np.linalg.inv(Z.T @ Z) @ Z.T


def dense_tsls(y, x, Z):
    P = dense_pz(Z)
    return float((x @ P @ y) / (x @ P @ x))


def dense_impute(x, Z, missing):
    Z0 = Z[~missing]
    pi = np.linalg.inv(Z0.T @ Z0) @ Z0.T @ x[~missing]
    x_tilde = x.copy()
    for i in range(len(x)):
        if missing[i]:
            x_tilde[i] = Z[i] @ pi
    return x_tilde, pi


def naive_robust_ri(y, x, Z, missing):
    """Return (beta, V_robust, V_conventional, W) by literal evaluation of the robust-RI sandwich."""
    n, L = Z.shape
    x_tilde, pi = dense_impute(x, Z, missing)
    P = dense_pz(Z)
    xpx = x_tilde @ P @ x_tilde
    beta = (x_tilde @ P @ y) / xpx
    u = [y[i] - x_tilde[i] * beta for i in range(n)]
    v = [x_tilde[i] - Z[i] @ pi for i in range(n)]

    S_uu = np.zeros((L, L))
    S_uv0 = np.zeros((L, L))
    S_vv0 = np.zeros((L, L))
    S0 = np.zeros((L, L))
    S1 = np.zeros((L, L))
    for i in range(n):
        zz = np.outer(Z[i], Z[i])
        S_uu += u[i] ** 2 * zz
        if missing[i]:
            S1 += zz
        else:
            S0 += zz
            S_uv0 += u[i] * v[i] * zz
            S_vv0 += v[i] ** 2 * zz
    S0inv = np.linalg.inv(S0)
    quartic = np.zeros((L, L))
    for i in range(n):
        if missing[i]:
            zz = np.outer(Z[i], Z[i])
            quartic += zz @ S0inv @ S_vv0 @ S0inv @ zz
    W = (
        S_uu
        - 2 * S_uv0 @ S0inv @ S1 * beta
        + (S1 @ S0inv @ S_vv0 @ S0inv @ S1 - quartic) * beta**2
    )
    ZZinv = np.linalg.inv(Z.T @ Z)
    a = x_tilde @ Z @ ZZinv
    V = (a @ W @ a) / xpx**2
    sigma2 = sum(ui**2 for ui in u) / n
    V_conv = sigma2 / xpx
    return float(beta), float(V), float(V_conv), W


def hc0_tsls(y, x, Z):
    """Textbook HC0 and non-robust (1/n) variances of 2SLS via the fitted regressor."""
    x_hat = dense_pz(Z) @ x
    beta = (x_hat @ y) / (x_hat @ x)
    u = y - x * beta
    denom = x_hat @ x_hat
    hc0 = sum(x_hat[i] ** 2 * u[i] ** 2 for i in range(len(y))) / denom**2
    nonrobust = (u @ u / len(y)) / denom
    return float(beta), float(hc0), float(nonrobust)


# -- exact rational arithmetic -------------------------------------------------


def _fmat(rows):
    return [[Fraction(str(v)) for v in r] for r in rows]


def _mul(A, B):
    return [[sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0]))] for i in range(len(A))]


def _t(A):
    return [list(r) for r in zip(*A)]


def _inv(A):
    n = len(A)
    M = [list(A[i]) + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for c in range(n):
        piv = next(r for r in range(c, n) if M[r][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        d = M[c][c]
        M[c] = [v / d for v in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    return [row[n:] for row in M]


def exact_ri(y, x, Z, missing):
    """Exact rational beta_RI, robust and conventional variances, pi_cc and the CC first-stage F."""
    n, L = len(y), len(Z[0])
    Zf = _fmat(Z)
    yf = [Fraction(str(v)) for v in y]
    obs = [i for i in range(n) if not missing[i]]
    Z0 = [Zf[i] for i in obs]
    x0 = [[Fraction(str(x[i]))] for i in obs]
    S0inv = _inv(_mul(_t(Z0), Z0))
    pi = [r[0] for r in _mul(S0inv, _mul(_t(Z0), x0))]
    fit = [sum(Zf[i][j] * pi[j] for j in range(L)) for i in range(n)]
    xt = [fit[i] if missing[i] else Fraction(str(x[i])) for i in range(n)]
    ZZinv = _inv(_mul(_t(Zf), Zf))
    Zx = [sum(Zf[i][j] * xt[i] for i in range(n)) for j in range(L)]
    Zy = [sum(Zf[i][j] * yf[i] for i in range(n)) for j in range(L)]
    g = [sum(ZZinv[j][k] * Zx[k] for k in range(L)) for j in range(L)]
    xpx = sum(g[j] * Zx[j] for j in range(L))
    beta = sum(g[j] * Zy[j] for j in range(L)) / xpx
    u = [yf[i] - xt[i] * beta for i in range(n)]
    v = [xt[i] - fit[i] for i in range(n)]

    def outer(i, w):
        return [[w * Zf[i][a] * Zf[i][b] for b in range(L)] for a in range(L)]

    def add(A, B):
        return [[A[a][b] + B[a][b] for b in range(L)] for a in range(L)]

    zero = [[Fraction(0)] * L for _ in range(L)]
    S_uu, S_uv0, S_vv0, S1 = zero, zero, zero, zero
    for i in range(n):
        S_uu = add(S_uu, outer(i, u[i] ** 2))
        if missing[i]:
            S1 = add(S1, outer(i, Fraction(1)))
        else:
            S_uv0 = add(S_uv0, outer(i, u[i] * v[i]))
            S_vv0 = add(S_vv0, outer(i, v[i] ** 2))
    A = _mul(_mul(S0inv, S_vv0), S0inv)
    quartic = zero
    for i in range(n):
        if missing[i]:
            zz = outer(i, Fraction(1))
            quartic = add(quartic, _mul(_mul(zz, A), zz))
    C = _mul(S0inv, S1)
    t2 = _mul(S_uv0, C)
    t3 = _mul(_mul(S1, A), S1)
    W = [
        [S_uu[a][b] - 2 * beta * t2[a][b] + beta**2 * (t3[a][b] - quartic[a][b]) for b in range(L)]
        for a in range(L)
    ]
    V = sum(g[a] * W[a][b] * g[b] for a in range(L) for b in range(L)) / xpx**2
    V_conv = (sum(ui**2 for ui in u) / n) / xpx
    n0 = len(obs)
    resid = [Fraction(str(x[i])) - fit[i] for i in obs]
    rss = sum(r * r for r in resid)
    explained = sum(fit[i] ** 2 for i in obs)
    F = (explained / L) / (rss / (n0 - L))
    return {"beta": beta, "V_robust": V, "V_conv": V_conv, "pi": pi, "F": F}
