"""On-demand diagnostic suite behind ``ivimpute check``.

Each check measures one number, compares it with an expected value and
reports pass/fail.  Setting ``IVIMPUTE_CHECK_FAULT`` to a check name (or
``all``) perturbs the measured value so the failure path can be exercised.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .estimators import first_stage, tsls, tsls_ri
from .model import impute, make_dataset, split
from .reference import naive_robust_ri
from .simulation import SimConfig, generate, mcar_delete, population_moments
from .variance import conventional_limit, corollary1_variance, moment_blocks, w_ri

FAULT_ENV = "IVIMPUTE_CHECK_FAULT"


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    expected: float
    criterion: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<28} measured={self.measured:.6g}  expected={self.expected:.6g}  ({self.criterion})"


@dataclass(frozen=True)
class Measurement:
    name: str
    measured: float
    expected: float
    criterion: str
    judge: Callable[[float], bool]


def _rel(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def _sample(rng, n, L, p):
    Z = rng.standard_normal((n, L))
    v = rng.standard_normal(n)
    u = (0.4 * v + rng.standard_normal(n)) * (1 + np.abs(Z[:, 0]))
    x = Z @ rng.uniform(0.5, 1.5, L) + v
    y = 0.5 * x + u
    m = rng.random(n) < p
    m[: L + 1] = False
    return y, x, Z, m


def check_p0_collapse():
    rng = np.random.default_rng(101)
    worst = 0.0
    for k in range(20):
        L = 1 + k % 3
        y, x, Z, _ = _sample(rng, 200, L, 0.0)
        est = tsls_ri(make_dataset(y, x, Z))
        worst = max(worst, _rel(est.beta_hat, tsls(y, x, Z)))
        u = est.residuals_u_tilde
        meat = (Z * (u * u)[:, None]).T @ Z
        imp = impute(split(make_dataset(y, x, Z)))
        worst = max(worst, _rel(w_ri(moment_blocks(imp, u, est.residuals_v_tilde), est.beta_hat), meat))
    yield Measurement("p0-collapse", worst, 0.0, "max relative error <= 1e-12", lambda m: m <= 1e-12)


def check_oracle_equivalence():
    rng = np.random.default_rng(202)
    worst = 0.0
    for k in range(10):
        n = int(rng.integers(40, 81))
        L = 2 + k % 2
        y, x, Z, m = _sample(rng, n, L, (0.2, 0.5)[k % 2])
        est = tsls_ri(make_dataset(y, x, Z, m))
        _, V, _ = naive_robust_ri(y, x, Z, m)
        if V > 0:
            worst = max(worst, _rel(est.variance_robust_ri, V))
    yield Measurement("oracle-equivalence", worst, 0.0, "max relative error <= 1e-10", lambda m: m <= 1e-10)


def check_closed_forms():
    worst = 0.0
    for sigma_uv in (-0.3, 0.0, 0.3):
        cfg = SimConfig(sigma_uv=sigma_uv, homoskedastic_override=True, R=1)
        m0 = population_moments(cfg, 0.0)
        worst = max(worst, abs(corollary1_variance(m0) - conventional_limit(m0)))
        cfg = SimConfig(beta=0.0, sigma_uv=sigma_uv, homoskedastic_override=True, R=1)
        for p in (0.2, 0.5, 0.8):
            m = population_moments(cfg, p)
            worst = max(worst, abs(corollary1_variance(m) - conventional_limit(m)))
    yield Measurement("closed-form-identities", worst, 0.0, "exact equality at p=0 and beta=0", lambda m: m == 0.0)


def check_corollary1():
    cfg = SimConfig(n=5000, R=1, sigma_uv=0.3, homoskedastic_override=True, seed=303)
    p = 0.4
    rob, conv = [], []
    for r in range(150):
        d = mcar_delete(generate(cfg, r).dataset, p, cfg.seed, r)
        est = tsls_ri(d)
        rob.append(cfg.n * est.variance_robust_ri)
        conv.append(cfg.n * est.variance_conventional)
    m = population_moments(cfg, p)
    yield Measurement(
        "corollary1-robust", float(np.mean(rob) / corollary1_variance(m)), 1.0,
        "mean n*V_robust / closed form within 7%", lambda v: abs(v - 1) <= 0.07,
    )
    yield Measurement(
        "corollary1-conventional", float(np.mean(conv) / conventional_limit(m)), 1.0,
        "mean n*V_conv / its limit within 7%", lambda v: abs(v - 1) <= 0.07,
    )


def check_dgp_moments():
    n = 100_000
    for homo in (False, True):
        cfg = SimConfig(n=n, R=1, sigma_uv=0.3, homoskedastic_override=homo, seed=404)
        t = generate(cfg, 0)
        Z, u, v = t.dataset.Z, t.u, t.v
        tag = "homo" if homo else "hetero"
        if not homo:
            se = np.sqrt(2.0 / n)
            yield Measurement("dgp-var-v", float(np.var(v)), 1.0, "within 3 s.e.", lambda m, se=se: abs(m - 1) <= 3 * se)
            zz = np.einsum("ij,ij->i", Z, Z)
            se_zz = float(np.std(zz) / np.sqrt(n))
            yield Measurement("dgp-mean-ZZ", float(zz.mean()), 1.0, "within 3 s.e.",
                              lambda m, se=se_zz: abs(m - 1) <= 3 * se)
        uv = (u - u.mean()) * (v - v.mean())
        se_uv = float(np.std(uv) / np.sqrt(n))
        yield Measurement(f"dgp-cov-uv-{tag}", float(uv.mean()), 0.3, "within 3 s.e.",
                          lambda m, se=se_uv: abs(m - 0.3) <= 3 * se)
        corr = float(np.corrcoef(u * u, np.einsum("ij,ij->i", Z, Z))[0, 1])
        if homo:
            yield Measurement("dgp-heterosk-homo", corr, 0.0, "|corr(u^2, Z'Z)| < 0.02", lambda m: abs(m) < 0.02)
        else:
            yield Measurement("dgp-heterosk-hetero", corr, 0.1, "corr(u^2, Z'Z) > 0.1", lambda m: m > 0.1)


def check_cc_f():
    cfg = SimConfig(R=1, seed=505)
    for p, lo, hi in ((0.0, 70.0, 130.0), (0.8, 14.0, 26.0)):
        fs = [first_stage(split(mcar_delete(generate(cfg, r).dataset, p, cfg.seed, r))).f_statistic
              for r in range(100)]
        mid = (lo + hi) / 2
        yield Measurement(f"cc-first-stage-f-p{p:g}", float(np.mean(fs)), mid, f"in [{lo:g}, {hi:g}]",
                          lambda m, lo=lo, hi=hi: lo <= m <= hi)


CHECKS: dict[str, Callable] = {
    "p0-collapse": check_p0_collapse,
    "oracle-equivalence": check_oracle_equivalence,
    "closed-forms": check_closed_forms,
    "corollary1": check_corollary1,
    "dgp-moments": check_dgp_moments,
    "cc-f": check_cc_f,
}


def run_checks(only: list[str] | None = None, *, fault: str | None = None) -> list[CheckResult]:
    """Run the named checks (all by default)."""
    if fault is None:
        fault = os.environ.get(FAULT_ENV) or None
    names = list(CHECKS) if not only else only
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown check(s): {', '.join(unknown)}; available: {', '.join(CHECKS)}")
    results = []
    for name in names:
        for m in CHECKS[name]():
            measured = m.measured
            if fault in ("all", name):
                measured = measured + 1e3 * (abs(m.expected) + 1.0)
            results.append(CheckResult(m.name, bool(m.judge(measured)), measured, m.expected, m.criterion))
    return results
