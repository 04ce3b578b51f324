import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from ivimpute import ValidationError
from ivimpute.inference import TestResult, VarianceKind, critical_z, wald_test


def _phi_integrated(z):
    dens = lambda t: math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)  # noqa: E731
    return 0.5 + quad(dens, 0.0, z, epsabs=1e-14, epsrel=1e-14)[0]


def _z_oracle(alpha):
    return brentq(lambda z: _phi_integrated(z) - (1 - alpha / 2), 0.0, 10.0, xtol=1e-14)


def test_critical_z_table_value():
    assert abs(critical_z(0.05) - 1.959964) < 1e-5


@pytest.mark.parametrize("alpha", [0.32, 0.05, 0.01, 0.1, 0.5, 0.9])
def test_critical_z_against_integrated_density(alpha):
    assert critical_z(alpha) == pytest.approx(_z_oracle(alpha), abs=1e-8)


def test_critical_z_0_32():
    assert critical_z(0.32) == pytest.approx(0.994458, abs=1e-6)


def test_critical_z_monotone_toward_zero():
    alphas = [0.5, 0.9, 0.99, 0.999, 1 - 1e-9]
    zs = [critical_z(a) for a in alphas]
    assert all(b < a for a, b in zip(zs, zs[1:]))
    assert 0 < zs[-1] < 1e-8


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_critical_z_rejects_bad_alpha(alpha):
    with pytest.raises(ValidationError):
        critical_z(alpha)


def test_wald_no_rejection_at_null():
    r = wald_test(0.5, 0.01, null_value=0.5)
    assert r.t_stat == 0.0 and not r.reject
    assert r.ci_low == pytest.approx(0.304, abs=5e-4)
    assert r.ci_high == pytest.approx(0.696, abs=5e-4)
    assert r.variance_kind is VarianceKind.ROBUST_RI


def test_wald_rejects_far_null():
    r = wald_test(1.0, 0.01, null_value=0.5, variance_kind="conventional")
    assert r.t_stat == pytest.approx(5.0)
    assert r.reject and r.variance_kind is VarianceKind.CONVENTIONAL


def test_wald_degenerate_zero_se():
    r = wald_test(0.5, 0.0, null_value=0.5)
    assert (r.t_stat, r.ci_low, r.ci_high, r.reject, r.extreme) == (0.0, 0.5, 0.5, False, False)
    r = wald_test(0.7, 0.0, null_value=0.5)
    assert r.t_stat == math.inf and r.reject and r.extreme


def test_wald_rejects_bad_input():
    with pytest.raises(ValidationError):
        wald_test(0.5, -1.0)
    with pytest.raises(ValidationError):
        wald_test(0.5, 1.0, alpha=1.0)


def test_result_not_collected_by_pytest():
    assert TestResult.__test__ is False


finite = st.floats(-1e6, 1e6, allow_nan=False)
positive = st.floats(1e-6, 1e3)
alphas = st.floats(0.001, 0.999)


@given(finite, positive, finite, alphas)
def test_test_and_interval_are_dual(b, se, null, alpha):
    r = wald_test(b, se * se, null, alpha)
    covers = r.ci_low <= null <= r.ci_high
    assert covers == (not r.reject)
    assert r.ci_low <= b <= r.ci_high
    z = critical_z(alpha)
    assert r.ci_high - r.ci_low == pytest.approx(2 * z * r.se, rel=1e-9, abs=8 * 2.3e-16 * abs(b))
    if r.se > 0:
        assert r.t_stat == pytest.approx((b - null) / r.se, rel=1e-12)
    if abs(abs(r.t_stat) - z) > 1e-9 * max(1.0, z):
        assert r.reject == (abs(r.t_stat) > z)


@given(finite, positive, finite, st.floats(1e-3, 1e3), alphas)
def test_rejection_scale_invariant(b, se, null, c, alpha):
    z = critical_z(alpha)
    t = (b - null) / se
    assume(abs(abs(t) - z) > 1e-6 * max(1.0, z))
    r1 = wald_test(b, se * se, null, alpha)
    r2 = wald_test(c * b, (c * se) ** 2, c * null, alpha)
    assert r1.reject == r2.reject


@given(st.floats(0.001, 0.998), st.floats(1e-4, 0.001))
def test_critical_z_strictly_decreasing(a, da):
    assume(a + da < 1)
    assert critical_z(a + da) < critical_z(a)
