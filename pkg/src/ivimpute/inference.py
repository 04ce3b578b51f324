"""Wald tests and confidence intervals with standard-normal critical values.

All results are asymptotic, so no Student-t adjustment is made even in small
samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from scipy.stats import norm

from .errors import ValidationError


class VarianceKind(str, Enum):
    ROBUST_RI = "robust_ri"
    CONVENTIONAL = "conventional"
    COMPLETE_CASE_HC0 = "complete_case_hc0"


def critical_z(alpha: float) -> float:
    """Two-sided standard-normal critical value ``z`` with ``Phi(z) = 1 - alpha/2``."""
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}", field="alpha")
    return float(norm.isf(alpha / 2.0))


@dataclass(frozen=True)
class TestResult:
    """Outcome of a two-sided Wald test of ``beta = null_value``.

    ``extreme`` flags a zero standard error with ``beta_hat != null_value``,
    where ``t_stat`` is reported as +-inf.
    """

    __test__ = False  # not a pytest class

    beta_hat: float
    se: float
    null_value: float
    t_stat: float
    ci_low: float
    ci_high: float
    alpha: float
    reject: bool
    variance_kind: VarianceKind
    extreme: bool = False


def wald_test(
    beta_hat: float,
    variance: float,
    null_value: float = 0.0,
    alpha: float = 0.05,
    variance_kind: VarianceKind | str = VarianceKind.ROBUST_RI,
) -> TestResult:
    """Test ``H0: beta = null_value`` using a finite-sample variance (not sqrt(n)-scaled)."""
    if not variance >= 0.0:
        raise ValidationError(f"variance must be nonnegative, got {variance}", field="variance")
    z = critical_z(alpha)
    se = math.sqrt(variance)
    diff = beta_hat - null_value
    extreme = False
    if se > 0.0:
        t = diff / se
    elif diff == 0.0:
        t = 0.0
    else:
        t = math.copysign(math.inf, diff)
        extreme = True
    half = z * se
    ci_low, ci_high = beta_hat - half, beta_hat + half
    # Rejection is defined through the interval so test/CI duality holds bit-for-bit.
    reject = not (ci_low <= null_value <= ci_high)
    return TestResult(
        beta_hat=float(beta_hat),
        se=se,
        null_value=float(null_value),
        t_stat=float(t),
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        alpha=float(alpha),
        reject=reject,
        variance_kind=VarianceKind(variance_kind),
        extreme=extreme,
    )
