import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ivimpute import make_dataset  # noqa: E402

DATA = Path(__file__).parent / "data"


def random_iv(rng, n, L, p=0.0, beta=0.5, noise=1.0, rho=0.5):
    """Heteroskedastic IV sample with MCAR missingness in x."""
    Z = rng.standard_normal((n, L))
    pi = rng.uniform(0.5, 1.5, size=L)
    v = rng.standard_normal(n) * noise
    u = (rho * v + rng.standard_normal(n) * noise) * (1 + 0.5 * np.abs(Z[:, 0]))
    x = Z @ pi + v
    y = x * beta + u
    missing = rng.random(n) < p
    if (~missing).sum() <= L:
        missing[: L + 1] = False
    return y, x, Z, missing


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def fixture6():
    y = np.array([3.1, 1.2, 4.5, 2.0, 5.3, 0.7])
    x = np.array([1.0, 0.5, np.nan, 0.8, 2.1, np.nan])
    Z = np.array([[1, 0.5], [0, 1], [1, 1.5], [1, -1], [2, 0.3], [0, 2]], dtype=float)
    missing = np.isnan(x)
    return make_dataset(y, x, Z, missing)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
