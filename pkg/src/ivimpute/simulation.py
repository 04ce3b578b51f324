"""Monte Carlo engine for 2SLS with regression imputation under MCAR deletion.

Data generating process, per observation::

    Z_i ~ N(0, I_L / L),  v_i ~ N(0, 1),  x_i = Z_i' pi + v_i,  y_i = x_i beta + u_i
    u_i = s v_i + sqrt((1 - s^2) / (phi + 0.86^2)) (phi e1_i + 0.86 e2_i)
    e1_i ~ N(0, Z_i'Z_i),  e2_i ~ N(0, 0.86^2),  pi_j = sqrt(F L / n)

with ``s = sigma_uv``.  The variance normalization divides by ``phi``, not
``phi^2``, so ``Var(u)`` is not one; the formula is used as written.  With
``homoskedastic_override`` the error is ``u = s v + sqrt(1 - s^2) eta``.

Random numbers come from counter-based Philox streams keyed by
``(seed, replication_index, tag)``.  The DGP stream does not depend on the
missing probability, and deletion compares one uniform draw per row with
``p``, so every cell of a p-grid sees the same underlying samples and nested
missing sets.  Results never depend on the number of worker threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import EstimationError, SimulationError, ValidationError
from .estimators import tsls_ri
from .inference import wald_test
from .model import IVDataset
from .variance import PopulationMoments

_STREAM_DGP = 0
_STREAM_DELETE = 1

#: Replications allowed to fail (as a share of R) before a cell errors out.
MAX_FAILED_SHARE = 0.01

HETERO_SCALE = 0.86


def default_p_grid(p_max: float = 0.8, step: float = 0.005) -> tuple[float, ...]:
    k = int(round(p_max / step))
    return tuple(round(i * step, 12) for i in range(k + 1))


@dataclass(frozen=True)
class SimConfig:
    beta: float = 0.5
    L: int = 3
    n: int = 1000
    R: int = 5000
    sigma_uv: float = 0.3
    phi: float = 5.0
    f_target: float = 100.0
    p_grid: tuple[float, ...] = field(default_factory=default_p_grid)
    seed: int = 0
    alpha: float = 0.05
    homoskedastic_override: bool = False

    def __post_init__(self):
        object.__setattr__(self, "p_grid", tuple(float(p) for p in self.p_grid))
        checks = [
            ("L", isinstance(self.L, int) and self.L >= 1, "must be an integer >= 1"),
            ("n", isinstance(self.n, int) and self.n > self.L, "must be an integer > L"),
            ("R", isinstance(self.R, int) and self.R >= 1, "must be an integer >= 1"),
            ("sigma_uv", abs(self.sigma_uv) < 1, "must satisfy |sigma_uv| < 1"),
            ("phi", self.phi >= 0, "must be >= 0"),
            ("f_target", self.f_target > 0, "must be > 0"),
            ("alpha", 0 < self.alpha < 1, "must lie in (0, 1)"),
            ("seed", isinstance(self.seed, int) and 0 <= self.seed < 2**64, "must be an unsigned 64-bit integer"),
            ("beta", math.isfinite(self.beta), "must be finite"),
            ("p_grid", len(self.p_grid) >= 1, "must not be empty"),
        ]
        for name, ok, why in checks:
            if not ok:
                raise ValidationError(f"{name} {why} (got {getattr(self, name)!r})", field=name)
        for i, p in enumerate(self.p_grid):
            if not 0.0 <= p < 1.0:
                raise ValidationError(f"p_grid[{i}] must lie in [0, 1) (got {p!r})", field=f"p_grid[{i}]")

    @property
    def pi(self) -> np.ndarray:
        """First-stage coefficients: equal entries ``sqrt(F L / n)``."""
        return np.full(self.L, math.sqrt(self.f_target * self.L / self.n))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_grid"] = list(self.p_grid)
        return d

    @classmethod
    def from_dict(cls, data: dict, *, path: str = "config") -> "SimConfig":
        """Build from a JSON-like mapping, reporting bad fields by path."""
        if not isinstance(data, dict):
            raise ValidationError(f"{path} must be a JSON object")
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                raise ValidationError(f"{path}.{key}: unknown field", field=key)
            try:
                kwargs[key] = _coerce(key, value)
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{path}.{key}: {exc}", field=key) from None
        try:
            return cls(**kwargs)
        except ValidationError as exc:
            raise ValidationError(f"{path}.{exc.field}: {exc}", field=exc.field) from None


_INT_FIELDS = {"L", "n", "R", "seed"}
_FLOAT_FIELDS = {"beta", "sigma_uv", "phi", "f_target", "alpha"}


def _coerce(key: str, value):
    if key in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(f"expected an integer, got {value!r}")
        return value
    if key in _FLOAT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError(f"expected a number, got {value!r}")
        return float(value)
    if key == "p_grid":
        if not isinstance(value, list) or not all(
            isinstance(p, (int, float)) and not isinstance(p, bool) for p in value
        ):
            raise TypeError("expected a list of numbers")
        return tuple(float(p) for p in value)
    if key == "homoskedastic_override":
        if not isinstance(value, bool):
            raise TypeError(f"expected true/false, got {value!r}")
        return value
    raise TypeError(f"unsupported field {key}")


def _stream(seed: int, replication_index: int, tag: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(replication_index, tag))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """A simulated sample with its latent errors."""

    dataset: IVDataset
    u: np.ndarray
    v: np.ndarray
    pi: np.ndarray


def _dataset(y, x, Z, missing) -> IVDataset:
    # Draws are finite by construction; skip the validation pass.
    for a in (y, x, Z, missing):
        a.setflags(write=False)
    return IVDataset(y, x, Z, missing)


def generate(config: SimConfig, replication_index: int) -> GroundTruth:
    """Draw one complete sample for replication ``replication_index``."""
    rng = _stream(config.seed, replication_index, _STREAM_DGP)
    n, L = config.n, config.L
    Z = rng.standard_normal((n, L)) / math.sqrt(L)
    v = rng.standard_normal(n)
    e1 = rng.standard_normal(n)
    e2 = rng.standard_normal(n)
    s = config.sigma_uv
    if config.homoskedastic_override:
        u = s * v + math.sqrt(1.0 - s * s) * e1
    else:
        eps1 = np.sqrt(np.einsum("ij,ij->i", Z, Z)) * e1
        eps2 = HETERO_SCALE * e2
        scale = math.sqrt((1.0 - s * s) / (config.phi + HETERO_SCALE**2))
        u = s * v + scale * (config.phi * eps1 + HETERO_SCALE * eps2)
    pi = config.pi
    x = Z @ pi + v
    y = x * config.beta + u
    return GroundTruth(_dataset(y, x, Z, np.zeros(n, dtype=bool)), u, v, pi)


def mcar_delete(d: IVDataset, p: float, seed: int, replication_index: int) -> IVDataset:
    """Delete each x independently with probability ``p``."""
    if not 0.0 <= p < 1.0:
        raise ValidationError(f"p must lie in [0, 1), got {p}", field="p")
    if p == 0.0:
        return d
    draws = _stream(seed, replication_index, _STREAM_DELETE).random(d.n)
    missing = d.missing | (draws < p)
    x = np.where(missing, np.nan, d.x)
    return _dataset(d.y, x, d.Z, missing)


def population_moments(config: SimConfig, p: float) -> PopulationMoments:
    """Population moments of the DGP, for the closed-form variances."""
    L = config.L
    s = config.sigma_uv
    if config.homoskedastic_override:
        sigma_u2 = 1.0
    else:
        hetero = config.phi**2 + HETERO_SCALE**4
        sigma_u2 = s * s + (1.0 - s * s) / (config.phi + HETERO_SCALE**2) * hetero
    q_zz = np.eye(L) / L
    return PopulationMoments(
        q_xz=q_zz @ config.pi,
        q_zz=q_zz,
        sigma_u2=sigma_u2,
        sigma_v2=1.0,
        sigma_uv=s,
        p=p,
        beta=config.beta,
    )


@dataclass(frozen=True)
class Draw:
    """Per-replication record; ``ok`` is False for a failed replication."""

    ok: bool
    beta_hat: float = math.nan
    se_robust: float = math.nan
    se_conventional: float = math.nan
    cc_f: float = math.nan
    reject_robust: bool = False
    reject_conventional: bool = False


def replicate(config: SimConfig, p: float, replication_index: int) -> Draw:
    """Generate, delete and estimate one replication."""
    truth = generate(config, replication_index)
    d = mcar_delete(truth.dataset, p, config.seed, replication_index)
    if d.n - d.n_missing <= config.L:
        return Draw(ok=False)
    try:
        est = tsls_ri(d)
    except EstimationError:
        return Draw(ok=False)
    robust = wald_test(est.beta_hat, est.variance_robust_ri, config.beta, config.alpha, "robust_ri")
    conv = wald_test(est.beta_hat, est.variance_conventional, config.beta, config.alpha, "conventional")
    return Draw(
        ok=True,
        beta_hat=est.beta_hat,
        se_robust=robust.se,
        se_conventional=conv.se,
        cc_f=est.first_stage.f_statistic,
        reject_robust=robust.reject,
        reject_conventional=conv.reject,
    )


@dataclass(frozen=True)
class ExperimentRow:
    p: float
    rmse: float
    mean_se_robust: float
    mean_se_conventional: float
    rejection_robust: float
    rejection_conventional: float
    mean_cc_f: float
    replications_used: int

    COLUMNS = (
        "p",
        "rmse",
        "mean_se_robust",
        "mean_se_conventional",
        "rejection_robust",
        "rejection_conventional",
        "mean_cc_f",
        "replications_used",
    )

    def to_dict(self) -> dict:
        return {c: getattr(self, c) for c in self.COLUMNS}


def default_threads() -> int:
    return os.cpu_count() or 1


def draw_cell(config: SimConfig, p: float, *, threads: int = 1) -> list[Draw]:
    """All R replications of one cell, in replication order."""
    indices = range(config.R)
    if threads <= 1:
        return [replicate(config, p, r) for r in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: replicate(config, p, r), indices, chunksize=1))


def summarize_cell(config: SimConfig, p: float, draws: list[Draw]) -> ExperimentRow:
    """Reduce replication records in their fixed order."""
    ok = [d for d in draws if d.ok]
    failed = len(draws) - len(ok)
    if not ok or failed > MAX_FAILED_SHARE * len(draws):
        raise SimulationError(
            f"{failed} of {len(draws)} replications failed at p={p} "
            f"(limit {MAX_FAILED_SHARE:.0%})"
        )
    b = np.array([d.beta_hat for d in ok])
    se_r = np.array([d.se_robust for d in ok])
    se_c = np.array([d.se_conventional for d in ok])
    f = np.array([d.cc_f for d in ok])
    rej_r = np.array([d.reject_robust for d in ok])
    rej_c = np.array([d.reject_conventional for d in ok])
    return ExperimentRow(
        p=p,
        rmse=float(np.sqrt(np.mean((b - config.beta) ** 2))),
        mean_se_robust=float(np.mean(se_r)),
        mean_se_conventional=float(np.mean(se_c)),
        rejection_robust=float(np.mean(rej_r)),
        rejection_conventional=float(np.mean(rej_c)),
        mean_cc_f=float(np.mean(f)),
        replications_used=len(ok),
    )


def run_cell(config: SimConfig, p: float, *, threads: int = 1) -> ExperimentRow:
    """Run R replications at missing probability ``p`` and aggregate them."""
    return summarize_cell(config, p, draw_cell(config, p, threads=threads))


def run_experiment(config: SimConfig, *, threads: int = 1, progress=None) -> list[ExperimentRow]:
    """Sweep :func:`run_cell` over ``config.p_grid`` (rows ordered by p)."""
    rows = []
    for p in sorted(config.p_grid):
        rows.append(run_cell(config, p, threads=threads))
        if progress is not None:
            progress(rows[-1])
    return rows
