"""Two-stage least squares with a regression-imputed endogenous regressor."""

from .errors import (
    EstimationError,
    IVImputeError,
    NegativeVarianceWarning,
    RankDeficientError,
    SimulationError,
    ValidationError,
)
from .dataio import EstimateReport, parse_iv_csv, read_iv_csv
from .estimators import FirstStageFit, RIEstimate, first_stage, tsls, tsls_complete_case, tsls_ri
from .inference import TestResult, VarianceKind, critical_z, wald_test
from .model import IVDataset, ImputedDataset, SplitDataset, impute, make_dataset, merge, split, validate
from .simulation import ExperimentRow, SimConfig, generate, mcar_delete, run_cell, run_experiment
from .variance import (
    MomentBlocks,
    PopulationMoments,
    conventional_limit,
    corollary1_variance,
    moment_blocks,
    variance_conventional,
    variance_robust_ri,
    w_ri,
)

__version__ = "0.1.0"
