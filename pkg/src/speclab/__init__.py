"""speclab: outlier eigenvalues of finite-rank perturbations of random matrices."""

from .entry_laws import parse_law
from .ensembles import DiagonalSpikes, FullMean, JordanBlock, LowRank, SparseEntries
from .errors import (
    EigensolverError,
    ResourceLimitError,
    SpeclabError,
    TraceOverflowError,
    ValidationError,
    ZeroCountMismatch,
)
from .harness import ExperimentConfig, run_campaign, run_trial
from .series import TruncatedPowerSeries

__version__ = "0.1.0"

__all__ = [
    "DiagonalSpikes",
    "EigensolverError",
    "ExperimentConfig",
    "FullMean",
    "JordanBlock",
    "LowRank",
    "ResourceLimitError",
    "SparseEntries",
    "SpeclabError",
    "TraceOverflowError",
    "TruncatedPowerSeries",
    "ValidationError",
    "ZeroCountMismatch",
    "parse_law",
    "run_campaign",
    "run_trial",
]
