"""Interactive knowledge elicitation for sparse linear prediction.

A Bayesian regression model whose feature priors react to expert relevance
feedback, a bandit user model that decides which features are worth asking
about, and the session/service plumbing to run elicitation loops
interactively or against a simulated expert.
"""

from .dataset import Dataset, HeatmapData, SplitSpec, ingest, split
from .descriptors import AuxCorpus, ClusterModel, DescriptorMatrix
from .errors import (
    DataError,
    ElicitError,
    NotFoundError,
    SnapshotError,
    StateConflictError,
    ValidationError,
)
from .evaluation import (
    BenchmarkConfig,
    OracleExpert,
    PermutationTestResult,
    RunResult,
    max_distance_statistic,
    permutation_test,
    simulate_run,
)
from .prediction import (
    ModelParams,
    PosteriorChain,
    RelevanceVector,
    SamplerConfig,
    ridge_oracle,
    sample_posterior,
    sigma0_sq,
)
from .session import Condition, Session, SessionConfig
from .usermodel import RelevanceEstimate, UserModelState

__version__ = "0.1.0"

__all__ = [
    "AuxCorpus",
    "BenchmarkConfig",
    "ClusterModel",
    "Condition",
    "DataError",
    "Dataset",
    "DescriptorMatrix",
    "ElicitError",
    "HeatmapData",
    "ModelParams",
    "NotFoundError",
    "OracleExpert",
    "PermutationTestResult",
    "PosteriorChain",
    "RelevanceEstimate",
    "RelevanceVector",
    "RunResult",
    "SamplerConfig",
    "Session",
    "SessionConfig",
    "SnapshotError",
    "SplitSpec",
    "StateConflictError",
    "UserModelState",
    "ValidationError",
    "ingest",
    "max_distance_statistic",
    "permutation_test",
    "ridge_oracle",
    "sample_posterior",
    "sigma0_sq",
    "simulate_run",
    "split",
]
