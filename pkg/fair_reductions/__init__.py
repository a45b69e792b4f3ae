"""Fair binary classification by reduction to a sequence of weighted classification problems."""

from .dataset import DatasetSchema, TrainingSet, load_csv, split
from .evaluate import ModelArtifact, RandomizedClassifier, predict_expected, predict_sampled
from .expgrad import SaddleResult, SolverConfig, default_config, solve
from .gridsearch import GridSpec, grid_search, select_pareto
from .learners import LearnerConfig
from .moments import ConstraintSystem, build_dp, build_eo, build_error_rate, build_tpr, with_epsilon

__all__ = [
    "ConstraintSystem",
    "DatasetSchema",
    "GridSpec",
    "LearnerConfig",
    "ModelArtifact",
    "RandomizedClassifier",
    "SaddleResult",
    "SolverConfig",
    "TrainingSet",
    "build_dp",
    "build_eo",
    "build_error_rate",
    "build_tpr",
    "default_config",
    "grid_search",
    "load_csv",
    "predict_expected",
    "predict_sampled",
    "select_pareto",
    "solve",
    "split",
    "with_epsilon",
]
