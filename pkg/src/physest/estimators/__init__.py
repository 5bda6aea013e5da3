from .base import (Estimator, EstimatorContext, OracleEstimator, ParamUpdate,
                   RandomSearchEstimator, TpeEstimator)
from .dataset import Dataset, gen_dataset, load_dataset, save_dataset
from .features import extract_features, feature_length
from .learned import LearnedEstimator
from .mlp import MlpModel, TrainConfig, init_mlp, load_mlp, mlp_forward, mlp_train, save_mlp
from .tpe import TpeConfig, TrialHistory, minimize, tpe_propose

__all__ = [
    "Estimator", "EstimatorContext", "OracleEstimator", "ParamUpdate", "RandomSearchEstimator",
    "TpeEstimator", "Dataset", "gen_dataset", "load_dataset", "save_dataset", "extract_features",
    "feature_length", "LearnedEstimator", "MlpModel", "TrainConfig", "init_mlp", "load_mlp",
    "mlp_forward", "mlp_train", "save_mlp", "TpeConfig", "TrialHistory", "minimize", "tpe_propose",
]
