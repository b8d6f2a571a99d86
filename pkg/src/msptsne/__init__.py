"""Multi-scale parametric t-SNE with rank-based quality assessment."""
from .neural_net import MlpModel, init_mlp, load_model, save_model
from .quality import QualityCurve, evaluate_embedding
from .similarities import (hd_similarities_fixed, hd_similarities_multiscale,
                           ld_similarities_student, squared_euclidean_distances)
from .trainer import TrainConfig, TrainLog, fit, transform

__all__ = [
    "MlpModel", "init_mlp", "load_model", "save_model",
    "QualityCurve", "evaluate_embedding",
    "hd_similarities_fixed", "hd_similarities_multiscale", "ld_similarities_student",
    "squared_euclidean_distances",
    "TrainConfig", "TrainLog", "fit", "transform",
]
