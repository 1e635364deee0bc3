"""Learned program-similarity scoring on control-flow graphs, with classical GED baselines."""

from .ged import GedBudgetExhausted, GedResult, exact_ged, hed_ged_lower, lsap_ged_upper
from .graph_core import GraphPairRecord, LabeledCfg, LabelVocabulary, normalized_similarity
from .model import ModelConfig, load_checkpoint, save_checkpoint
from .train import TrainConfig, evaluate_methods, train

__all__ = [
    "GedBudgetExhausted",
    "GedResult",
    "GraphPairRecord",
    "LabelVocabulary",
    "LabeledCfg",
    "ModelConfig",
    "TrainConfig",
    "evaluate_methods",
    "exact_ged",
    "hed_ged_lower",
    "load_checkpoint",
    "lsap_ged_upper",
    "normalized_similarity",
    "save_checkpoint",
    "train",
]
