"""Training companion for the gnnsi engine.

Trains small GCN/GIN graph classifiers on synthetic two-class data and
exports the weights in the engine's JSON weight format (format_version
1), so the selective-inference pipeline can run on trained models.
"""

from .config import DatasetConfig, TrainConfig
from .data import make_dataset, save_graph_file
from .export import export_weights, load_weight_doc
from .models import GCNClassifier, GINClassifier, build_model, normalize_adjacency
from .train import TrainingDiverged, TrainResult, train

__all__ = [
    "DatasetConfig", "TrainConfig", "make_dataset", "save_graph_file",
    "export_weights", "load_weight_doc", "GCNClassifier", "GINClassifier",
    "build_model", "normalize_adjacency", "TrainingDiverged", "TrainResult",
    "train",
]
