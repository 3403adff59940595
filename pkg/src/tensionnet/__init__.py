"""Conflict-consensus multimodal fake-news detection on precomputed embeddings."""

from .config import TrainConfig, load_config
from .data import Dataset, Sample, SynthSpec, generate_synthetic, load_dataset, \
    save_dataset, split_dataset
from .metrics import MetricsReport, compute_metrics
from .model import ConflictConsensusModel
from .train import evaluate, run_ablation, train

__version__ = "0.1.0"

__all__ = [
    "ConflictConsensusModel",
    "Dataset",
    "MetricsReport",
    "Sample",
    "SynthSpec",
    "TrainConfig",
    "compute_metrics",
    "evaluate",
    "generate_synthetic",
    "load_config",
    "load_dataset",
    "run_ablation",
    "save_dataset",
    "split_dataset",
    "train",
]
