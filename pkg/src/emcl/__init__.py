"""Online task-free continual learning with an ensemble memory:
key-addressed scaled-tanh classifiers over frozen embeddings."""

from .baselines import TanhBaseline, VanillaBaseline
from .data import EmbeddingDataset, SyntheticSpec, generate_synthetic, read_dataset, write_dataset
from .errors import ConfigError, DataError, EmclError, NumericError
from .harness import ExperimentConfig, ablation_sweep, run_experiment
from .metrics import RunRecord, accuracy, generalised_forgetting
from .model import (
    EnsembleMemory,
    Hyperparams,
    ModelOutput,
    cosine_similarity,
    dot_loss,
    ensemble_forward,
    t_forward,
    top_k_select,
)
from .schedules import Schedule, class_distribution, describe, make_schedule, sample_batch

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "EmbeddingDataset",
    "EmclError",
    "EnsembleMemory",
    "ExperimentConfig",
    "Hyperparams",
    "ModelOutput",
    "NumericError",
    "RunRecord",
    "Schedule",
    "SyntheticSpec",
    "TanhBaseline",
    "VanillaBaseline",
    "ablation_sweep",
    "accuracy",
    "class_distribution",
    "cosine_similarity",
    "describe",
    "dot_loss",
    "ensemble_forward",
    "generalised_forgetting",
    "generate_synthetic",
    "make_schedule",
    "read_dataset",
    "run_experiment",
    "sample_batch",
    "t_forward",
    "top_k_select",
    "write_dataset",
]
