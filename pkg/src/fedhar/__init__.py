"""Deterministic federated-learning simulator for wearable activity recognition."""

__version__ = "0.1.0"

from .dataset import ClientDataset, LabelMap, LabeledSeries, SensorWindow
from .federation import (
    EarlyStopState,
    FederationSettings,
    RunLog,
    aggregate_fedavg,
    run_experiment,
    update_early_stop,
)
from .metrics import ConfusionMatrix, communication_summary, macro_f1, per_class_f1
from .model import ModelConfig, ModelParams
from .synth import SyntheticSpec, generate_synthetic

__all__ = [
    "ClientDataset",
    "ConfusionMatrix",
    "EarlyStopState",
    "FederationSettings",
    "LabelMap",
    "LabeledSeries",
    "ModelConfig",
    "ModelParams",
    "RunLog",
    "SensorWindow",
    "SyntheticSpec",
    "aggregate_fedavg",
    "communication_summary",
    "generate_synthetic",
    "macro_f1",
    "per_class_f1",
    "run_experiment",
    "update_early_stop",
    "__version__",
]
