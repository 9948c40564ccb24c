"""Adversarially robust autoencoders for novelty detection, in plain numpy."""
from .attacks import PerturbationSpec, attack_batch
from .config import ExperimentConfig, preset
from .errors import AraeError
from .model import Autoencoder, SampleSet, anomaly_score
from .modelfile import load_model, save_model
from .training import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "Autoencoder", "SampleSet", "anomaly_score", "PerturbationSpec", "attack_batch",
    "TrainConfig", "train", "ExperimentConfig", "preset", "load_model", "save_model",
    "AraeError",
]
