"""Weak-innovations autoencoders for generative probabilistic forecasting."""

__version__ = "0.1.0"

from wiae.errors import DivergenceError, ValidationError, WiaeError
from wiae.model import InnovationsSequence, Normalization, WiaeModel
from wiae.training import CriticPair, TrainConfig, TrainReport, train

__all__ = [
    "CriticPair",
    "DivergenceError",
    "InnovationsSequence",
    "Normalization",
    "TrainConfig",
    "TrainReport",
    "ValidationError",
    "WiaeError",
    "WiaeModel",
    "train",
]
