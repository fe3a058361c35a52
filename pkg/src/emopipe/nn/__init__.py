"""From-scratch neural network engine (numpy only)."""

from .adam import Adam, adam_step
from .layers import cross_entropy, mean_cross_entropy, softmax
from .models import (CnnModel, DenseLayer, MlpModel, Model, backward, cnn_forward,
                     cnn_shapes, mlp_forward)
from .serialize import load_model, read_model, save_model, write_model
from .training import TrainConfig, TrainHistory, accuracy, train

__all__ = [
    "Adam", "adam_step", "cross_entropy", "mean_cross_entropy", "softmax",
    "CnnModel", "DenseLayer", "MlpModel", "Model", "backward", "cnn_forward",
    "cnn_shapes", "mlp_forward", "load_model", "read_model", "save_model",
    "write_model", "TrainConfig", "TrainHistory", "accuracy", "train",
]
