"""From-scratch neural network engine (numpy only)."""

from .layers import (Dense, Lstm, LstmState, NonFiniteError, ShapeError, dense_forward,
                     lstm_step, sigmoid, softmax)
from .losses import ce_grad, ce_loss, mae_grad, mae_loss
from .networks import MLP, LstmRegressor, backprop, build, lstm_regressor_param_count, mlp_param_count
from .optim import AdamState, adam_step
from .training import History, TrainConfig, train

__all__ = [
    "Dense", "Lstm", "LstmState", "NonFiniteError", "ShapeError", "dense_forward", "lstm_step",
    "sigmoid", "softmax", "ce_grad", "ce_loss", "mae_grad", "mae_loss", "MLP", "LstmRegressor",
    "backprop", "build", "lstm_regressor_param_count", "mlp_param_count", "AdamState", "adam_step",
    "History", "TrainConfig", "train",
]
