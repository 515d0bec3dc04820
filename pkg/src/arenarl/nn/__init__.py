"""Minimal dense-network stack with hand-written forward and backward passes."""

from .gradcheck import grad_check
from .layers import Dense, LayerNorm, LeakyReLU, MultiHeadAttention, Param
from .losses import huber, softmax, softmax_cross_entropy
from .optim import Optimizer, TrainingError, effective_learning_rate

__all__ = [
    "Dense",
    "LayerNorm",
    "LeakyReLU",
    "MultiHeadAttention",
    "Optimizer",
    "Param",
    "TrainingError",
    "effective_learning_rate",
    "grad_check",
    "huber",
    "softmax",
    "softmax_cross_entropy",
]
