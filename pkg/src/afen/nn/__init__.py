"""Five-branch convolutional network with self-attention, trained by Adam."""

from .layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Dropout,
    GlobalMaxPool,
    MaxPool2D,
    ReLU,
    SelfAttention,
    conv2d,
    max_pool2d,
    softmax,
    sparse_xent_loss,
)
from .model import DEFAULT_BLOCKS, DEFAULT_HEAD, INPUT_SCALES, CnnModel, ConvBlockSpec
from .training import AdamState, TrainConfig, adam_step, fit_cnn, predict_probs

__all__ = [
    "AdamState",
    "BatchNorm",
    "CnnModel",
    "Conv2D",
    "ConvBlockSpec",
    "DEFAULT_BLOCKS",
    "DEFAULT_HEAD",
    "Dense",
    "Dropout",
    "GlobalMaxPool",
    "INPUT_SCALES",
    "MaxPool2D",
    "ReLU",
    "SelfAttention",
    "TrainConfig",
    "adam_step",
    "conv2d",
    "fit_cnn",
    "max_pool2d",
    "predict_probs",
    "softmax",
    "sparse_xent_loss",
]
