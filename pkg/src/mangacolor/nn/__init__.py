"""Hand-built numeric core: tensors, layer ops, Adam, checkpoints."""

from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .ops import (
    add,
    batch_norm,
    broadcast_spatial,
    concat_channels,
    conv2d,
    fully_connected,
    mean_spatial,
    mse_loss,
    mul_scalar,
    relu,
    reshape,
    scale_shift,
    sigmoid,
    sigmoid_cross_entropy,
    softmax_cross_entropy,
    upsample2x_bilinear,
    upsample2x_nearest,
)
from .params import AdamConfig, AdamState, ParamSet, adam_step, he_init
from .tensor import Tensor

__all__ = [
    "AdamConfig",
    "AdamState",
    "ParamSet",
    "Tensor",
    "adam_step",
    "add",
    "batch_norm",
    "broadcast_spatial",
    "concat_channels",
    "conv2d",
    "fully_connected",
    "grad_check",
    "he_init",
    "load_checkpoint",
    "mean_spatial",
    "mse_loss",
    "mul_scalar",
    "relu",
    "reshape",
    "save_checkpoint",
    "scale_shift",
    "sigmoid",
    "sigmoid_cross_entropy",
    "softmax_cross_entropy",
    "upsample2x_bilinear",
    "upsample2x_nearest",
]
