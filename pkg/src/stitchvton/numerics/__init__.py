"""Dense float32 tensors, reverse-mode autodiff and Adam."""

from .adam import AdamState, adam_step
from .checkpoint import load_checkpoint, save_checkpoint
from .tensor import (
    Tensor,
    add,
    avg_pool2,
    backprop,
    concat,
    conv2d,
    group_norm,
    kaiming_uniform,
    mse,
    narrow,
    silu,
    tsum,
    upsample_nearest2,
)

__all__ = [
    "AdamState",
    "Tensor",
    "adam_step",
    "add",
    "avg_pool2",
    "backprop",
    "concat",
    "conv2d",
    "group_norm",
    "kaiming_uniform",
    "load_checkpoint",
    "mse",
    "narrow",
    "save_checkpoint",
    "silu",
    "tsum",
    "upsample_nearest2",
]
