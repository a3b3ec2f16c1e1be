"""Minimal reverse-mode autodiff over numpy arrays."""

from .gradcheck import finite_diff_check
from .ops import add, conv2d, l1_loss, mse_loss, pixel_shuffle, relu, resample, scale, sub
from .optim import Adam, AdamState, adam_step
from .tensor import Tape, Tensor, backward, is_grad_enabled, no_grad

__all__ = [
    "Adam", "AdamState", "Tape", "Tensor", "adam_step", "add", "backward", "conv2d",
    "finite_diff_check", "is_grad_enabled", "l1_loss", "mse_loss", "no_grad", "pixel_shuffle",
    "relu", "resample", "scale", "sub",
]
