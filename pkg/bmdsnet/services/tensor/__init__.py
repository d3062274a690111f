"""
Tensor Core

Reverse-mode autodiff engine over float64 NumPy arrays.
"""

from .tensor import Function, Tensor, as_tensor, parameter, zero_grads
from .functional import (
    add, sub, mul, div, scalar_mul, sigmoid, relu, softplus, exp, log, square,
    concat, reshape, broadcast_channels, constant,
)
from .reduce import (
    sum, mean, var, channel_l2_norm, channel_softmax, spatial_minmax_norm,
)
from .conv import conv3d, conv_output_size
from .interp import interp3d, sampling_matrix
from .gradcheck import grad_check, relative_error
from .optim import AdamW, AdamWState, adamw_step, cosine_lr

__all__ = [
    "Function",
    "Tensor",
    "as_tensor",
    "parameter",
    "zero_grads",
    "add",
    "sub",
    "mul",
    "div",
    "scalar_mul",
    "sigmoid",
    "relu",
    "softplus",
    "exp",
    "log",
    "square",
    "concat",
    "reshape",
    "broadcast_channels",
    "constant",
    "sum",
    "mean",
    "var",
    "channel_l2_norm",
    "channel_softmax",
    "spatial_minmax_norm",
    "conv3d",
    "conv_output_size",
    "interp3d",
    "sampling_matrix",
    "grad_check",
    "relative_error",
    "AdamW",
    "AdamWState",
    "adamw_step",
    "cosine_lr",
]
