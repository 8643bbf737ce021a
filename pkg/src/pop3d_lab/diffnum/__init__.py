"""Minimal reverse-mode differentiable numeric core."""

from .gradcheck import finite_difference_grad, max_relative_error
from .nn import MlpParams, forward, init_mlp, orthogonal
from .optim import AdamState, adam_step, clip_grad_norm, linear_decay
from .tensor import (Tensor, as_tensor, clip, exp, grad, log, log_softmax, minimum,
                     take_last, tanh, where)

__all__ = [
    "AdamState", "MlpParams", "Tensor", "adam_step", "as_tensor", "clip", "clip_grad_norm",
    "exp", "finite_difference_grad", "forward", "grad", "init_mlp", "linear_decay", "log",
    "log_softmax", "max_relative_error", "minimum", "orthogonal", "take_last", "tanh", "where",
]
