"""Adam, global-norm gradient clipping and the linear step-size schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, DiagnosticsError


@dataclass
class AdamState:
    step_size: float = 2.5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-5
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, arrays, **kwargs):
        return cls(m=[np.zeros_like(a) for a in arrays], v=[np.zeros_like(a) for a in arrays], **kwargs)


def _arrays(params):
    return params.arrays() if hasattr(params, "arrays") else list(params)


def adam_step(state: AdamState, params, grads, lr_scale=1.0):
    """Apply one bias-corrected Adam step in place and return ``params``.

    The effective step size is ``state.step_size * lr_scale``.  An all-zero
    gradient leaves the parameters where they are (moments and ``t`` still
    advance), as does ``lr_scale == 0``.
    """
    if not 0.0 <= lr_scale <= 1.0:
        raise ContractError(f"lr_scale must lie in [0, 1], got {lr_scale}")
    arrays = _arrays(params)
    if not state.m:
        state.m = [np.zeros_like(a) for a in arrays]
        state.v = [np.zeros_like(a) for a in arrays]
    if len(grads) != len(arrays) or len(state.m) != len(arrays):
        raise ContractError("params, grads and Adam moments must align")
    for i, (a, g) in enumerate(zip(arrays, grads)):
        if g.shape != a.shape:
            raise ContractError(f"gradient {i} has shape {g.shape}, parameter has {a.shape}")
        if not np.all(np.isfinite(g)):
            raise DiagnosticsError(f"non-finite gradient for parameter {i}; update rejected")

    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for m, v, g in zip(state.m, state.v, grads):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
    if lr_scale == 0.0 or not any(np.any(g) for g in grads):
        return params
    lr = state.step_size * lr_scale
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for a, m, v in zip(arrays, state.m, state.v):
        a -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


def clip_grad_norm(grads, max_norm):
    """Rescale ``grads`` so their joint L2 norm is at most ``max_norm``.

    Returns ``(grads, norm_before)``; ``max_norm <= 0`` disables clipping.
    """
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if max_norm is None or max_norm <= 0 or norm <= max_norm:
        return grads, norm
    scale = max_norm / (norm + 1e-12)
    return [g * scale for g in grads], norm


def linear_decay(iteration, total):
    """Step-size multiplier ``1 - iteration / total``."""
    if total <= 0:
        raise ContractError("linear_decay needs total > 0")
    if not 0 <= iteration < total:
        raise ContractError(f"iteration {iteration} outside [0, {total})")
    return 1.0 - iteration / total
