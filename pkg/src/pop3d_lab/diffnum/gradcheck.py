"""Central finite differences, used as the independent gradient oracle."""

from __future__ import annotations

import numpy as np


def finite_difference_grad(loss_fn, params, h=1e-5):
    """Estimate d loss / d params coordinate by coordinate.

    ``params`` is a list of float arrays (or anything with ``arrays()``); each
    entry is perturbed in place and restored.  ``loss_fn()`` is called with no
    arguments and must read the current parameter values.
    """
    arrays = params.arrays() if hasattr(params, "arrays") else params
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        for i in np.ndindex(a.shape):
            orig = a[i]
            a[i] = orig + h
            up = float(loss_fn())
            a[i] = orig - h
            down = float(loss_fn())
            a[i] = orig
            g[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric, floor=1e-8):
    """``max|a - n| / max(max|a|, max|n|, floor)`` over all coordinates."""
    a = np.concatenate([np.ravel(x) for x in analytic])
    n = np.concatenate([np.ravel(x) for x in numeric])
    scale = max(np.max(np.abs(a)), np.max(np.abs(n)), floor)
    return float(np.max(np.abs(a - n)) / scale)
