"""Categorical and diagonal-Gaussian action distributions.

Parameters may be tensors produced by the network (gradients flow) or plain
arrays (treated as constants).  Everything here works on a leading batch of
any shape: logits ``(..., K)``, means/log-stds ``(..., d)``.

Divergences:

* ``kl_divergence(old, new)``  forward KL, sum over actions of
  ``old * ln(old / new)``; closed form for Gaussians.
* ``total_variation(p, q)``  half the L1 distance (categorical only; no
  closed form exists for Gaussians).
* ``point_prob_distance(old, new, a)``  squared difference of the two
  probabilities (or densities) of the sampled action ``a``.  For categorical
  inputs it never exceeds ``total_variation(old, new) ** 2``.
"""

from __future__ import annotations

import math

import numpy as np

from .diffnum.tensor import Tensor, as_tensor, exp, log_softmax, take_last, where
from .errors import ContractError, DimensionError

LOG_2PI = math.log(2.0 * math.pi)
SIMPLEX_TOL = 1e-9


class Categorical:
    """Distribution over ``K`` discrete actions, stored as logits."""

    def __init__(self, logits=None, probs=None):
        if (logits is None) == (probs is None):
            raise ContractError("pass exactly one of logits or probs")
        if probs is not None:
            p = np.asarray(probs.data if isinstance(probs, Tensor) else probs, dtype=np.float64)
            check_simplex(p)
            with np.errstate(divide="ignore"):
                logits = np.log(p)
        self.logits = as_tensor(logits)
        if self.logits.ndim < 1 or self.logits.shape[-1] < 1:
            raise DimensionError("categorical logits need a trailing action axis")

    @property
    def num_actions(self):
        return self.logits.shape[-1]

    @property
    def batch_shape(self):
        return self.logits.shape[:-1]

    def log_probs(self):
        return log_softmax(self.logits)

    def probs(self):
        return exp(self.log_probs())

    def detach(self):
        return Categorical(logits=self.logits.data.copy())

    def params_array(self):
        return self.logits.data

    def __repr__(self):
        return f"Categorical(probs={np.round(self.probs().data, 6)!r})"


class DiagGaussian:
    """Independent Gaussians per action dimension, stored as mean and log-std."""

    def __init__(self, mean, log_std):
        self.mean = as_tensor(mean)
        self.log_std = as_tensor(log_std)
        if self.mean.shape != self.log_std.shape:
            raise DimensionError(f"mean {self.mean.shape} and log_std {self.log_std.shape} differ")
        if not np.all(np.isfinite(self.log_std.data)):
            raise ContractError("log_std must be finite")

    @property
    def dim(self):
        return self.mean.shape[-1]

    @property
    def batch_shape(self):
        return self.mean.shape[:-1]

    def std(self):
        return exp(self.log_std)

    def detach(self):
        return DiagGaussian(self.mean.data.copy(), self.log_std.data.copy())

    def params_array(self):
        return np.concatenate([self.mean.data, self.log_std.data], axis=-1)

    def __repr__(self):
        return f"DiagGaussian(mean={self.mean.data!r}, log_std={self.log_std.data!r})"


def check_simplex(p):
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ContractError("probabilities must be finite and non-negative")
    total = p.sum(axis=-1)
    if np.any(np.abs(total - 1.0) > SIMPLEX_TOL):
        raise ContractError(f"probabilities sum to {total}, not 1")


def _same_family(a, b):
    if type(a) is not type(b):
        raise ContractError(f"distribution families differ: {type(a).__name__} vs {type(b).__name__}")
    if isinstance(a, Categorical) and a.num_actions != b.num_actions:
        raise DimensionError(f"categorical sizes differ: {a.num_actions} vs {b.num_actions}")
    if isinstance(a, DiagGaussian) and a.dim != b.dim:
        raise DimensionError(f"gaussian dimensions differ: {a.dim} vs {b.dim}")


def _as_dist(x):
    if isinstance(x, (Categorical, DiagGaussian)):
        return x
    return Categorical(probs=x)


def _uniforms(rng, shape):
    # one generator per batch row keeps actors' streams independent
    if isinstance(rng, (list, tuple)):
        if len(rng) != shape[0]:
            raise ContractError(f"{len(rng)} generators for {shape[0]} batch rows")
        return np.stack([g.random(shape[1:]) for g in rng])
    return rng.random(shape)


def _normals(rng, shape):
    if isinstance(rng, (list, tuple)):
        if len(rng) != shape[0]:
            raise ContractError(f"{len(rng)} generators for {shape[0]} batch rows")
        return np.stack([g.standard_normal(shape[1:]) for g in rng])
    return rng.standard_normal(shape)


def sample(dist, rng):
    """Draw one action per batch position.

    ``rng`` is a Generator, or a list with one Generator per row of a
    one-dimensional batch.
    """
    if isinstance(dist, Categorical):
        p = dist.probs().data
        check_simplex(p)
        cdf = np.cumsum(p, axis=-1)
        u = _uniforms(rng, p.shape[:-1] + (1,))
        # inverse CDF: index of the first cumulative mass exceeding u
        idx = (cdf <= u).sum(axis=-1)
        idx = np.minimum(idx, p.shape[-1] - 1)
        # walk past trailing zero-mass entries that rounding might land on
        while True:
            bad = np.take_along_axis(p, idx[..., None], axis=-1)[..., 0] == 0
            if not np.any(bad):
                break
            idx = np.where(bad, idx - 1, idx)
        return idx if idx.ndim else int(idx)
    noise = _normals(rng, dist.mean.shape)
    return dist.mean.data + np.exp(dist.log_std.data) * noise


def log_prob(dist, action):
    """ln pi(a); a sum over dimensions for Gaussians.  Zero mass gives -inf."""
    if isinstance(dist, Categorical):
        action = np.asarray(action)
        if np.any(action < 0) or np.any(action >= dist.num_actions):
            raise ContractError(f"action outside [0, {dist.num_actions})")
        return take_last(dist.log_probs(), action)
    a = np.asarray(action, dtype=np.float64)
    if a.shape != dist.mean.shape:
        raise DimensionError(f"action shape {a.shape} != distribution shape {dist.mean.shape}")
    z = (a - dist.mean) * exp(-dist.log_std)
    return (-0.5 * z * z - dist.log_std - 0.5 * LOG_2PI).sum(axis=-1)


def prob(dist, action):
    """pi(a): probability for categorical, joint density for Gaussian."""
    return exp(log_prob(dist, action))


def entropy(dist):
    if isinstance(dist, Categorical):
        lp = dist.log_probs()
        finite = np.isfinite(lp.data)
        lp_safe = where(finite, lp, 0.0)
        return -(exp(lp_safe) * lp_safe).sum(axis=-1)
    return (dist.log_std + 0.5 * (LOG_2PI + 1.0)).sum(axis=-1)


def kl_divergence(old, new):
    """KL(old || new).  ``+inf`` where new puts zero mass on old's support."""
    old, new = _as_dist(old), _as_dist(new)
    _same_family(old, new)
    if isinstance(old, Categorical):
        lp_old, lp_new = old.log_probs(), new.log_probs()
        support = lp_old.data > -np.inf
        diff = where(support, lp_old - lp_new, 0.0)
        return (where(support, exp(lp_old), 0.0) * diff).sum(axis=-1)
    var_ratio = exp(2.0 * (old.log_std - new.log_std))
    dm = (old.mean - new.mean) * exp(-new.log_std)
    return (new.log_std - old.log_std + 0.5 * (var_ratio + dm * dm) - 0.5).sum(axis=-1)


def total_variation(p, q):
    """Half the L1 distance between two categorical distributions."""
    p, q = _as_dist(p), _as_dist(q)
    _same_family(p, q)
    if not isinstance(p, Categorical):
        raise ContractError("total variation is only defined here for categorical distributions")
    return 0.5 * (p.probs() - q.probs()).abs().sum(axis=-1)


def point_prob_distance(old, new, action, joint=True):
    """``(pi_old(a) - pi_new(a)) ** 2`` for the sampled action ``a``.

    Gaussian inputs use densities.  With ``joint=True`` (the default) the
    density is the product over action dimensions; ``joint=False`` instead
    sums the squared per-dimension density gaps.  Densities are not bounded
    by 1, so small standard deviations make this term large.
    """
    old, new = _as_dist(old), _as_dist(new)
    _same_family(old, new)
    if isinstance(old, Categorical) or joint:
        gap = prob(old, action) - prob(new, action)
        return gap * gap
    a = np.asarray(action, dtype=np.float64)

    def dens(d):
        z = (a - d.mean) * exp(-d.log_std)
        return exp(-0.5 * z * z - d.log_std - 0.5 * LOG_2PI)

    gap = dens(old) - dens(new)
    return (gap * gap).sum(axis=-1)

