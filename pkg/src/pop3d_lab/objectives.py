"""Policy surrogate objectives and the combined training loss.

Every policy objective returns a scalar to *maximise*.  Old-policy quantities
(``old`` distribution parameters and ``old_log_prob``) are plain arrays, so no
gradient ever reaches them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .diffnum.tensor import Tensor, as_tensor, clip, exp, minimum
from .distributions import entropy, kl_divergence, log_prob, point_prob_distance
from .errors import ContractError


class Objective(str, enum.Enum):
    POP3D = "pop3d"
    PPO_CLIP = "ppo"
    FIXED_KL = "fixed-kl"
    VANILLA_PG = "pg"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"ppo-clip": "ppo", "ppo_clip": "ppo", "fixed_kl": "fixed-kl",
                   "baseline": "fixed-kl", "vanilla_pg": "pg", "vanilla-pg": "pg"}
        key = str(value).lower()
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ContractError(f"unknown objective {value!r}") from None


@dataclass(frozen=True)
class ObjectiveKind:
    tag: Objective
    beta: float = 5.0
    clip_eps: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "tag", Objective.parse(self.tag))
        if self.tag in (Objective.POP3D, Objective.FIXED_KL) and not self.beta >= 0:
            raise ContractError(f"penalty coefficient must be non-negative, got {self.beta}")
        if self.tag is Objective.PPO_CLIP and not 0.0 < self.clip_eps < 1.0:
            raise ContractError(f"clip ratio must lie in (0, 1), got {self.clip_eps}")


@dataclass(frozen=True)
class LossWeights:
    value_coeff: float = 1.0
    entropy_coeff: float = 0.01

    def __post_init__(self):
        if self.value_coeff < 0 or self.entropy_coeff < 0:
            raise ContractError("loss weights must be non-negative")


@dataclass
class PolicyBatch:
    """One minibatch as seen by the objectives.

    ``new`` carries differentiable tensors; ``old`` and ``old_log_prob`` are
    constants.  ``values``/``return_targets`` are only needed by
    :func:`total_loss`.
    """

    new: object
    old: object
    actions: np.ndarray
    advantages: np.ndarray
    old_log_prob: np.ndarray | None = None
    values: Tensor | None = None
    return_targets: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.advantages = np.asarray(self.advantages, dtype=np.float64)
        if self.old_log_prob is None:
            self.old_log_prob = log_prob(self.old, self.actions).data
        self.old_log_prob = np.asarray(self.old_log_prob, dtype=np.float64)

    def new_log_prob(self):
        if "logp" not in self._cache:
            self._cache["logp"] = log_prob(self.new, self.actions)
        return self._cache["logp"]

    def ratio(self):
        if "ratio" not in self._cache:
            self._cache["ratio"] = exp(self.new_log_prob() - self.old_log_prob)
        return self._cache["ratio"]


def vanilla_pg(batch: PolicyBatch):
    return (batch.new_log_prob() * batch.advantages).mean()


def surrogate(batch: PolicyBatch):
    """Unclipped importance-weighted surrogate mean(r * A)."""
    return (batch.ratio() * batch.advantages).mean()


def ppo_clip(batch: PolicyBatch, clip_eps):
    r = batch.ratio()
    adv = batch.advantages
    return minimum(r * adv, clip(r, 1.0 - clip_eps, 1.0 + clip_eps) * adv).mean()


def pop3d(batch: PolicyBatch, beta):
    penalty = point_prob_distance(batch.old, batch.new, batch.actions)
    return (batch.ratio() * batch.advantages - beta * penalty).mean()


def fixed_kl(batch: PolicyBatch, beta):
    penalty = kl_divergence(batch.old, batch.new)
    return (batch.ratio() * batch.advantages - beta * penalty).mean()


def value_loss(values_pred, return_targets):
    values_pred = as_tensor(values_pred)
    targets = np.asarray(return_targets, dtype=np.float64)
    if values_pred.shape != targets.shape:
        raise ContractError(f"value predictions {values_pred.shape} vs targets {targets.shape}")
    err = values_pred - targets
    return (err * err).mean()


def policy_objective(kind: ObjectiveKind, batch: PolicyBatch):
    """Return ``(objective, diagnostics)`` for the selected surrogate."""
    tag = Objective.parse(kind.tag)
    ratio = batch.ratio().data
    diag = {"ratio_mean": float(ratio.mean()), "penalty_mean": 0.0, "clip_frac": 0.0}
    if tag is Objective.POP3D:
        pen = point_prob_distance(batch.old, batch.new, batch.actions)
        obj = (batch.ratio() * batch.advantages - kind.beta * pen).mean()
        diag["penalty_mean"] = float(pen.data.mean())
    elif tag is Objective.FIXED_KL:
        pen = kl_divergence(batch.old, batch.new)
        obj = (batch.ratio() * batch.advantages - kind.beta * pen).mean()
        diag["penalty_mean"] = float(pen.data.mean())
    elif tag is Objective.PPO_CLIP:
        obj = ppo_clip(batch, kind.clip_eps)
        diag["clip_frac"] = float(np.mean(np.abs(ratio - 1.0) > kind.clip_eps))
    elif tag is Objective.VANILLA_PG:
        obj = vanilla_pg(batch)
    else:  # pragma: no cover - Objective.parse already rejects these
        raise ContractError(f"unknown objective {kind.tag!r}")
    return obj, diag


def total_loss(kind: ObjectiveKind, batch: PolicyBatch, weights: LossWeights):
    """Scalar to minimise: -objective + c_v * value_loss - c_e * mean entropy.

    Returns ``(loss, diagnostics)``; diagnostics hold the component values.
    """
    if not isinstance(kind, ObjectiveKind):
        raise ContractError(f"expected ObjectiveKind, got {type(kind).__name__}")
    obj, diag = policy_objective(kind, batch)
    loss = -obj
    if batch.values is not None:
        vl = value_loss(batch.values, batch.return_targets)
        loss = loss + weights.value_coeff * vl
        diag["value_loss"] = vl.item()
    ent = entropy(batch.new).mean()
    loss = loss - weights.entropy_coeff * ent
    diag["policy_objective"] = obj.item()
    diag["entropy"] = ent.item()
    diag["loss"] = loss.item()
    return loss, diag


def combine(policy_value, value_loss_value, entropy_value, weights: LossWeights):
    """Arithmetic form of :func:`total_loss` on already-reduced components."""
    return -policy_value + weights.value_coeff * value_loss_value - weights.entropy_coeff * entropy_value
