"""Tanh MLP with a policy head and a value head."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError
from .tensor import Tensor, as_tensor


def orthogonal(shape, gain, rng):
    """Orthogonal matrix of ``shape`` scaled by ``gain`` (QR of a Gaussian draw)."""
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return np.ascontiguousarray(gain * q[:rows, :cols])


@dataclass
class MlpParams:
    """Layers are ``(weight[in, out], bias[out])`` pairs of leaf tensors.

    ``value_trunk`` is ``None`` when the value head reads the policy trunk's
    features; otherwise the value head has its own hidden layers.
    """

    trunk: list
    policy_head: tuple
    value_head: tuple
    action_kind: str
    action_dim: int
    value_trunk: list | None = None
    activation: str = "tanh"
    meta: dict = field(default_factory=dict)

    @property
    def obs_dim(self):
        first = self.trunk[0][0] if self.trunk else self.policy_head[0]
        return first.shape[0]

    def tensors(self):
        out = [t for layer in self.trunk for t in layer]
        if self.value_trunk is not None:
            out += [t for layer in self.value_trunk for t in layer]
        out += list(self.policy_head) + list(self.value_head)
        return out

    def arrays(self):
        return [t.data for t in self.tensors()]

    def load_arrays(self, arrays):
        tensors = self.tensors()
        if len(arrays) != len(tensors):
            raise DimensionError(f"expected {len(tensors)} arrays, got {len(arrays)}")
        for t, a in zip(tensors, arrays):
            a = np.asarray(a, dtype=np.float64)
            if a.shape != t.shape:
                raise DimensionError(f"array shape {a.shape} != parameter shape {t.shape}")
            t.data = a.copy()

    def copy(self):
        def dup(layers):
            return [tuple(Tensor(t.data.copy(), requires_grad=True) for t in layer)
                    for layer in layers]

        return MlpParams(
            trunk=dup(self.trunk),
            policy_head=dup([self.policy_head])[0],
            value_head=dup([self.value_head])[0],
            action_kind=self.action_kind,
            action_dim=self.action_dim,
            value_trunk=None if self.value_trunk is None else dup(self.value_trunk),
            activation=self.activation,
            meta=dict(self.meta),
        )

    def num_parameters(self):
        return sum(t.size for t in self.tensors())


def _check_chain(layers, in_dim):
    for w, b in layers:
        if w.shape[0] != in_dim or b.shape != (w.shape[1],):
            raise DimensionError(f"layer {w.shape}/{b.shape} does not accept width {in_dim}")
        in_dim = w.shape[1]
    return in_dim


def init_mlp(obs_dim, action_kind, action_dim, hidden=(64, 64), rng=None, *,
             hidden_gain=np.sqrt(2.0), policy_scale=0.01, value_scale=1.0,
             shared_trunk=True, log_std_bias=0.0):
    """Orthogonally initialised MLP with zero biases.

    For ``action_kind == "categorical"`` the policy head emits ``action_dim``
    logits; for ``"gaussian"`` it emits ``action_dim`` means followed by
    ``action_dim`` log-stds (the log-std bias starts at ``log_std_bias``).
    """
    if action_kind not in ("categorical", "gaussian"):
        raise ValueError(f"unknown action kind {action_kind!r}")
    rng = np.random.default_rng(0) if rng is None else rng

    def layer(n_in, n_out, gain):
        return (Tensor(orthogonal((n_in, n_out), gain, rng), requires_grad=True),
                Tensor(np.zeros(n_out), requires_grad=True))

    def tower():
        layers, width = [], obs_dim
        for h in hidden:
            layers.append(layer(width, h, hidden_gain))
            width = h
        return layers, width

    trunk, width = tower()
    value_trunk, vwidth = (None, width) if shared_trunk else tower()
    n_policy = action_dim if action_kind == "categorical" else 2 * action_dim
    policy_head = layer(width, n_policy, policy_scale)
    if action_kind == "gaussian":
        policy_head[1].data[action_dim:] = log_std_bias
    return MlpParams(trunk=trunk, policy_head=policy_head, value_head=layer(vwidth, 1, value_scale),
                     action_kind=action_kind, action_dim=action_dim, value_trunk=value_trunk)


def _tower(layers, h):
    for w, b in layers:
        h = (h @ w + b).tanh()
    return h


def forward(params: MlpParams, obs):
    """Return ``(DistributionParams, values)`` for a batch of observations."""
    from ..distributions import Categorical, DiagGaussian

    obs = as_tensor(obs)
    if obs.ndim != 2 or obs.shape[1] != params.obs_dim:
        raise DimensionError(f"observation batch {obs.shape} does not match obs_dim {params.obs_dim}")
    _check_chain(params.trunk, params.obs_dim)
    feats = _tower(params.trunk, obs)
    vfeats = feats if params.value_trunk is None else _tower(params.value_trunk, obs)
    pw, pb = params.policy_head
    vw, vb = params.value_head
    head = feats @ pw + pb
    value = (vfeats @ vw + vb).reshape(-1)
    if params.action_kind == "categorical":
        dist = Categorical(logits=head)
    else:
        d = params.action_dim
        dist = DiagGaussian(head[:, :d], head[:, d:])
    return dist, value
