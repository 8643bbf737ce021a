"""Rollout collection, minibatch updates and the outer training loop.

One iteration runs every actor for ``horizon`` steps under the current
(snapshot) parameters, computes GAE per actor, then makes ``epochs`` passes
over shuffled minibatches.  The snapshot's log-probs and distribution
parameters are stored with the rollout and stay fixed for the whole update;
``strict_pseudocode=True`` instead refreshes them after every epoch.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .advantage import Trajectory, gae, normalize
from .diffnum import AdamState, MlpParams, Tensor, adam_step, clip_grad_norm, forward, grad, init_mlp
from .diffnum.optim import linear_decay
from .distributions import Categorical, DiagGaussian, log_prob, sample
from .envs import VecEnv, make_env, workers_from_env
from .errors import ContractError, DiagnosticsError, UpdateAborted
from .objectives import LossWeights, Objective, ObjectiveKind, PolicyBatch, total_loss


@dataclass
class TrainConfig:
    env: str = "chain"
    algo: str = "pop3d"
    iterations: int = 200
    actors: int = 4
    horizon: int = 128
    epochs: int = 3
    minibatch_size: int = 128
    gamma: float = 0.99
    lam: float = 0.95
    step_size: float = 2.5e-4
    lr_decay: str = "linear"
    beta: float = 5.0
    beta_anneal: bool = False
    clip_eps: float = 0.2
    clip_anneal: bool = False
    value_coeff: float = 1.0
    entropy_coeff: float = 0.01
    max_grad_norm: float = 0.5
    normalize_advantages: bool = True
    hidden: tuple = (64, 64)
    shared_trunk: bool = True
    policy_init_scale: float = 0.01
    log_std_init: float = 0.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-5
    strict_pseudocode: bool = False
    debug_checks: bool = False
    seed: int = 0
    # environment parameters
    chain_states: int = 8
    step_penalty: float = -0.01
    goal_reward: float = 1.0
    episode_horizon: int = 32

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.algo = Objective.parse(self.algo).value
        self.validate()

    def validate(self):
        if self.iterations < 0 or self.actors < 1 or self.horizon < 1 or self.epochs < 0:
            raise ContractError("iterations/epochs must be >= 0, actors/horizon >= 1")
        batch = self.actors * self.horizon
        if not 1 <= self.minibatch_size <= batch:
            raise ContractError(f"minibatch size {self.minibatch_size} must lie in [1, {batch}]")
        if batch % self.minibatch_size:
            raise ContractError(f"actors*horizon = {batch} is not divisible by minibatch size {self.minibatch_size}")
        if self.lr_decay not in ("linear", "constant"):
            raise ContractError(f"lr_decay must be 'linear' or 'constant', got {self.lr_decay!r}")
        if not 0.0 <= self.gamma <= 1.0 or not 0.0 <= self.lam <= 1.0:
            raise ContractError("gamma and lambda must lie in [0, 1]")
        if self.step_size <= 0:
            raise ContractError("step size must be positive")
        self.objective_kind()
        self.weights()

    def objective_kind(self):
        return ObjectiveKind(Objective.parse(self.algo), beta=self.beta, clip_eps=self.clip_eps)

    def weights(self):
        return LossWeights(self.value_coeff, self.entropy_coeff)

    def env_kwargs(self):
        if self.env == "chain":
            return dict(n_states=self.chain_states, step_penalty=self.step_penalty,
                        goal_reward=self.goal_reward, horizon=self.episode_horizon)
        return dict(horizon=self.episode_horizon)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


# Full-scale Atari and Mujoco settings, kept as named presets.
_ATARI = dict(horizon=128, step_size=2.5e-4, lr_decay="linear", epochs=3, minibatch_size=256,
              gamma=0.99, lam=0.95, actors=8, value_coeff=1.0, entropy_coeff=0.01)
_MUJOCO = dict(horizon=2048, step_size=3e-4, lr_decay="constant", epochs=10, minibatch_size=64,
               gamma=0.99, lam=0.95, actors=1, entropy_coeff=0.0, shared_trunk=False)
PRESETS = {
    "atari-ppo": dict(_ATARI, algo="ppo", clip_eps=0.1, clip_anneal=True),
    "atari-pop3d": dict(_ATARI, algo="pop3d", beta=5.0),
    "atari-baseline": dict(_ATARI, algo="fixed-kl", beta=10.0),
    "mujoco-ppo": dict(_MUJOCO, algo="ppo", clip_eps=0.2),
    "mujoco-pop3d": dict(_MUJOCO, algo="pop3d", beta=5.0),
}
# Desk-scale runs: fewer actors; the continuous setting also shortens the rollout.
_DESK = {
    "chain": dict(env="chain", actors=4, horizon=128, minibatch_size=256, epochs=3,
                  step_size=2.5e-4, lr_decay="linear", iterations=200, entropy_coeff=0.01,
                  hidden=(64, 64), episode_horizon=32),
    "point_mass": dict(env="point_mass", actors=4, horizon=128, minibatch_size=128, epochs=5,
                       step_size=1e-3, lr_decay="constant", iterations=300, entropy_coeff=0.0,
                       hidden=(64, 64), shared_trunk=False, episode_horizon=64),
}
_ALGO = {"pop3d": dict(beta=5.0), "ppo": dict(clip_eps=0.2), "fixed-kl": dict(beta=10.0), "pg": {}}


def named_config(name, **overrides):
    """A preset by name (``atari-pop3d``, ``mujoco-ppo`` ...) or a desk-scale
    ``<env>-<algo>`` pair such as ``chain-pop3d``."""
    if name in PRESETS:
        return TrainConfig(**{**PRESETS[name], **overrides})
    for env in _DESK:
        if name.startswith(env + "-"):
            return desk_config(env, name[len(env) + 1:], **overrides)
    raise ContractError(f"unknown config {name!r}")


def desk_config(env, algo, **overrides):
    env = env.replace("-", "_")
    if env not in _DESK:
        raise ContractError(f"no desk-scale defaults for environment {env!r}")
    algo = Objective.parse(algo).value
    return TrainConfig(**{**_DESK[env], **_ALGO[algo], "algo": algo, **overrides})


@dataclass
class MetricRecord:
    seed: int
    iteration: int
    episode: int
    frames: int
    score: float
    wall_clock: float = 0.0
    ratio_mean: float = float("nan")
    penalty_mean: float = float("nan")
    clip_frac: float = float("nan")


@dataclass
class RolloutBuffer:
    """Flattened (time-major) record of one iteration's experience."""

    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    terminated: np.ndarray
    truncated: np.ndarray
    old_log_prob: np.ndarray
    old_params: np.ndarray
    values: np.ndarray
    truncation_values: np.ndarray
    bootstrap_values: np.ndarray
    n_actors: int
    horizon: int
    action_kind: str
    advantages: np.ndarray | None = None
    return_targets: np.ndarray | None = None

    def __len__(self):
        return len(self.rewards)

    def freeze(self):
        for name in ("obs", "actions", "old_log_prob", "old_params"):
            getattr(self, name).setflags(write=False)
        return self

    def old_dist(self, idx=slice(None)):
        p = self.old_params[idx]
        if self.action_kind == "categorical":
            return Categorical(logits=p)
        d = p.shape[-1] // 2
        return DiagGaussian(p[:, :d], p[:, d:])


def _dist_array(dist):
    return dist.params_array()


class Runner:
    """Holds the actors and their current observations between iterations."""

    def __init__(self, venv: VecEnv, action_seeds):
        self.venv = venv
        self.n_actors = venv.n_actors
        self.action_rngs = [np.random.default_rng(s) for s in action_seeds]
        self.obs = venv.reset_all()
        self.frames = 0
        self.episodes = 0

    def rng_states(self):
        return [g.bit_generator.state for g in self.action_rngs]


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise DiagnosticsError(f"non-finite {name} from policy network")


def collect_rollouts(params: MlpParams, runner: Runner, horizon, gamma=0.99, lam=0.95):
    """Run every actor for ``horizon`` steps; returns ``(buffer, episodes)``.

    ``episodes`` lists ``(frames, score)`` in completion order.  Advantages
    and return targets are filled in before returning.
    """
    n = runner.n_actors
    steps = []
    finals = []  # (t, actor, final_obs) for truncated steps
    episodes = []
    for t in range(horizon):
        dist, values = forward(params, runner.obs)
        _check_finite("distribution parameters", _dist_array(dist))
        _check_finite("value estimate", values.data)
        actions = sample(dist, runner.action_rngs)
        logp = log_prob(dist, actions).data
        results = runner.venv.step_all(list(actions))
        runner.frames += n
        for i, res in enumerate(results):
            if res.truncated:
                finals.append((t, i, res.final_observation))
            if res.done:
                runner.episodes += 1
                episodes.append((runner.frames, res.episode_return_so_far))
        steps.append((runner.obs, actions, np.array([r.reward for r in results]),
                      np.array([r.terminated for r in results]), np.array([r.truncated for r in results]),
                      logp, _dist_array(dist).copy(), values.data.copy()))
        runner.obs = np.stack([r.observation for r in results])

    obs, actions, rewards, term, trunc, logp, old_params, values = (np.stack(c) for c in zip(*steps))
    bootstrap = forward(params, runner.obs)[1].data.copy()
    trunc_vals = np.zeros((horizon, n))
    if finals:
        fv = forward(params, np.stack([f[2] for f in finals]))[1].data
        for (t, i, _), v in zip(finals, fv):
            trunc_vals[t, i] = v
    _check_finite("bootstrap value", bootstrap)

    adv = np.empty((horizon, n))
    for i in range(n):
        res = gae(Trajectory(rewards[:, i], values[:, i], term[:, i] | trunc[:, i], bootstrap[i],
                             gamma, lam, trunc[:, i], trunc_vals[:, i]))
        adv[:, i] = res.advantages

    flat = lambda a: a.reshape((horizon * n,) + a.shape[2:])  # noqa: E731
    buf = RolloutBuffer(
        obs=flat(obs), actions=flat(actions), rewards=flat(rewards), terminated=flat(term),
        truncated=flat(trunc), old_log_prob=flat(logp), old_params=flat(old_params),
        values=flat(values), truncation_values=flat(trunc_vals), bootstrap_values=bootstrap,
        n_actors=n, horizon=horizon, action_kind=params.action_kind,
        advantages=flat(adv), return_targets=flat(adv + values),
    )
    return buf.freeze(), episodes


def _step_scale(config: TrainConfig, iteration):
    if config.lr_decay == "constant" or config.iterations == 0:
        return 1.0
    return linear_decay(iteration, config.iterations)


def iteration_objective(config: TrainConfig, iteration):
    """Objective settings for one iteration (clip ratio / penalty optionally annealed)."""
    alpha = linear_decay(iteration, config.iterations) if config.iterations else 1.0
    kind = config.objective_kind()
    changes = {}
    if config.clip_anneal:
        changes["clip_eps"] = kind.clip_eps * alpha
    if config.beta_anneal:
        changes["beta"] = kind.beta * alpha
    if changes and alpha > 0:
        kind = dataclasses.replace(kind, **changes)
    return kind


def minibatch_loss(params, buffer: RolloutBuffer, idx, kind, weights, normalize_adv=True):
    dist, values = forward(params, buffer.obs[idx])
    adv = buffer.advantages[idx]
    if normalize_adv:
        adv = normalize(adv)
    batch = PolicyBatch(new=dist, old=buffer.old_dist(idx), actions=buffer.actions[idx],
                        advantages=adv, old_log_prob=buffer.old_log_prob[idx],
                        values=values, return_targets=buffer.return_targets[idx])
    return total_loss(kind, batch, weights)


def refresh_snapshot(params, buffer: RolloutBuffer):
    """Recompute stored old-policy quantities under ``params`` (strict mode)."""
    dist, _ = forward(params, buffer.obs)
    old_params = _dist_array(dist).copy()
    new = dataclasses.replace(buffer, old_params=old_params,
                              old_log_prob=log_prob(dist, buffer.actions).data.copy())
    return new.freeze()


def update(params: MlpParams, adam: AdamState, buffer: RolloutBuffer, config: TrainConfig,
           iteration=0, rng=None):
    """K epochs of shuffled minibatch Adam steps; returns diagnostics.

    Minibatches with a non-finite loss or gradient are skipped and counted;
    if half or more are skipped the update is aborted.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    kind = iteration_objective(config, iteration)
    weights = config.weights()
    lr_scale = _step_scale(config, iteration)
    n = len(buffer)
    m = config.minibatch_size
    tensors = params.tensors()
    logs, skipped, total = [], 0, 0
    first = None
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, m):
            idx = perm[start:start + m]
            total += 1
            loss, diag = minibatch_loss(params, buffer, idx, kind, weights, config.normalize_advantages)
            if first is None or (config.strict_pseudocode and start == 0):
                if first is None:
                    first = dict(diag)
                if config.debug_checks:
                    _assert_snapshot(diag, kind)
            if not np.isfinite(diag["loss"]):
                skipped += 1
                continue
            grads = grad(loss, tensors)
            if not all(np.all(np.isfinite(g)) for g in grads):
                skipped += 1
                continue
            grads, gnorm = clip_grad_norm(grads, config.max_grad_norm)
            diag["grad_norm"] = gnorm
            adam_step(adam, params, grads, lr_scale)
            logs.append(diag)
        if config.strict_pseudocode:
            buffer = refresh_snapshot(params, buffer)
    if total and skipped * 2 >= total:
        raise UpdateAborted(f"{skipped} of {total} minibatches had non-finite values", iteration)

    def avg(key):
        vals = [d[key] for d in logs if key in d]
        return float(np.mean(vals)) if vals else float("nan")

    out = {k: avg(k) for k in ("ratio_mean", "penalty_mean", "clip_frac", "loss", "value_loss",
                               "entropy", "policy_objective", "grad_norm")}
    out.update(skipped=skipped, minibatches=total, lr_scale=lr_scale,
               first_ratio_mean=first["ratio_mean"] if first else float("nan"),
               first_penalty_mean=first["penalty_mean"] if first else float("nan"))
    return out


def _assert_snapshot(diag, kind):
    if abs(diag["ratio_mean"] - 1.0) > 1e-9:
        raise DiagnosticsError(f"ratio mean {diag['ratio_mean']} at the snapshot, expected 1")
    if kind.tag in (Objective.POP3D, Objective.FIXED_KL) and abs(diag["penalty_mean"]) > 1e-12:
        raise DiagnosticsError(f"penalty {diag['penalty_mean']} at the snapshot, expected 0")


@dataclass
class Trainer:
    """Mutable training state: parameters, optimiser, actors and RNG streams."""

    config: TrainConfig
    params: MlpParams
    adam: AdamState
    runner: Runner
    shuffle_rng: np.random.Generator
    iteration: int = 0
    frames: int = 0
    metrics: list = field(default_factory=list)
    history: list = field(default_factory=list)

    @classmethod
    def from_config(cls, config: TrainConfig, workers=None):
        seq = np.random.SeedSequence(config.seed)
        init_seq, shuffle_seq, env_seq, act_seq = seq.spawn(4)
        env_seeds = env_seq.spawn(config.actors)
        act_seeds = act_seq.spawn(config.actors)
        kwargs = config.env_kwargs()
        venv = VecEnv(lambda s: make_env(config.env, seed=s, **kwargs), config.actors, env_seeds,
                      workers_from_env() if workers is None else workers)
        spec = venv.spec
        kind = "categorical" if spec.action_kind == "discrete" else "gaussian"
        params = init_mlp(spec.obs_dim, kind, spec.action_dim, config.hidden, np.random.default_rng(init_seq),
                          policy_scale=config.policy_init_scale, shared_trunk=config.shared_trunk,
                          log_std_bias=config.log_std_init)
        adam = AdamState.for_params(params.arrays(), step_size=config.step_size, beta1=config.adam_beta1,
                                    beta2=config.adam_beta2, eps=config.adam_eps)
        return cls(config, params, adam, Runner(venv, act_seeds), np.random.default_rng(shuffle_seq))

    def step(self):
        """One collect + update iteration; returns the new MetricRecords."""
        cfg = self.config
        it = self.iteration
        buffer, episodes = collect_rollouts(self.params, self.runner, cfg.horizon, cfg.gamma, cfg.lam)
        try:
            diag = update(self.params, self.adam, buffer, cfg, it, self.shuffle_rng)
        except UpdateAborted as exc:
            exc.iteration = it
            raise
        now = time.time()
        records = []
        for frames, score in episodes:
            records.append(MetricRecord(cfg.seed, it, len(self.metrics) + len(records), frames, float(score),
                                        now, diag["ratio_mean"], diag["penalty_mean"], diag["clip_frac"]))
        self.metrics.extend(records)
        self.history.append(diag)
        self.iteration += 1
        self.frames = self.runner.frames
        return records

    def rng_states(self):
        """Bit-generator states: shuffle stream, then one per actor (actions, env)."""
        states = [self.shuffle_rng.bit_generator.state]
        states += self.runner.rng_states()
        states += [e.rng.bit_generator.state for e in self.runner.venv.envs]
        return states

    def close(self):
        self.runner.venv.close()


@dataclass
class TrainResult:
    params: MlpParams
    metrics: list
    history: list
    initial_params: MlpParams
    adam: AdamState | None = None
    rng_states: list = field(default_factory=list)


def iter_train(config: TrainConfig, workers=None):
    """Yield ``(trainer, records)`` after every iteration."""
    trainer = Trainer.from_config(config, workers)
    try:
        for _ in range(config.iterations):
            yield trainer, trainer.step()
    finally:
        trainer.close()


def train(config: TrainConfig, workers=None, callback=None):
    trainer = Trainer.from_config(config, workers)
    initial = trainer.params.copy()
    try:
        for _ in range(config.iterations):
            records = trainer.step()
            if callback is not None:
                callback(trainer, records)
    finally:
        trainer.close()
    return TrainResult(trainer.params, trainer.metrics, trainer.history, initial, trainer.adam,
                       trainer.rng_states())


def greedy_action(params: MlpParams, obs):
    dist, _ = forward(params, np.atleast_2d(obs))
    if isinstance(dist, Categorical):
        return int(np.argmax(dist.logits.data[0]))
    return dist.mean.data[0]


def evaluate_greedy(params: MlpParams, env, episodes=1):
    """Mean undiscounted return of the deterministic (argmax / mean) policy."""
    total = 0.0
    for _ in range(episodes):
        obs = env.reset()
        while True:
            res = env.step(greedy_action(params, obs))
            obs = res.observation
            if res.done:
                total += res.episode_return_so_far
                break
    return total / episodes


# -- checkpoints -------------------------------------------------------------
CHECKPOINT_FORMAT = "pop3d-lab-checkpoint"
CHECKPOINT_VERSION = 1


def _layout(params: MlpParams):
    return {
        "action_kind": params.action_kind, "action_dim": params.action_dim,
        "trunk": [list(w.shape) for w, _ in params.trunk],
        "value_trunk": None if params.value_trunk is None else [list(w.shape) for w, _ in params.value_trunk],
        "shapes": [list(t.shape) for t in params.tensors()],
    }


def _params_from_layout(layout, arrays):
    it = iter(arrays)

    def layers(count):
        return [(Tensor(next(it).copy(), requires_grad=True), Tensor(next(it).copy(), requires_grad=True))
                for _ in range(count)]

    trunk = layers(len(layout["trunk"]))
    vt = None if layout["value_trunk"] is None else layers(len(layout["value_trunk"]))
    ph, vh = layers(2)
    return MlpParams(trunk=trunk, policy_head=ph, value_head=vh, action_kind=layout["action_kind"],
                     action_dim=layout["action_dim"], value_trunk=vt)


def save_checkpoint(path, params: MlpParams, adam: AdamState, rng_states=(), extra=None):
    """Write parameters, Adam moments and RNG states to an ``.npz`` file."""
    meta = {
        "format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, "layout": _layout(params),
        "adam": {"step_size": adam.step_size, "beta1": adam.beta1, "beta2": adam.beta2,
                 "eps": adam.eps, "t": adam.t},
        "rng_states": list(rng_states), "extra": extra or {},
    }
    arrays = {f"param_{i}": a for i, a in enumerate(params.arrays())}
    arrays.update({f"adam_m_{i}": a for i, a in enumerate(adam.m)})
    arrays.update({f"adam_v_{i}": a for i, a in enumerate(adam.v)})
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path):
    """Return ``(params, adam, rng_states, extra)`` exactly as saved."""
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ContractError(f"{path} is not a checkpoint")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ContractError(f"unsupported checkpoint version {meta.get('version')}")
        count = len(meta["layout"]["shapes"])
        params = _params_from_layout(meta["layout"], [z[f"param_{i}"] for i in range(count)])
        adam = AdamState(**meta["adam"], m=[z[f"adam_m_{i}"].copy() for i in range(count) if f"adam_m_{i}" in z],
                         v=[z[f"adam_v_{i}"].copy() for i in range(count) if f"adam_v_{i}" in z])
    return params, adam, meta["rng_states"], meta["extra"]
