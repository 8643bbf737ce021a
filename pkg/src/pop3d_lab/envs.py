"""Small environments with known solutions, a vectorised wrapper and a
value-iteration oracle for the enumerable chain."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class EnvSpec:
    obs_dim: int
    action_kind: str  # "discrete" | "continuous"
    action_dim: int   # K for discrete, d for continuous
    max_episode_steps: int

    def __post_init__(self):
        if self.action_kind == "discrete" and self.action_dim < 2:
            raise ContractError("discrete action spaces need K >= 2")
        if self.action_kind == "continuous" and self.action_dim < 1:
            raise ContractError("continuous action spaces need d >= 1")
        if self.max_episode_steps < 1:
            raise ContractError("max_episode_steps must be >= 1")


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    episode_return_so_far: float
    # set by VecEnv on auto-reset: the observation the episode ended in
    final_observation: np.ndarray | None = None

    @property
    def done(self):
        return self.terminated or self.truncated


class ChainMDP:
    """States 0..n-1 on a line; action 1 steps right, action 0 steps left
    (clamped at 0).  Entering state n-1 pays ``goal_reward`` and terminates.
    Every step also pays ``step_penalty``.  Observations are one-hot."""

    enumerable = True

    def __init__(self, n_states=8, step_penalty=-0.01, goal_reward=1.0, horizon=32, seed=None):
        if n_states < 2 or horizon < 1:
            raise ContractError("chain needs n_states >= 2 and horizon >= 1")
        self.n_states = int(n_states)
        self.step_penalty = float(step_penalty)
        self.goal_reward = float(goal_reward)
        self.horizon = int(horizon)
        self.spec = EnvSpec(self.n_states, "discrete", 2, self.horizon)
        self.rng = np.random.default_rng(seed)
        self.state = 0
        self.t = 0
        self.ret = 0.0

    def obs(self):
        o = np.zeros(self.n_states)
        o[self.state] = 1.0
        return o

    def reset(self):
        self.state, self.t, self.ret = 0, 0, 0.0
        return self.obs()

    def transition(self, state, action):
        """Pure model: ``(next_state, reward, terminal)``."""
        if action not in (0, 1):
            raise ContractError(f"chain action must be 0 or 1, got {action!r}")
        nxt = min(state + 1, self.n_states - 1) if action == 1 else max(state - 1, 0)
        terminal = nxt == self.n_states - 1
        return nxt, self.step_penalty + (self.goal_reward if terminal else 0.0), terminal

    def step(self, action):
        self.state, reward, terminal = self.transition(self.state, int(action))
        self.t += 1
        self.ret += reward
        truncated = not terminal and self.t >= self.horizon
        return StepResult(self.obs(), reward, terminal, truncated, self.ret)


class PointMass:
    """1-D double integrator regulated to the origin.

    State ``(x, v)``; the action is clipped to [-1, 1]; ``v += 0.1 a`` then
    ``x += 0.1 v``.  Reward ``-(x**2 + 0.1 a**2)`` uses the pre-step ``x``.
    Episodes start at ``x ~ U(-1, 1), v = 0`` and truncate at ``horizon``.
    """

    enumerable = False

    def __init__(self, horizon=64, seed=None):
        if horizon < 1:
            raise ContractError("horizon must be >= 1")
        self.horizon = int(horizon)
        self.spec = EnvSpec(2, "continuous", 1, self.horizon)
        self.rng = np.random.default_rng(seed)
        self.x = 0.0
        self.v = 0.0
        self.t = 0
        self.ret = 0.0

    def obs(self):
        return np.array([self.x, self.v])

    def reset(self):
        self.x = float(self.rng.uniform(-1.0, 1.0))
        self.v, self.t, self.ret = 0.0, 0, 0.0
        return self.obs()

    def set_state(self, x, v=0.0):
        self.x, self.v = float(x), float(v)

    def step(self, action):
        a = float(np.clip(np.asarray(action, dtype=np.float64).reshape(-1)[0], -1.0, 1.0))
        reward = -(self.x * self.x + 0.1 * a * a)
        self.v += 0.1 * a
        self.x += 0.1 * self.v
        self.t += 1
        self.ret += reward
        return StepResult(self.obs(), reward, False, self.t >= self.horizon, self.ret)


ENV_IDS = ("chain", "point_mass")


def make_env(env_id, seed=None, **kwargs):
    if env_id == "chain":
        return ChainMDP(seed=seed, **kwargs)
    if env_id in ("point_mass", "point-mass"):
        return PointMass(seed=seed, **kwargs)
    raise ContractError(f"unknown environment {env_id!r}; known: {', '.join(ENV_IDS)}")


def chain_mdp(n_states=8, step_penalty=-0.01, goal_reward=1.0, horizon=32):
    return ChainMDP(n_states, step_penalty, goal_reward, horizon)


def point_mass(horizon=64):
    return PointMass(horizon)


def workers_from_env():
    """Rollout worker count from ``POP3D_LAB_WORKERS``; unset means sequential."""
    raw = os.environ.get("POP3D_LAB_WORKERS", "").strip()
    if not raw:
        return 0
    n = int(raw)
    if n < 0:
        raise ContractError("POP3D_LAB_WORKERS must be >= 0")
    return n


class VecEnv:
    """N independent copies of one environment with auto-reset.

    ``env_factory(seed)`` builds each actor.  With ``workers > 1`` actors are
    stepped on a thread pool; every actor owns its RNG, so results match the
    sequential order exactly.
    """

    def __init__(self, env_factory, n_actors, seeds, workers=0):
        seeds = list(seeds)
        if n_actors < 1 or len(seeds) != n_actors:
            raise ContractError(f"need one seed per actor: {n_actors} actors, {len(seeds)} seeds")
        self.envs = [env_factory(s) for s in seeds]
        self.n_actors = n_actors
        self.spec = self.envs[0].spec
        self.workers = workers
        self._pool = ThreadPoolExecutor(workers) if workers > 1 else None

    def reset_all(self):
        return np.stack([e.reset() for e in self.envs])

    def _step_one(self, env, action):
        res = env.step(action)
        if res.done:
            res.final_observation = res.observation
            res.observation = env.reset()
        return res

    def step_all(self, actions):
        if len(actions) != self.n_actors:
            raise ContractError(f"expected {self.n_actors} actions, got {len(actions)}")
        if self._pool is None:
            return [self._step_one(e, a) for e, a in zip(self.envs, actions)]
        return list(self._pool.map(self._step_one, self.envs, actions))

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()


def vec_env(env_factory, n_actors, seeds, workers=None):
    return VecEnv(env_factory, n_actors, seeds, workers_from_env() if workers is None else workers)


@dataclass
class OracleResult:
    values: np.ndarray
    greedy_actions: np.ndarray
    start_value: float
    greedy_return: float
    iterations: int


def value_iteration_oracle(env, gamma=1.0, tol=1e-10, max_iter=100_000):
    """Bellman-optimal values for an enumerable environment.

    ``greedy_return`` is the undiscounted return of the greedy policy run
    from the start state for at most ``env.horizon`` steps.  Ties between
    actions go to the lower index.
    """
    if not getattr(env, "enumerable", False):
        raise ContractError(f"{type(env).__name__} is not enumerable")
    n, n_actions = env.n_states, env.spec.action_dim
    model = [[env.transition(s, a) for a in range(n_actions)] for s in range(n)]
    values = np.zeros(n)
    q = np.zeros((n, n_actions))
    for it in range(1, max_iter + 1):
        for s in range(n):
            if s == n - 1:
                continue  # absorbing goal
            for a, (nxt, r, term) in enumerate(model[s]):
                q[s, a] = r + (0.0 if term else gamma * values[nxt])
        new = np.where(np.arange(n) == n - 1, 0.0, q.max(axis=1))
        delta = np.max(np.abs(new - values))
        values = new
        if delta < tol:
            break
    greedy = q.argmax(axis=1)
    s, ret = 0, 0.0
    for _ in range(env.horizon):
        s, r, term = env.transition(s, int(greedy[s]))
        ret += r
        if term:
            break
    return OracleResult(values, greedy, float(values[0]), ret, it)
