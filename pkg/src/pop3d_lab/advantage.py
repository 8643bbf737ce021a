"""Discounted returns, one-step TD advantages and GAE over truncated rollouts.

``done`` flags cut the backward recursion.  A step can end an episode in two
ways: *termination* (the successor value is zero) or *truncation* (the episode
was cut off by a time limit, so the successor value is bootstrapped from
``truncation_values``).  The last step of a rollout that is not done
bootstraps from ``bootstrap_value``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass
class Trajectory:
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    bootstrap_value: float = 0.0
    gamma: float = 0.99
    lam: float = 0.95
    truncated: np.ndarray | None = None
    truncation_values: np.ndarray | None = None

    def __post_init__(self):
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.dones = np.asarray(self.dones, dtype=bool)
        n = len(self.rewards)
        if n == 0:
            raise ContractError("trajectory is empty")
        if self.values.shape != (n,) or self.dones.shape != (n,):
            raise ContractError("rewards, values and dones must have equal length")
        if not 0.0 <= self.gamma <= 1.0:
            raise ContractError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ContractError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.truncated is None:
            self.truncated = np.zeros(n, dtype=bool)
            self.truncation_values = np.zeros(n)
        else:
            self.truncated = np.asarray(self.truncated, dtype=bool)
            self.truncation_values = np.asarray(self.truncation_values, dtype=np.float64)
            if np.any(self.truncated & ~self.dones):
                raise ContractError("truncated steps must also be flagged done")

    def next_values(self):
        """Value of s_{t+1} used in each TD residual (0 after termination)."""
        nxt = np.append(self.values[1:], self.bootstrap_value)
        nxt = np.where(self.dones, 0.0, nxt)
        return np.where(self.truncated, self.truncation_values, nxt)


@dataclass
class AdvantageResult:
    advantages: np.ndarray
    return_targets: np.ndarray


def discounted_return(rewards, gamma, dones=None, bootstrap_value=0.0):
    """R_t = sum_k gamma^k r_{t+k}, restarting after every done flag."""
    rewards = np.asarray(rewards, dtype=np.float64)
    dones = np.zeros(len(rewards), bool) if dones is None else np.asarray(dones, bool)
    out = np.empty_like(rewards)
    running = bootstrap_value
    for t in range(len(rewards) - 1, -1, -1):
        if dones[t]:
            running = 0.0
        running = rewards[t] + gamma * running
        out[t] = running
    return out


def one_step_advantage(reward, value, next_value, gamma, terminal=False):
    """TD residual r + gamma * V(s') - V(s); V(s') counts as zero when terminal."""
    return reward + (0.0 if terminal else gamma * next_value) - value


def gae(traj: Trajectory) -> AdvantageResult:
    deltas = traj.rewards + traj.gamma * traj.next_values() - traj.values
    carry = traj.gamma * traj.lam * (~traj.dones)
    adv = np.empty_like(deltas)
    running = 0.0
    for t in range(len(deltas) - 1, -1, -1):
        running = deltas[t] + carry[t] * running
        adv[t] = running
    return AdvantageResult(adv, adv + traj.values)


def normalize(adv, eps=1e-8):
    """Zero-mean, unit-std rescaling used per update batch."""
    adv = np.asarray(adv, dtype=np.float64)
    if adv.size < 2:
        return adv - adv.mean()
    return (adv - adv.mean()) / (adv.std() + eps)
