"""Episode-score aggregates used to compare algorithms."""

import numpy as np

from ..errors import ContractError


def score_100(episode_scores):
    """Mean of the last 100 episode scores (or all of them if fewer)."""
    scores = np.asarray(episode_scores, dtype=np.float64)
    if scores.size == 0:
        raise ContractError("score_100 needs at least one episode")
    return float(scores[-100:].mean())


def score_all(episode_scores):
    """Mean over every episode; rewards fast learners."""
    scores = np.asarray(episode_scores, dtype=np.float64)
    if scores.size == 0:
        raise ContractError("score_all needs at least one episode")
    return float(scores.mean())
