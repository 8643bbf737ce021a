"""
A Gaussian policy on the point-mass regulator
=============================================

"""

import numpy as np

from pop3d_lab.envs import point_mass
from pop3d_lab.harness.metrics import score_100
from pop3d_lab.trainer import desk_config, evaluate_greedy, train


def progress(trainer, records):
    if trainer.iteration % 25 == 0 and records:
        diag = trainer.history[-1]
        print(f"iter {trainer.iteration:3d}  mean score {np.mean([r.score for r in records]):8.2f}  "
              f"ratio {diag['ratio_mean']:.4f}  D_pp {diag['penalty_mean']:.2e}")


result = train(desk_config("point_mass", "pop3d", iterations=150, seed=10), workers=0, callback=progress)
start = np.mean([m.score for m in result.metrics if m.iteration == 0])
print("initial policy", round(start, 2), "-> last 100 episodes", round(score_100([m.score for m in result.metrics]), 2))

# the mean action drives x to 0 from either side
env = point_mass(horizon=64)
print("greedy return", round(evaluate_greedy(result.params, env, episodes=5), 3))
