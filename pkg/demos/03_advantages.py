"""
Advantage estimates along one trajectory
========================================

"""

import numpy as np

from pop3d_lab.advantage import Trajectory, discounted_return, gae

rewards = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.5])
values = np.array([0.3, 0.5, 0.8, 0.1, 0.2, 0.4])
dones = np.array([False, False, True, False, False, False])

# lambda trades bias for variance: 0 is one-step TD, 1 is Monte Carlo
for lam in (0.0, 0.5, 0.95, 1.0):
    res = gae(Trajectory(rewards, values, dones, bootstrap_value=0.6, gamma=0.99, lam=lam))
    print(f"lambda={lam:<4}", np.round(res.advantages, 4))

# at lambda=1 the return targets are the discounted returns
print("discounted", np.round(discounted_return(rewards, 0.99, dones=dones, bootstrap_value=0.6), 4))

# a time-limit cut bootstraps from the value of the state the agent was left in
cut = Trajectory(rewards, values, dones, 0.6, 0.99, 0.95,
                 truncated=np.array([False, False, True, False, False, False]),
                 truncation_values=np.array([0, 0, 2.0, 0, 0, 0]))
print("truncated at t=2", np.round(gae(cut).advantages, 4))
