"""
Three ways to measure a policy step
===================================

"""

import numpy as np

from pop3d_lab.distributions import Categorical, kl_divergence, point_prob_distance, total_variation

old = np.array([0.5, 0.5])
new = np.array([0.9, 0.1])

# KL is asymmetric
print("KL(old||new)", kl_divergence(old, new).item())
print("KL(new||old)", kl_divergence(new, old).item())

# the point probability distance only looks at the sampled action
for a in (0, 1):
    print(f"D_pp at action {a}", point_prob_distance(old, new, a).item())
print("TV^2", total_variation(old, new).item() ** 2)

# with more actions, D_pp sits below the squared total variation
rng = np.random.default_rng(1)
p, q = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
dpp = [point_prob_distance(p, q, a).item() for a in range(6)]
print("max D_pp over actions", max(dpp), "<= TV^2", total_variation(p, q).item() ** 2)

# a zero-mass action under the new policy makes KL infinite, D_pp stays bounded
print("KL with lost support", kl_divergence([0.5, 0.5], [1.0, 0.0]).item())
print("D_pp with lost support", point_prob_distance(Categorical(probs=[0.5, 0.5]), Categorical(probs=[1.0, 0.0]), 1).item())
