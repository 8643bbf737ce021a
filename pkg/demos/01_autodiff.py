"""
Reverse-mode gradients on a tiny tape
=====================================

"""

import numpy as np

from pop3d_lab.diffnum import Tensor, finite_difference_grad, forward, grad, init_mlp, max_relative_error

# a least-squares loss built from tape operations
x = np.array([[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]])
y = np.array([1.0, -2.0, 0.5])
w = Tensor(np.array([[0.2], [-0.3]]), requires_grad=True)
loss = (((x @ w).reshape(-1) - y) ** 2).mean()
print("loss", loss.item())
print("dloss/dw", grad(loss, [w])[0].ravel())

# the closed form 2/n X^T (Xw - y) agrees
print("closed form", 2 / 3 * x.T @ (x @ w.data[:, 0] - y))

# a policy/value MLP, checked against central differences
rng = np.random.default_rng(0)
params = init_mlp(3, "categorical", 4, hidden=(8, 8), rng=rng, policy_scale=1.0)
obs = rng.normal(size=(5, 3))


def objective():
    dist, value = forward(params, obs)
    return dist.log_probs()[:, 0].sum() + (value * value).mean()


analytic = grad(objective(), params.tensors())
numeric = finite_difference_grad(objective, params)
print("parameters", params.num_parameters())
print("max relative error vs finite differences", max_relative_error(analytic, numeric))
