"""
Where the clipped surrogate stops pushing
=========================================

"""

import numpy as np

from pop3d_lab.diffnum import Tensor, grad
from pop3d_lab.distributions import Categorical
from pop3d_lab.objectives import PolicyBatch, pop3d, ppo_clip

old_logits = np.zeros((1, 3))
action = np.array([0])
advantage = np.array([1.0])

# sweep the new policy's logit of the taken action
print(" ratio   ppo grad   pop3d grad")
for shift in np.linspace(-1.0, 1.5, 11):
    z = Tensor(old_logits + np.array([[shift, 0.0, 0.0]]), requires_grad=True)
    batch = PolicyBatch(Categorical(logits=z), Categorical(logits=old_logits), action, advantage)
    r = batch.ratio().item()
    g_ppo = grad(ppo_clip(batch, 0.2), [z])[0][0, 0]
    z2 = Tensor(z.data.copy(), requires_grad=True)
    batch = PolicyBatch(Categorical(logits=z2), Categorical(logits=old_logits), action, advantage)
    g_pop = grad(pop3d(batch, 5.0), [z2])[0][0, 0]
    print(f"{r:6.3f}  {g_ppo:9.5f}  {g_pop:10.5f}")

# past r = 1.2 the clipped objective has zero slope; the penalised one keeps a
# restoring slope that eventually turns negative
