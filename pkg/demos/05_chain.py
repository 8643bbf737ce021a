"""
Learning the chain and checking against value iteration
=======================================================

"""

from pop3d_lab.envs import chain_mdp, value_iteration_oracle
from pop3d_lab.harness.metrics import score_100
from pop3d_lab.trainer import desk_config, evaluate_greedy, train

env = chain_mdp(n_states=8, step_penalty=-0.01, goal_reward=1.0, horizon=32)
oracle = value_iteration_oracle(env)
print("optimal return", oracle.greedy_return)

# shorter than the acceptance run, still enough to solve the chain most of the time
for algo in ("pop3d", "ppo", "fixed-kl"):
    result = train(desk_config("chain", algo, iterations=120, seed=0), workers=0)
    greedy = evaluate_greedy(result.params, env)
    scores = [m.score for m in result.metrics]
    print(f"{algo:9s} greedy {greedy:.2f}  score_100 {score_100(scores):.3f}  episodes {len(scores)}")
