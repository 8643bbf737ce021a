import numpy as np
import pytest

from pop3d_lab.envs import (ChainMDP, EnvSpec, PointMass, VecEnv, chain_mdp, make_env, point_mass,
                            value_iteration_oracle, vec_env, workers_from_env)
from pop3d_lab.errors import ContractError


def test_chain_two_states_single_step():
    env = chain_mdp(n_states=2)
    obs = env.reset()
    np.testing.assert_array_equal(obs, [1.0, 0.0])
    res = env.step(1)
    assert res.terminated and not res.truncated and res.done
    assert res.reward == pytest.approx(-0.01 + 1.0, abs=1e-15)


def test_chain_always_left_truncates():
    env = chain_mdp(horizon=32)
    env.reset()
    for t in range(32):
        res = env.step(0)
        assert res.done == (t == 31)
    assert res.truncated and not res.terminated
    assert res.episode_return_so_far == pytest.approx(-0.32, abs=1e-12)


def test_chain_invalid():
    with pytest.raises(ContractError):
        chain_mdp(n_states=1)
    env = chain_mdp()
    env.reset()
    with pytest.raises(ContractError):
        env.step(2)
    with pytest.raises(ContractError):
        EnvSpec(3, "discrete", 1, 10)


def test_point_mass_examples():
    env = point_mass(horizon=10)
    env.reset()
    env.set_state(0.0, 0.0)
    assert all(env.step([0.0]).reward == 0.0 for _ in range(5))
    env.reset()
    env.set_state(1.0, 0.0)
    res = env.step([-1.0])
    assert res.reward == pytest.approx(-1.1, abs=1e-15)
    np.testing.assert_allclose(res.observation, [0.99, -0.1], atol=1e-15)


def test_point_mass_action_is_clipped():
    env = point_mass()
    env.reset()
    env.set_state(0.5, 0.0)
    res = env.step([7.0])
    assert res.reward == pytest.approx(-(0.25 + 0.1), abs=1e-15)
    np.testing.assert_allclose(res.observation, [0.51, 0.1], atol=1e-15)


def test_point_mass_zero_action_return():
    env = point_mass(horizon=64)
    env.reset()
    env.set_state(1.0, 0.0)
    for _ in range(64):
        res = env.step([0.0])
    assert res.truncated and not res.terminated
    assert res.episode_return_so_far == -64.0


def test_point_mass_start_distribution():
    env = PointMass(seed=0)
    xs = np.array([env.reset()[0] for _ in range(2000)])
    assert xs.min() >= -1.0 and xs.max() < 1.0
    assert abs(xs.mean()) < 0.05
    assert np.all([env.reset()[1] == 0.0 for _ in range(5)])


def test_value_iteration_examples():
    assert value_iteration_oracle(chain_mdp(n_states=2)).greedy_return == pytest.approx(0.99, abs=1e-12)
    res = value_iteration_oracle(chain_mdp(n_states=8), gamma=1.0)
    assert res.greedy_return == pytest.approx(0.93, abs=1e-12)
    assert res.start_value == pytest.approx(0.93, abs=1e-10)
    assert np.all(res.greedy_actions[:7] == 1)


def test_value_iteration_oracle_fixed_point():
    env = chain_mdp(n_states=6, step_penalty=-0.05)
    res = value_iteration_oracle(env, gamma=0.9)
    for s in range(5):
        q = [r + (0 if term else 0.9 * res.values[n]) for n, r, term in (env.transition(s, a) for a in (0, 1))]
        assert abs(max(q) - res.values[s]) < 1e-9


def test_value_iteration_gamma_zero_is_myopic():
    res = value_iteration_oracle(chain_mdp(n_states=8), gamma=0.0)
    # only the step into the goal beats the per-step penalty; other ties go to action 0
    np.testing.assert_array_equal(res.greedy_actions[:7], [0, 0, 0, 0, 0, 0, 1])
    np.testing.assert_allclose(res.values[:6], -0.01)


def test_value_iteration_rejects_continuous():
    with pytest.raises(ContractError):
        value_iteration_oracle(point_mass())


def test_random_policies_never_beat_the_oracle():
    env = chain_mdp(n_states=8)
    best = value_iteration_oracle(env).greedy_return
    rng = np.random.default_rng(0)
    for _ in range(300):
        env.reset()
        while True:
            res = env.step(int(rng.integers(2)))
            if res.done:
                break
        assert res.episode_return_so_far <= best + 1e-12


def test_vec_env_single_actor_matches_bare_env():
    bare = PointMass(seed=3)
    venv = VecEnv(lambda s: PointMass(seed=s), 1, [3])
    np.testing.assert_array_equal(venv.reset_all()[0], bare.reset())
    rng = np.random.default_rng(1)
    for _ in range(70):
        a = rng.normal(size=1)
        want = bare.step(a)
        if want.done:
            want_obs = bare.reset()
        else:
            want_obs = want.observation
        got = venv.step_all([a])[0]
        assert got.reward == want.reward and got.done == want.done
        np.testing.assert_array_equal(got.observation, want_obs)


def _trace(seeds, workers, steps=100):
    venv = VecEnv(lambda s: make_env("point_mass", seed=s, horizon=16), len(seeds), seeds, workers=workers)
    rng = np.random.default_rng(7)
    out = [venv.reset_all().copy()]
    for _ in range(steps):
        res = venv.step_all(list(rng.normal(size=(len(seeds), 1))))
        out.append(np.array([[r.reward, *r.observation, r.truncated] for r in res]))
    venv.close()
    return out


def test_vec_env_determinism_and_parallel_equivalence():
    a, b = _trace([0, 10, 100, 7], 0), _trace([0, 10, 100, 7], 0)
    par = _trace([0, 10, 100, 7], 4)
    for x, y, z in zip(a, b, par):
        assert x.tobytes() == y.tobytes() == z.tobytes()


def test_vec_env_distinct_seeds_differ():
    start = VecEnv(lambda s: PointMass(seed=s), 2, [0, 10]).reset_all()
    assert start[0, 0] != start[1, 0]


def test_vec_env_auto_reset_keeps_final_observation():
    venv = VecEnv(lambda s: ChainMDP(n_states=2, seed=s), 2, [0, 1])
    venv.reset_all()
    res = venv.step_all([1, 0])
    assert res[0].terminated
    np.testing.assert_array_equal(res[0].final_observation, [0.0, 1.0])
    np.testing.assert_array_equal(res[0].observation, [1.0, 0.0])
    assert res[1].final_observation is None


def test_vec_env_seed_mismatch():
    with pytest.raises(ContractError):
        VecEnv(lambda s: PointMass(seed=s), 3, [0, 1])


def test_workers_from_env(monkeypatch):
    monkeypatch.delenv("POP3D_LAB_WORKERS", raising=False)
    assert workers_from_env() == 0
    monkeypatch.setenv("POP3D_LAB_WORKERS", "3")
    assert workers_from_env() == 3
    assert vec_env(lambda s: PointMass(seed=s), 2, [0, 1]).workers == 3
    with pytest.raises(ContractError):
        make_env("pong")
