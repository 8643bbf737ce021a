"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -s`` (or ``-v``; the
verdict lines are printed either way).  The learning checks train real
agents and take a few minutes in total.
"""

import contextlib
import time

import numpy as np
import pytest

from pop3d_lab.advantage import Trajectory, discounted_return, gae, one_step_advantage
from pop3d_lab.diffnum import finite_difference_grad, forward, grad, init_mlp, max_relative_error
from pop3d_lab.distributions import Categorical, entropy, point_prob_distance, total_variation
from pop3d_lab.envs import chain_mdp, value_iteration_oracle
from pop3d_lab.harness import cli
from pop3d_lab.harness.csvio import read_csv
from pop3d_lab.harness.experiment import ExperimentManifest, run_experiment
from pop3d_lab.harness.metrics import score_100, score_all
from pop3d_lab.objectives import ObjectiveKind, PolicyBatch, policy_objective, pop3d, ppo_clip, value_loss
from pop3d_lab.trainer import desk_config, evaluate_greedy, train

SEEDS = (0, 10, 100)


@contextlib.contextmanager
def criterion(capsys, number, title):
    start = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        reason = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        with capsys.disabled():
            print(f"\n[criterion {number}] FAIL  {title}: {reason}")
        raise
    with capsys.disabled():
        print(f"\n[criterion {number}] PASS  {title} ({time.perf_counter() - start:.1f} s)")


def _timed_train(config):
    start = time.perf_counter()
    result = train(config, workers=0)
    return result, time.perf_counter() - start


@pytest.fixture(scope="module")
def chain_runs():
    return {algo: [_timed_train(desk_config("chain", algo, seed=s)) for s in SEEDS]
            for algo in ("pop3d", "ppo", "fixed-kl")}


@pytest.fixture(scope="module")
def point_mass_runs():
    return {algo: [_timed_train(desk_config("point_mass", algo, seed=s)) for s in SEEDS]
            for algo in ("pop3d", "ppo")}


def test_criterion_1_point_prob_distance_bound(capsys):
    with criterion(capsys, 1, "D_pp <= D_TV^2 on 10,000 categorical pairs, equality for K=2"):
        start = time.perf_counter()
        rng = np.random.default_rng(2024)
        ks = rng.integers(2, 17, size=10_000)
        worst, worst_binary = -np.inf, 0.0
        for k in range(2, 17):
            n = int(np.sum(ks == k))
            alpha = rng.choice([0.1, 1.0, 10.0], size=(n, 1))
            old = Categorical(probs=_dirichlet(rng, alpha, k))
            new = Categorical(probs=_dirichlet(rng, alpha, k))
            tv2 = total_variation(old, new).data ** 2
            for a in range(k):
                dpp = point_prob_distance(old, new, np.full(n, a)).data
                worst = max(worst, float(np.max(dpp - tv2)))
                if k == 2:
                    worst_binary = max(worst_binary, float(np.max(np.abs(dpp - tv2))))
        elapsed = time.perf_counter() - start
        assert worst <= 1e-12, f"bound violated by {worst:.3g}"
        assert worst_binary <= 1e-12, f"binary equality off by {worst_binary:.3g}"
        assert elapsed < 5.0, f"took {elapsed:.1f} s"


def _dirichlet(rng, alpha, k):
    g = rng.gamma(np.broadcast_to(alpha, (len(alpha), k)))
    g = np.maximum(g, 1e-300)
    return g / g.sum(axis=1, keepdims=True)


def _gradient_draw(rng, term):
    action_kind = "categorical" if rng.random() < 0.5 else "gaussian"
    obs_dim, act_dim, batch = int(rng.integers(2, 5)), int(rng.integers(2, 4)), int(rng.integers(3, 9))
    params = init_mlp(obs_dim, action_kind, act_dim, hidden=(int(rng.integers(3, 7)),), rng=rng, policy_scale=1.0,
                      shared_trunk=bool(rng.random() < 0.5))
    obs = rng.normal(size=(batch, obs_dim))
    old = forward(params.copy(), obs)[0].detach()
    for t in params.tensors():
        t.data += rng.normal(scale=0.3, size=t.shape)
    acts = rng.integers(0, act_dim, batch) if action_kind == "categorical" else rng.normal(size=(batch, act_dim))
    adv, targets = rng.normal(size=batch), rng.normal(size=batch)

    def f():
        dist, v = forward(params, obs)
        if term == "value":
            return value_loss(v, targets)
        if term == "entropy":
            return entropy(dist).mean()
        return policy_objective(ObjectiveKind(term, beta=5.0, clip_eps=0.2), PolicyBatch(dist, old, acts, adv))[0]

    return params, f


def test_criterion_2_gradient_suite(capsys):
    with criterion(capsys, 2, "analytic vs central-difference gradients, 20 draws per term"):
        start = time.perf_counter()
        rng = np.random.default_rng(77)
        worst = {}
        for term in ("pop3d", "ppo", "fixed-kl", "pg", "value", "entropy"):
            errs = []
            for _ in range(20):
                params, f = _gradient_draw(rng, term)
                errs.append(max_relative_error(grad(f(), params.tensors()), finite_difference_grad(f, params)))
            worst[term] = max(errs)
        elapsed = time.perf_counter() - start
        bad = {k: v for k, v in worst.items() if not v < 1e-4}
        assert not bad, f"relative error too large: {bad}"
        assert elapsed < 60.0, f"took {elapsed:.1f} s"


def _literal_gae(r, v, d, boot, gamma, lam):
    n = len(r)
    nxt = [0.0 if d[t] else (boot if t == n - 1 else v[t + 1]) for t in range(n)]
    delta = [r[t] + gamma * nxt[t] - v[t] for t in range(n)]
    out = []
    for t in range(n):
        total = 0.0
        for l in range(n - t):
            total += (gamma * lam) ** l * delta[t + l]
            if d[t + l]:
                break
        out.append(total)
    return np.array(out)


def test_criterion_3_gae_oracle(capsys):
    with criterion(capsys, 3, "recursive GAE vs literal double sum on 1,000 trajectories"):
        rng = np.random.default_rng(3)
        worst = worst0 = worst1 = 0.0
        for _ in range(1000):
            n = int(rng.integers(1, 13))
            r, v = rng.normal(size=n) * 3, rng.normal(size=n) * 3
            d = rng.random(n) < 0.3
            boot, gamma, lam = float(rng.normal()), float(rng.uniform(0, 1)), float(rng.uniform(0, 1))
            got = gae(Trajectory(r, v, d, boot, gamma, lam)).advantages
            worst = max(worst, float(np.max(np.abs(got - _literal_gae(r, v, d, boot, gamma, lam)))))
            a0 = gae(Trajectory(r, v, d, boot, gamma, 0.0)).advantages
            nxt = np.append(v[1:], boot)
            one = [one_step_advantage(r[t], v[t], nxt[t], gamma, terminal=d[t]) for t in range(n)]
            worst0 = max(worst0, float(np.max(np.abs(a0 - one))))
            a1 = gae(Trajectory(r, v, d, boot, gamma, 1.0)).advantages
            mc = discounted_return(r, gamma, dones=d, bootstrap_value=boot) - v
            worst1 = max(worst1, float(np.max(np.abs(a1 - mc))))
        assert worst <= 1e-10, f"double sum mismatch {worst:.3g}"
        assert worst0 <= 1e-10, f"lambda=0 mismatch {worst0:.3g}"
        assert worst1 <= 1e-10, f"lambda=1 mismatch {worst1:.3g}"


def test_criterion_4_ppo_pessimism(capsys):
    with criterion(capsys, 4, "saturated PPO samples give zero gradient, POP3D (beta=5) does not"):
        rng = np.random.default_rng(4)
        eps, beta = 0.2, 5.0
        ppo_max, pop_min = 0.0, np.inf
        for sign in (1.0, -1.0):
            for _ in range(50):
                params = init_mlp(4, "categorical", 3, hidden=(6,), rng=rng, policy_scale=1.0)
                obs = rng.normal(size=(1, 4))
                a = np.array([int(rng.integers(3))])
                logits = forward(params, obs)[0].logits.data.copy()
                # lower (sign=+1) or raise (sign=-1) the old logit so the ratio exits the clip range
                old_logits = logits.copy()
                old_logits[0, a[0]] -= sign * rng.uniform(1.5, 3.0)
                old = Categorical(logits=old_logits)
                adv = np.array([sign * rng.uniform(0.5, 2.0)])

                def objective(fn):
                    dist = forward(params, obs)[0]
                    return fn(PolicyBatch(dist, old, a, adv))

                r = float(np.exp(objective(lambda b: b.new_log_prob()).data[0] - old.log_probs()[0, a[0]]))
                assert (r > 1 + eps) if sign > 0 else (r < 1 - eps), f"construction failed, r={r}"
                g = grad(objective(lambda b: ppo_clip(b, eps)), params.tensors())
                ppo_max = max(ppo_max, float(np.sqrt(sum(np.sum(x * x) for x in g))))
                g = grad(objective(lambda b: pop3d(b, beta)), params.tensors())
                pop_min = min(pop_min, float(np.sqrt(sum(np.sum(x * x) for x in g))))
        assert ppo_max < 1e-10, f"ppo_clip gradient norm {ppo_max:.3g}"
        assert pop_min > 1e-8, f"pop3d gradient norm {pop_min:.3g}"


def test_criterion_5_discrete_learning(capsys, chain_runs):
    with criterion(capsys, 5, "chain(n=8): POP3D and PPO reach 0.9 x optimum on >= 2/3 seeds; FIXED_KL stable"):
        optimum = value_iteration_oracle(chain_mdp(8, -0.01, 1.0, 32)).greedy_return
        assert abs(optimum - 0.93) < 1e-12
        report = []
        for algo in ("pop3d", "ppo"):
            returns = [evaluate_greedy(res.params, chain_mdp(8, -0.01, 1.0, 32)) for res, _ in chain_runs[algo]]
            report.append(f"{algo} {['%.2f' % x for x in returns]} in {sum(t for _, t in chain_runs[algo]):.0f} s")
            assert sum(x >= 0.9 * optimum for x in returns) >= 2, f"{algo} greedy returns {returns}"
        for res, _ in chain_runs["fixed-kl"]:
            assert len(res.history) == 200
            assert all(np.all(np.isfinite(a)) for a in res.params.arrays())
            assert all(np.isfinite(m.score) for m in res.metrics)
        for algo, runs in chain_runs.items():
            total = sum(t for _, t in runs)
            assert total < 180.0, f"{algo} took {total:.0f} s"
        with capsys.disabled():
            print("\n    " + "; ".join(report))


def test_criterion_6_continuous_learning(capsys, point_mass_runs):
    with criterion(capsys, 6, "point_mass: POP3D and PPO improve mean return by >= 50% on >= 2/3 seeds"):
        report = []
        for algo, runs in point_mass_runs.items():
            gains = []
            for res, _ in runs:
                baseline = np.mean([m.score for m in res.metrics if m.iteration == 0])
                final = score_100([m.score for m in res.metrics])
                gains.append((final - baseline) / abs(baseline))
            report.append(f"{algo} {['%.0f%%' % (100 * g) for g in gains]} in {sum(t for _, t in runs):.0f} s")
            assert sum(g >= 0.5 for g in gains) >= 2, f"{algo} improvements {gains}"
            total = sum(t for _, t in runs)
            assert total < 300.0, f"{algo} took {total:.0f} s"
        with capsys.disabled():
            print("\n    " + "; ".join(report))


def test_criterion_7_determinism(capsys, tmp_path):
    with criterion(capsys, 7, "repeated sequential `train` runs give byte-identical CSVs"):
        for env, algo in [("chain", "pop3d"), ("chain", "ppo"), ("chain", "fixed-kl"), ("chain", "pg"),
                          ("point_mass", "pop3d"), ("point_mass", "ppo")]:
            blobs = []
            for rep in ("a", "b"):
                out = tmp_path / rep
                assert cli.main(["train", "--env", env, "--algo", algo, "--seed", "10", "--iterations", "4",
                                 "--out", str(out)]) == 0
                blobs.append((out / f"{env}__{algo}__seed10.csv").read_bytes())
            assert blobs[0] == blobs[1], f"{env}/{algo} CSVs differ"
            assert blobs[0].count(b"\n") > 1


def test_criterion_8_metric_integrity(capsys, tmp_path):
    with criterion(capsys, 8, "score_100(1..150)=100.5, score_all([1,2,3,4])=2.5, summary = hand average"):
        assert score_100(list(range(1, 151))) == 100.5
        assert score_all([1, 2, 3, 4]) == 2.5
        tiny = dict(iterations=3, horizon=32, minibatch_size=32, hidden=(8,))
        runs = [(a, desk_config("chain", a, **tiny)) for a in ("pop3d", "ppo")]
        summary, code = run_experiment(ExperimentManifest("chain", runs, SEEDS, tmp_path))
        assert code == 0
        for algo in ("pop3d", "ppo"):
            per_seed = [[r.score for r in read_csv(tmp_path / f"chain__{algo}__seed{s}.csv")] for s in SEEDS]
            s100 = (score_100(per_seed[0]) + score_100(per_seed[1]) + score_100(per_seed[2])) / 3
            sall = (score_all(per_seed[0]) + score_all(per_seed[1]) + score_all(per_seed[2])) / 3
            assert abs(summary.rows[algo]["score_100"] - s100) <= 1e-12
            assert abs(summary.rows[algo]["score_all"] - sall) <= 1e-12


def test_criterion_9_snapshot_identities(capsys, chain_runs, point_mass_runs):
    with criterion(capsys, 9, "first minibatch of each update: ratio = 1 +- 1e-9, penalty = 0 +- 1e-12"):
        runs = chain_runs["pop3d"] + chain_runs["fixed-kl"] + point_mass_runs["pop3d"]
        updates = 0
        for res, _ in runs:
            for diag in res.history:
                assert abs(diag["first_ratio_mean"] - 1.0) <= 1e-9, diag["first_ratio_mean"]
                assert abs(diag["first_penalty_mean"]) <= 1e-12, diag["first_penalty_mean"]
                updates += 1
        assert updates == 3 * 200 + 3 * 200 + 3 * 300
