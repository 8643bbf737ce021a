"""Seeded multi-trial runs and head-to-head summaries.

A manifest is a JSON file::

    {
      "env": "chain",
      "seeds": [0, 10, 100],
      "out": "runs/chain",
      "workers": 1,
      "algorithms": [
        {"algo": "pop3d"},
        {"algo": "ppo", "config": "ppo.cfg", "overrides": {"clip_eps": 0.1}}
      ]
    }

Each entry starts from the desk-scale defaults for ``(env, algo)``, then
applies the optional config file and ``overrides``.  Every algorithm must
consume the same number of environment frames.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ContractError
from ..trainer import TrainConfig, desk_config, train
from .configfile import load_config
from .csvio import read_csv, trial_filename, write_csv
from .metrics import score_100, score_all

DEFAULT_SEEDS = (0, 10, 100)
METRICS = ("score_100", "score_all")


@dataclass
class ExperimentManifest:
    env: str
    runs: list  # [(algo, TrainConfig)]
    seeds: tuple = DEFAULT_SEEDS
    out: Path = Path("runs")
    workers: int = 1

    def __post_init__(self):
        self.out = Path(self.out)
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.runs:
            raise ContractError("manifest lists no algorithms")
        if not self.seeds:
            raise ContractError("manifest lists no seeds")
        budgets = {algo: c.iterations * c.actors * c.horizon for algo, c in self.runs}
        if len(set(budgets.values())) > 1:
            raise ContractError(f"algorithms must share a frame budget, got {budgets}")
        names = [algo for algo, _ in self.runs]
        if len(set(names)) != len(names):
            raise ContractError(f"duplicate algorithm names {names}")


def load_manifest(path):
    path = Path(path)
    raw = json.loads(path.read_text())
    unknown = set(raw) - {"env", "seeds", "out", "workers", "algorithms"}
    if unknown:
        raise ContractError(f"{path}: unknown manifest keys {sorted(unknown)}")
    env = raw["env"]
    runs = []
    for entry in raw["algorithms"]:
        algo = entry["algo"]
        base = desk_config(env, algo)
        cfg_path = entry.get("config")
        if cfg_path is not None and not Path(cfg_path).is_absolute():
            cfg_path = path.parent / cfg_path
        cfg = load_config(cfg_path, base=base, **entry.get("overrides", {}))
        runs.append((entry.get("name", cfg.algo), cfg))
    out = Path(raw.get("out", "runs"))
    if not out.is_absolute():
        out = path.parent / out
    return ExperimentManifest(env, runs, tuple(raw.get("seeds", DEFAULT_SEEDS)), out, int(raw.get("workers", 1)))


@dataclass
class TrialResult:
    algo: str
    seed: int
    csv_path: Path | None
    score_100: float = float("nan")
    score_all: float = float("nan")
    error: str | None = None

    @property
    def ok(self):
        return self.error is None


def run_trial(algo, config: TrainConfig, out_dir, workers=None):
    """Train one (algorithm, seed) pair and write its CSV."""
    path = Path(out_dir) / trial_filename(config.env, algo, config.seed)
    try:
        result = train(config, workers=workers)
    except Exception as exc:  # a failed trial is reported, not fatal
        return TrialResult(algo, config.seed, None, error=f"{type(exc).__name__}: {exc}")
    write_csv(path, result.metrics)
    scores = [m.score for m in result.metrics]
    if not scores:
        return TrialResult(algo, config.seed, path, error="no episode completed")
    return TrialResult(algo, config.seed, path, score_100(scores), score_all(scores))


def _run_trial_args(args):
    return run_trial(*args)


@dataclass
class Summary:
    rows: dict  # algo -> {"score_100", "score_all", "trials", "failed"}
    winners: dict = field(default_factory=dict)  # metric -> algo or None (tie)

    @property
    def failed(self):
        return any(r["failed"] for r in self.rows.values())


def pick_winner(values, rel_tol=1e-12):
    """Name of the largest entry, or ``None`` when the top is tied."""
    finite = {k: v for k, v in values.items() if np.isfinite(v)}
    if not finite:
        return None
    best = max(finite.values())
    top = [k for k, v in finite.items() if abs(v - best) <= rel_tol * max(1.0, abs(best))]
    return top[0] if len(top) == 1 else None


def summarize(trials):
    rows = {}
    for t in trials:
        row = rows.setdefault(t.algo, {"s100": [], "sall": [], "trials": 0, "failed": 0})
        row["trials"] += 1
        if t.ok:
            row["s100"].append(t.score_100)
            row["sall"].append(t.score_all)
        else:
            row["failed"] += 1
    out = {}
    for algo, row in rows.items():
        out[algo] = {
            "score_100": float(np.mean(row["s100"])) if row["s100"] else float("nan"),
            "score_all": float(np.mean(row["sall"])) if row["sall"] else float("nan"),
            "trials": row["trials"], "failed": row["failed"],
        }
    winners = {m: pick_winner({a: r[m] for a, r in out.items()}) for m in METRICS}
    return Summary(out, winners)


def summarize_dir(directory, env=None):
    """Recompute the summary from the CSVs on disk."""
    from .csvio import parse_trial_filename

    trials = []
    for path in sorted(Path(directory).glob("*.csv")):
        parsed = parse_trial_filename(path)
        if parsed is None or (env is not None and parsed[0] != env):
            continue
        scores = [r.score for r in read_csv(path)]
        trials.append(TrialResult(parsed[1], parsed[2], path, score_100(scores), score_all(scores)))
    return summarize(trials)


def format_summary(summary: Summary):
    lines = ["algorithm    score_100            score_all            trials  failed"]
    for algo, r in summary.rows.items():
        marks = ["*" if summary.winners.get(m) == algo else " " for m in METRICS]
        lines.append(f"{algo:<12} {r['score_100']:<19.6g}{marks[0]} {r['score_all']:<19.6g}{marks[1]} "
                     f"{r['trials']:>6}  {r['failed']:>6}")
    for m in METRICS:
        if summary.winners.get(m) is None:
            lines.append(f"{m}: tie (no winner)")
    return "\n".join(lines)


def write_summary(path, summary: Summary):
    from .csvio import fmt_float

    lines = ["algorithm,score_100,score_all,trials,failed,best_score_100,best_score_all"]
    for algo, r in summary.rows.items():
        best = [str(int(summary.winners.get(m) == algo)) for m in METRICS]
        lines.append(",".join([algo, fmt_float(r["score_100"]), fmt_float(r["score_all"]),
                               str(r["trials"]), str(r["failed"]), *best]))
    Path(path).write_text("\n".join(lines) + "\n")


def run_experiment(manifest: ExperimentManifest):
    """Run every (algorithm, seed) trial; returns ``(summary, exit_code)``."""
    manifest.out.mkdir(parents=True, exist_ok=True)
    jobs = [(algo, cfg.replace(seed=seed, env=manifest.env), manifest.out)
            for algo, cfg in manifest.runs for seed in manifest.seeds]
    if manifest.workers > 1:
        with ProcessPoolExecutor(manifest.workers) as pool:
            trials = list(pool.map(_run_trial_args, jobs))
    else:
        trials = [run_trial(*job) for job in jobs]
    summary = summarize(trials)
    write_summary(manifest.out / "summary.csv", summary)
    errors = [f"{t.algo} seed {t.seed}: {t.error}" for t in trials if not t.ok]
    if errors:
        (manifest.out / "failures.txt").write_text("\n".join(errors) + "\n")
    return summary, 1 if summary.failed else 0
