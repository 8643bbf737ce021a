"""Command-line entry point: ``pop3d-lab {train,compare,plot,oracle}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..envs import ChainMDP, value_iteration_oracle
from ..errors import ContractError, DiagnosticsError, UpdateAborted
from ..trainer import desk_config, save_checkpoint, train
from .configfile import load_config
from .csvio import CsvParseError, trial_filename, write_csv
from .experiment import format_summary, load_manifest, run_experiment
from .metrics import score_100, score_all
from .plots import plot_dir

ALGOS = ("pop3d", "ppo", "fixed-kl", "pg")
ENVS = ("chain", "point_mass")


def cmd_train(args):
    config = load_config(args.config, base=desk_config(args.env, args.algo),
                         env=args.env, algo=args.algo, seed=args.seed, iterations=args.iterations)
    try:
        result = train(config)
    except (UpdateAborted, DiagnosticsError) as exc:
        it = getattr(exc, "iteration", None)
        print(f"training aborted{'' if it is None else f' at iteration {it}'}: {exc}", file=sys.stderr)
        return 1
    path = write_csv(Path(args.out) / trial_filename(config.env, config.algo, config.seed), result.metrics)
    if args.checkpoint:
        save_checkpoint(args.checkpoint, result.params, result.adam, result.rng_states,
                        extra={"seed": config.seed, "iterations": config.iterations})
    scores = [m.score for m in result.metrics]
    print(f"wrote {path}")
    if scores:
        print(f"episodes {len(scores)}  score_100 {score_100(scores):.6g}  score_all {score_all(scores):.6g}")
    return 0


def cmd_compare(args):
    manifest = load_manifest(args.manifest)
    summary, code = run_experiment(manifest)
    print(format_summary(summary))
    return code


def cmd_plot(args):
    written = plot_dir(args.dir, args.out)
    for p in written:
        print(f"wrote {p}")
    return 0


def cmd_oracle(args):
    if args.env != "chain":
        raise ContractError(f"{args.env} is not enumerable; the oracle needs the chain environment")
    cfg = load_config(args.config, base=desk_config("chain", "pop3d"))
    env = ChainMDP(**cfg.env_kwargs())
    res = value_iteration_oracle(env, gamma=args.gamma)
    print(f"start-state value (gamma={args.gamma}): {res.start_value:.10g}")
    print(f"greedy undiscounted return: {res.greedy_return:.10g}")
    print("values: " + " ".join(f"{v:.6g}" for v in res.values))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="pop3d-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one agent and write its score CSV")
    p.add_argument("--env", choices=ENVS, required=True)
    p.add_argument("--algo", choices=ALGOS, required=True)
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs")
    p.add_argument("--iterations", type=int, help="override the iteration count")
    p.add_argument("--checkpoint", help="also write final parameters to this .npz")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="run a JSON experiment manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot", help="draw score curves for every CSV in a directory")
    p.add_argument("--dir", required=True)
    p.add_argument("--out", help="output directory (defaults to --dir)")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("oracle", help="print the value-iteration optimum")
    p.add_argument("--env", choices=ENVS, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--config")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ContractError, CsvParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
