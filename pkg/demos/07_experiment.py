"""
A seeded head-to-head run with CSVs, a summary and a figure
===========================================================

"""

import tempfile
from pathlib import Path

from pop3d_lab.harness import ExperimentManifest, emit_plots, format_summary, run_experiment
from pop3d_lab.trainer import desk_config

out = Path(tempfile.mkdtemp(prefix="pop3d-lab-"))
short = dict(iterations=40)
runs = [(algo, desk_config("chain", algo, **short)) for algo in ("pop3d", "ppo", "pg")]

# every algorithm sees the same frames and the same seeds
summary, code = run_experiment(ExperimentManifest("chain", runs, seeds=(0, 10, 100), out=out))
print(format_summary(summary))
print("exit code", code)

csvs = sorted(out.glob("chain__*.csv"))
print("\n".join(p.name for p in csvs))
print("figure", emit_plots(csvs, out))
