"""Experiment management: metrics, config files, CSVs, plots and the CLI."""

from ..trainer import MetricRecord
from .configfile import dump_config, load_config, parse_config_text
from .csvio import HEADER, CsvParseError, read_csv, write_csv
from .experiment import (ExperimentManifest, format_summary, load_manifest, run_experiment, summarize,
                         summarize_dir)
from .metrics import score_100, score_all
from .plots import emit_plots, mean_curve, plot_dir, running_mean

__all__ = [
    "HEADER", "CsvParseError", "ExperimentManifest", "MetricRecord", "dump_config", "emit_plots",
    "format_summary", "load_config", "load_manifest", "mean_curve", "parse_config_text", "plot_dir",
    "read_csv", "run_experiment", "running_mean", "score_100", "score_all", "summarize", "summarize_dir",
    "write_csv",
]
