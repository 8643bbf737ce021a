"""Per-trial score CSVs: header, formatting and parsing."""

from __future__ import annotations

import csv
import math
import re
from pathlib import Path

from ..trainer import MetricRecord

HEADER = ("seed", "iteration", "episode", "frames", "score", "ratio_mean", "penalty_mean", "clip_frac")
_INT_COLS = {"seed", "iteration", "episode", "frames"}
_NAME = re.compile(r"^(?P<env>.+?)__(?P<algo>.+?)__seed(?P<seed>-?\d+)\.csv$")


class CsvParseError(ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


def fmt_float(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def trial_filename(env, algo, seed):
    return f"{env}__{algo}__seed{seed}.csv"


def parse_trial_filename(path):
    m = _NAME.match(Path(path).name)
    if m is None:
        return None
    return m["env"], m["algo"], int(m["seed"])


def format_rows(records):
    out = [",".join(HEADER)]
    for r in records:
        out.append(",".join([str(int(r.seed)), str(int(r.iteration)), str(int(r.episode)), str(int(r.frames)),
                             fmt_float(r.score), fmt_float(r.ratio_mean), fmt_float(r.penalty_mean),
                             fmt_float(r.clip_frac)]))
    return "\n".join(out) + "\n"


def write_csv(path, records):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(format_rows(records))
    return path


def read_csv(path):
    """Parse a trial CSV into MetricRecords; columns may come in any order."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(path, 1, "empty file") from None
        if sorted(header) != sorted(HEADER):
            raise CsvParseError(path, 1, f"header {header} does not match {list(HEADER)}")
        records = []
        for lineno, row in enumerate(reader, 2):
            if len(row) != len(header):
                raise CsvParseError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
            try:
                vals = {k: (int(v) if k in _INT_COLS else float(v)) for k, v in zip(header, row)}
            except ValueError as exc:
                raise CsvParseError(path, lineno, str(exc)) from None
            records.append(MetricRecord(**vals))
    return records
