"""Score-curve figures from trial CSVs."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import numpy as np

from .csvio import parse_trial_filename, read_csv


def load_curves(paths):
    """``{env: {algo: {seed: (frames, scores)}}}`` for trial CSVs."""
    curves = defaultdict(lambda: defaultdict(dict))
    for path in paths:
        parsed = parse_trial_filename(path)
        if parsed is None:
            continue
        env, algo, seed = parsed
        recs = read_csv(path)
        curves[env][algo][seed] = (np.array([r.frames for r in recs], dtype=np.float64),
                                   np.array([r.score for r in recs], dtype=np.float64))
    return curves


def running_mean(scores, window=100):
    """Trailing mean over the last ``window`` episodes (fewer at the start),
    i.e. ``score_100`` as it evolves during training."""
    scores = np.asarray(scores, dtype=np.float64)
    if window < 1:
        raise ValueError("window must be >= 1")
    c = np.concatenate([[0.0], np.cumsum(scores)])
    idx = np.arange(1, len(scores) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def mean_curve(per_seed, grid=None):
    """Average of per-seed curves, each linearly interpolated onto ``grid``.

    The default grid is the union of all frame counts, clipped to the range
    every seed covers.
    """
    series = [c for c in per_seed if len(c[0])]
    if not series:
        return np.array([]), np.array([])
    if grid is None:
        lo = max(f[0] for f, _ in series)
        hi = min(f[-1] for f, _ in series)
        grid = np.unique(np.concatenate([f for f, _ in series]))
        grid = grid[(grid >= lo) & (grid <= hi)]
    grid = np.asarray(grid, dtype=np.float64)
    return grid, np.mean([np.interp(grid, f, s) for f, s in series], axis=0)


def emit_plots(paths, out_dir=None, window=100):
    """Write one ``<env>_scores.png`` per environment; returns the file paths.

    Each seed's scores are drawn as a trailing ``window``-episode mean; the
    thick line is the mean of those per-seed curves.  ``window=1`` draws raw
    episode scores.
    """
    paths = [Path(p) for p in paths]
    if not paths:
        return []
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir) if out_dir is not None else paths[0].parent
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for env, algos in sorted(load_curves(paths).items()):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
        for i, (algo, seeds) in enumerate(sorted(algos.items())):
            color = colors[i % len(colors)]
            smoothed = [(f, running_mean(s, window)) for _, (f, s) in sorted(seeds.items())]
            for f, s in smoothed:
                ax.plot(f, s, color=color, alpha=0.35, linewidth=0.8)
            grid, mean = mean_curve(smoothed)
            ax.plot(grid, mean, color=color, linewidth=2.0, label=f"{algo} (mean of {len(seeds)})")
        ax.set_xlabel("frames")
        ax.set_ylabel("episode score" if window == 1 else f"mean score, last {window} episodes")
        ax.set_title(env)
        ax.legend(loc="lower right")
        fig.tight_layout()
        target = out_dir / f"{env}_scores.png"
        fig.savefig(target, dpi=100)
        plt.close(fig)
        written.append(target)
    return written


def plot_dir(directory, out_dir=None):
    return emit_plots(sorted(Path(directory).glob("*.csv")), out_dir)
