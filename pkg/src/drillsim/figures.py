"""Report figures, rendered headless to PNG files.

Every function takes plain arrays plus an output path and returns the path;
no function here reads input files or touches global state beyond the Agg
canvas. Figures are an optional layer on top of the delimited reports, never
a data source.
"""
from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

__all__ = [
    "battery_figure",
    "classification_slice_figure",
    "metric_distributions_figure",
    "ranking_figure",
    "coverage_figure",
    "gains_figure",
    "group_means_figure",
    "trials_figure",
    "scatter_figure",
    "gaze_figure",
]

_DPI = 110


def _finish(fig, path) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return str(path)


def battery_figure(names, values, orientations, path, dentist_value=None) -> str:
    """Horizontal bars of the metric battery for one outcome."""
    names = list(names)
    values = np.asarray(values, dtype=np.float64)
    colors = ["#d1642e" if o == "error" else "#2e7bd1" for o in orientations]
    fig, ax = plt.subplots(figsize=(7.0, 0.28 * len(names) + 1.2))
    y = np.arange(len(names))[::-1]
    shown = np.where(np.isfinite(values), values, 0.0)
    ax.barh(y, shown, color=colors)
    for yi, v in zip(y, values):
        label = "n/a" if not np.isfinite(v) else f"{v:.3f}"
        ax.text(max(shown.max(), 1.0) * 1.01, yi, label, va="center", fontsize=7)
    ax.set_yticks(y, names, fontsize=7)
    ax.set_xlabel("value (blue: higher is better, orange: lower is better)")
    title = "metric battery"
    if dentist_value is not None and np.isfinite(dentist_value):
        title += f"  (dentist score {dentist_value:.3f})"
    ax.set_title(title)
    return _finish(fig, path)


def classification_slice_figure(pristine_occ, ideal_occ, outcome_occ, path,
                                axis: int = 2, index: int | None = None) -> str:
    """A cross-section with voxels colored by classification bucket."""
    pristine_occ = np.asarray(pristine_occ, dtype=bool)
    ideal_occ = np.asarray(ideal_occ, dtype=bool)
    outcome_occ = np.asarray(outcome_occ, dtype=bool)
    if index is None:
        index = pristine_occ.shape[axis] // 2
    sl = [slice(None)] * 3
    sl[axis] = index
    universe = pristine_occ[tuple(sl)]
    kept = outcome_occ[tuple(sl)]
    should = ideal_occ[tuple(sl)]

    # 0 empty, 1 TP kept-right, 2 TN drilled-right, 3 FP under-drill, 4 FN over-drill
    img = np.zeros(universe.shape, dtype=np.uint8)
    img[universe & kept & should] = 1
    img[universe & ~kept & ~should] = 2
    img[universe & kept & ~should] = 3
    img[universe & ~kept & should] = 4
    palette = np.array([
        [1.00, 1.00, 1.00],
        [0.78, 0.78, 0.78],
        [0.62, 0.78, 0.95],
        [0.95, 0.60, 0.15],
        [0.85, 0.15, 0.15],
    ])
    rgb = palette[img]
    fig, ax = plt.subplots(figsize=(5.2, 5.2))
    ax.imshow(np.transpose(rgb, (1, 0, 2)), origin="lower", interpolation="nearest")
    ax.set_title(f"classification slice (axis {axis}, index {index})")
    ax.set_xticks([])
    ax.set_yticks([])
    handles = [plt.Rectangle((0, 0), 1, 1, color=palette[i]) for i in (1, 2, 3, 4)]
    ax.legend(handles, ["kept right", "drilled right", "under-drill", "over-drill"],
              loc="upper right", fontsize=7)
    return _finish(fig, path)


def metric_distributions_figure(names, matrix, path) -> str:
    """Histogram per metric across a batch of outcomes (rows = outcomes)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    names = list(names)
    ncols = 5
    nrows = int(np.ceil(len(names) / ncols))
    fig, axes = plt.subplots(nrows, ncols, figsize=(2.3 * ncols, 1.9 * nrows))
    axes = np.atleast_2d(axes)
    for i, name in enumerate(names):
        ax = axes[i // ncols][i % ncols]
        col = matrix[:, i]
        col = col[np.isfinite(col)]
        if col.size:
            ax.hist(col, bins=24, color="#2e7bd1")
        ax.set_title(name, fontsize=7)
        ax.tick_params(labelsize=6)
    for j in range(len(names), nrows * ncols):
        axes[j // ncols][j % ncols].axis("off")
    return _finish(fig, path)


def ranking_figure(names, abs_r, path) -> str:
    """Metrics ranked by absolute correlation against the expert panel."""
    names = list(names)
    abs_r = np.asarray(abs_r, dtype=np.float64)
    order = np.argsort(np.where(np.isfinite(abs_r), abs_r, -1.0))[::-1]
    fig, ax = plt.subplots(figsize=(7.0, 0.26 * len(names) + 1.2))
    y = np.arange(len(names))[::-1]
    vals = np.where(np.isfinite(abs_r[order]), abs_r[order], 0.0)
    ax.barh(y, vals, color="#2e7bd1")
    ax.set_yticks(y, [names[i] for i in order], fontsize=7)
    ax.set_xlabel("|R| against expert scores")
    ax.set_xlim(0.0, 1.0)
    return _finish(fig, path)


def coverage_figure(values, chosen_indices, path, label="score") -> str:
    """Value strip with the uniform-coverage picks highlighted."""
    values = np.asarray(values, dtype=np.float64)
    chosen = np.asarray(chosen_indices, dtype=np.int64)
    fig, ax = plt.subplots(figsize=(7.0, 2.0))
    ax.plot(values, np.zeros_like(values), "|", color="#999999", markersize=14)
    ax.plot(values[chosen], np.zeros(chosen.size), "|", color="#d1642e",
            markersize=22, markeredgewidth=2)
    ax.set_yticks([])
    ax.set_xlabel(label)
    ax.set_title(f"uniform coverage: {chosen.size} of {values.size} outcomes")
    return _finish(fig, path)


def gains_figure(gains, fences, path) -> str:
    """Learning-gain histogram with the outlier fences marked."""
    gains = np.asarray(gains, dtype=np.float64)
    lo, hi = fences
    fig, ax = plt.subplots(figsize=(6.0, 3.4))
    ax.hist(gains, bins=20, color="#2e7bd1")
    ax.axvline(lo, color="#d1642e", linestyle="--", label="fences")
    ax.axvline(hi, color="#d1642e", linestyle="--")
    ax.axvline(0.0, color="#555555", linewidth=0.8)
    ax.set_xlabel("learning gain (post error minus pre error)")
    ax.set_ylabel("participants")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def group_means_figure(group_names, means, sds, path, ylabel="mean gain") -> str:
    fig, ax = plt.subplots(figsize=(6.0, 3.4))
    x = np.arange(len(group_names))
    ax.bar(x, means, yerr=sds, capsize=4, color="#2e7bd1")
    ax.set_xticks(x, group_names, fontsize=8, rotation=15)
    ax.axhline(0.0, color="#555555", linewidth=0.8)
    ax.set_ylabel(ylabel)
    return _finish(fig, path)


def trials_figure(trial_matrix, groups, path) -> str:
    """Mean per-trial score per group across the six trials."""
    trial_matrix = np.asarray(trial_matrix, dtype=np.float64)
    groups = np.asarray(groups, dtype=object)
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    xs = np.arange(1, trial_matrix.shape[1] + 1)
    for g in dict.fromkeys(groups.tolist()):
        sel = groups == g
        ax.plot(xs, trial_matrix[sel].mean(axis=0), marker="o", label=str(g))
    ax.set_xlabel("trial")
    ax.set_ylabel("mean score")
    ax.set_xticks(xs)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def scatter_figure(x, y, xlabel, ylabel, path, r=None) -> str:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(4.6, 3.8))
    ax.plot(x, y, "o", color="#2e7bd1", markersize=4)
    if x.size >= 2 and np.ptp(x) > 0:
        coef = np.polyfit(x, y, 1)
        xs = np.linspace(x.min(), x.max(), 32)
        ax.plot(xs, np.polyval(coef, xs), color="#d1642e", linewidth=1.2)
    ax.set_xlabel(xlabel, fontsize=9)
    ax.set_ylabel(ylabel, fontsize=9)
    if r is not None and np.isfinite(r):
        ax.set_title(f"R = {r:.3f}", fontsize=9)
    return _finish(fig, path)


def gaze_figure(distances, hits, path) -> str:
    """Hit/miss timeline plus the distance histogram over hits."""
    distances = np.asarray(distances, dtype=np.float64)
    hits = np.asarray(hits, dtype=bool)
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(8.0, 3.0))
    idx = np.arange(hits.size)
    ax0.plot(idx[hits], np.ones(hits.sum()), "|", color="#2e7bd1", markersize=12)
    ax0.plot(idx[~hits], np.zeros((~hits).sum()), "|", color="#d1642e", markersize=12)
    ax0.set_yticks([0, 1], ["miss", "hit"])
    ax0.set_xlabel("sample")
    ax0.set_ylim(-0.5, 1.5)
    if hits.any():
        ax1.hist(distances[hits], bins=20, color="#2e7bd1")
    ax1.set_xlabel("hit distance")
    ax1.set_ylabel("samples")
    return _finish(fig, path)
