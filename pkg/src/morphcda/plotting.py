"""Bar charts for bias reports, rendered off-screen to image files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLORS = {"original": "#4c72b0", "swap": "#dd8452", "mrf": "#55a868"}
# fixed metadata keeps repeated renders byte-identical
_PNG_META = {"Software": None}


def _bars(ax, groups, conditions, values, ylabel):
    x = np.arange(len(groups))
    width = 0.8 / max(len(conditions), 1)
    for i, cond in enumerate(conditions):
        heights = [values[g][cond] for g in groups]
        ax.bar(x + (i - (len(conditions) - 1) / 2) * width, heights, width,
               label=cond, color=COLORS.get(cond))
    ax.set_xticks(x)
    ax.set_xticklabels(groups)
    ax.set_ylabel(ylabel)
    ax.axhline(0, color="black", linewidth=0.8)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)


def plot_bias_reports(reports, path, title=None):
    """Stereotyping (left) and grammaticality (right), one group per language."""
    reports = list(reports)
    if not reports:
        raise ValueError("nothing to plot")
    conditions = reports[0].conditions
    groups = [r.language or f"run{i}" for i, r in enumerate(reports)]
    stereo = {g: {c: r.mean_abs_stereotype(c) for c in conditions} for g, r in zip(groups, reports)}
    gram = {g: {c: r.mean_grammaticality(c) for c in conditions} for g, r in zip(groups, reports)}
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 3.5))
    _bars(left, groups, conditions, stereo, "mean |log ratio|")
    left.set_title("Gender stereotyping")
    _bars(right, groups, conditions, gram, "mean log ratio")
    right.set_title("Grammaticality")
    right.legend(frameon=False, fontsize="small")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_group_stereotype(values, path, title=None):
    """Signed stereotyping for masculine- and feminine-stereotyped word groups.

    ``values`` maps group name -> condition -> signed mean log ratio.
    """
    groups = list(values)
    if not groups:
        raise ValueError("nothing to plot")
    conditions = list(values[groups[0]])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    _bars(ax, groups, conditions, values, "mean log ratio")
    ax.legend(frameon=False, fontsize="small")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)
    return path
