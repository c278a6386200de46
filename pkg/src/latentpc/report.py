"""Figure rendering for evaluation summaries.

Charts mirror the summary JSON: median MSPE rank and rank-1 share per
methodology per horizon, benchmark-significance shares, and per-variable
predictor effects.  Files are written next to the delimited output.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _horizon_axis(summary: dict) -> list[int]:
    return [int(h) for h in summary["horizons"]]


def _series(summary: dict, key: str, methodology: str, horizons) -> list[float]:
    per_h = summary[key].get(methodology, {})
    return [per_h.get(str(h), math.nan) for h in horizons]


def plot_median_rank(summary: dict, path: Path) -> None:
    horizons = _horizon_axis(summary)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for m in summary["methodologies"]:
        ax.plot(horizons, _series(summary, "median_rank", m, horizons), marker="o", label=m)
    ax.set_xlabel("forecast horizon (quarters)")
    ax.set_ylabel("median MSPE rank (1 = best)")
    ax.invert_yaxis()
    ax.set_xticks(horizons)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_rank1_share(summary: dict, path: Path) -> None:
    horizons = _horizon_axis(summary)
    methodologies = summary["methodologies"]
    width = 0.8 / max(len(methodologies), 1)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for i, m in enumerate(methodologies):
        vals = _series(summary, "rank1_share", m, horizons)
        ax.bar([h + (i - len(methodologies) / 2) * width for h in horizons], vals,
               width=width, label=m)
    ax.set_xlabel("forecast horizon (quarters)")
    ax.set_ylabel("share of specs ranked 1")
    ax.set_xticks(horizons)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_significance(summary: dict, path: Path) -> None:
    horizons = _horizon_axis(summary)
    methodologies = summary["methodologies"]
    width = 0.8 / max(len(methodologies), 1)
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5), sharey=True)
    panels = [
        ("significant_share", f"F-test p < {summary['significance_level']:g}"),
        ("improvement_share", f"MSPE gain >= {summary['improvement_threshold']:.0%} vs {summary['benchmark']}"),
    ]
    for ax, (key, title) in zip(axes, panels):
        for i, m in enumerate(methodologies):
            vals = _series(summary, key, m, horizons)
            ax.bar([h + (i - len(methodologies) / 2) * width for h in horizons], vals,
                   width=width, label=m)
        ax.set_title(title, fontsize=10)
        ax.set_xlabel("forecast horizon (quarters)")
        ax.set_xticks(horizons)
        ax.grid(alpha=0.3, axis="y")
    axes[0].set_ylabel("share of specs")
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_predictor_effects(summary: dict, path: Path) -> None:
    effects = summary.get("predictor_effects", {})
    if not effects:
        return
    horizons = _horizon_axis(summary)
    variables = sorted(effects)
    ncols = 4
    nrows = max(1, math.ceil(len(horizons) / ncols))
    fig, axes = plt.subplots(nrows, ncols, figsize=(3.2 * ncols, 2.8 * nrows), sharey=True)
    axes = [axes] if nrows * ncols == 1 else list(axes.flat)
    for ax, h in zip(axes, horizons):
        vals = [effects[v].get(str(h), math.nan) for v in variables]
        ax.bar(range(len(variables)), vals)
        ax.axhline(0.0, color="black", linewidth=0.8)
        ax.set_title(f"h = {h}", fontsize=9)
        ax.set_xticks(range(len(variables)))
        ax.set_xticklabels(variables, rotation=90, fontsize=6)
    for ax in axes[len(horizons):]:
        ax.axis("off")
    fig.suptitle(
        f"median MSPE effect of including a variable ({summary['effects_methodology']}),"
        " below zero = improvement",
        fontsize=10,
    )
    fig.tight_layout(rect=(0, 0, 1, 0.96))
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_figures(summary: dict, outdir) -> list[Path]:
    """Render every applicable chart; returns the written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    jobs = [
        ("median_rank.png", plot_median_rank),
        ("rank1_share.png", plot_rank1_share),
        ("significance.png", plot_significance),
        ("predictor_effects.png", plot_predictor_effects),
    ]
    for name, fn in jobs:
        path = outdir / name
        fn(summary, path)
        if path.exists():
            written.append(path)
    return written
