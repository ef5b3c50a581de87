"""Figures for backtest reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

POLICY_COLOURS = {"ideal": "#4c72b0", "constrained": "#55a868", "heuristic": "#c44e52"}
POLICY_LABELS = {"ideal": "ideal splits", "constrained": "constrained splits", "heuristic": "heuristic baseline"}

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "whalloc",
}


def figure_size(scale=1.0):
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    width = 6.4 * scale
    return width, width * golden


def metric_bars(ax, summary, unit, prefix):
    scenarios = list(summary["scenarios"])
    x = np.arange(len(scenarios))
    width = 0.26
    for k, policy in enumerate(("ideal", "constrained", "heuristic")):
        vals = []
        for s in scenarios:
            block = summary["scenarios"][s]
            m = block["overall"] if unit == "All" else block["by_unit"][unit]
            vals.append(m[f"{prefix}_{policy}"])
        bars = ax.bar(x + (k - 1) * width, vals, width, color=POLICY_COLOURS[policy], label=POLICY_LABELS[policy])
        for b, v in zip(bars, vals):
            ax.text(b.get_x() + b.get_width() / 2, v + 0.01, f"{v:.2f}", ha="center", va="bottom", fontsize=7)
    ax.set_xticks(x)
    ax.set_xticklabels(scenarios)
    ax.set_ylim(0, 1.08)
    ax.set_ylabel("RU" if prefix == "ru" else "2DD")


def render_figures(summary, out_dir) -> list[Path]:
    """One PNG per business unit (plus "All"): RU and 2DD by policy and scenario."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    first = next(iter(summary["scenarios"].values()))
    units = ["All"] + sorted(first["by_unit"])
    written = []
    with plt.rc_context(STYLE):
        for unit in units:
            fig, axes = plt.subplots(1, 2, figsize=figure_size(1.2))
            metric_bars(axes[0], summary, unit, "ru")
            metric_bars(axes[1], summary, unit, "tdd")
            axes[0].set_title("Regional utilisation")
            axes[1].set_title("Two-day delivery")
            handles, labels = axes[0].get_legend_handles_labels()
            fig.legend(handles, labels, loc="lower center", ncol=3, frameon=False)
            fig.suptitle("All business units" if unit == "All" else unit)
            fig.tight_layout(rect=(0, 0.07, 1, 1))
            path = out_dir / f"metrics_{unit.lower().replace(' ', '_')}.png"
            fig.savefig(path, dpi=120, metadata={"Software": None})
            plt.close(fig)
            written.append(path)
    return written
