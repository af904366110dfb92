"""Figures of the SVG report, drawn with matplotlib.

Figures are built on the object API so no global pyplot state is involved.
SVG ids are salted with a fixed string and the date is omitted, which keeps
the output byte-identical for identical reports.
"""

import io
from typing import Optional, Sequence

import matplotlib
import numpy as np
from matplotlib.figure import Figure

FIGSIZE = (6.4, 3.6)
SVG_HASHSALT = "rppgbench"
SVG_RC = {"svg.hashsalt": SVG_HASHSALT, "svg.fonttype": "path"}


def bar_chart(
    title: str,
    groups: Sequence[str],
    series: Sequence[str],
    values: Sequence[Sequence[Optional[float]]],
    y_label: str = "",
    x_label: str = "",
) -> Figure:
    """Grouped bar chart; values[i][j] is series j in group i, None leaves a gap."""
    fig = Figure(figsize=FIGSIZE)
    ax = fig.add_subplot()
    width = 0.8 / max(len(series), 1)
    centers = np.arange(len(groups))
    for j, name in enumerate(series):
        present = [i for i in range(len(groups)) if values[i][j] is not None]
        ax.bar(
            centers[present] - 0.4 + (j + 0.5) * width,
            [values[i][j] for i in present],
            width,
            label=name,
        )
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(centers)
    ax.set_xticklabels(groups)
    ax.set_title(title)
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    ax.legend(loc="upper left", bbox_to_anchor=(1.0, 1.0), frameon=False)
    fig.tight_layout()
    return fig


def bland_altman_plot(title: str, means, diffs, bias, loa_lo, loa_hi) -> Figure:
    fig = Figure(figsize=FIGSIZE)
    ax = fig.add_subplot()
    ax.scatter(means, diffs, s=12, alpha=0.7)
    ax.axhline(bias, color="black", linestyle="-", linewidth=1)
    ax.axhline(loa_hi, color="tab:red", linestyle="--", linewidth=1)
    ax.axhline(loa_lo, color="tab:red", linestyle="--", linewidth=1)
    right = max(means)
    ax.text(right, bias, f"bias {bias:.2f}", ha="right", va="bottom")
    ax.text(right, loa_hi, f"+1.96 SD {loa_hi:.2f}", ha="right", va="bottom")
    ax.text(right, loa_lo, f"-1.96 SD {loa_lo:.2f}", ha="right", va="top")
    ax.set_title(title)
    ax.set_xlabel("mean of prediction and truth [bpm]")
    ax.set_ylabel("prediction - truth [bpm]")
    fig.tight_layout()
    return fig


def render_svg(fig: Figure) -> str:
    buffer = io.StringIO()
    with matplotlib.rc_context(SVG_RC):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()
