"""Deterministic CSV emission and matplotlib SVG figures.

CSV files are written with repr-formatted floats and explicit newlines, so
identical data produces byte-identical files on every platform and under
any worker count.  Figures render one line per lambda plus the tuned
envelope; text stays as real SVG <text> nodes and every curve carries a
stable gid, keeping the output inspectable by XML tools.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["Series", "emit_csv", "emit_svg_plot", "format_cell"]


@dataclass(frozen=True)
class Series:
    """One plotted curve."""

    label: str
    x: np.ndarray
    y: np.ndarray
    se: np.ndarray | None = None
    role: str = "curve"  # "curve" or "envelope"


def format_cell(value) -> str:
    """Stable text form: repr for floats (shortest round-trip), str otherwise."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def emit_csv(path, columns, rows) -> str:
    """Write one header row plus data rows; returns the path written."""
    lines = [",".join(str(c) for c in columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(
                f"row width {len(row)} does not match {len(columns)} columns"
            )
        lines.append(",".join(format_cell(v) for v in row))
    text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return str(path)


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", label).strip("-") or "series"


def emit_svg_plot(
    path,
    series_list,
    title: str,
    xlabel: str,
    ylabel: str,
    log_x: bool = False,
    log_y: bool = False,
) -> str:
    """Render the series to a standalone SVG file.

    Each curve gets gid "series-<label slug>" in the SVG tree; envelope
    series are drawn heavier and dashed.  Returns the path written.
    """
    with plt.rc_context({"svg.fonttype": "none", "svg.hashsalt": "ridgelab"}):
        fig, ax = plt.subplots(figsize=(7.0, 4.5))
        try:
            for series in series_list:
                style = (
                    dict(color="black", linewidth=2.2, linestyle="--", zorder=5)
                    if series.role == "envelope"
                    else dict(linewidth=1.2, alpha=0.85)
                )
                (line,) = ax.plot(series.x, series.y, label=series.label, **style)
                line.set_gid(f"series-{_slug(series.label)}")
                if series.se is not None:
                    se = np.asarray(series.se)
                    ax.fill_between(
                        np.asarray(series.x),
                        np.asarray(series.y) - 2 * se,
                        np.asarray(series.y) + 2 * se,
                        color=line.get_color(),
                        alpha=0.15,
                        linewidth=0,
                    )
            if log_x:
                ax.set_xscale("log")
            if log_y:
                ax.set_yscale("log")
            ax.set_title(title)
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            if series_list:
                ax.legend(loc="best", fontsize=8)
            fig.tight_layout()
            fig.savefig(path, format="svg")
        finally:
            plt.close(fig)
    return str(path)
