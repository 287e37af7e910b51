"""Multi-series time plots of harness output."""

from __future__ import annotations

import math
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .csvio import read_timeseries

ORDINATES = {"kinetic_energy": "kinetic energy", "div_norm": "|| div u ||"}


@dataclass
class PlotSpec:
    """What to draw: labelled CSVs, the ordinate, scaling, output path."""

    series: list  # of (csv path, label)
    ordinate: str = "kinetic_energy"
    logscale: bool = False
    out_path: str = "figure.png"
    title: str = ""

    def __post_init__(self):
        if not self.series:
            raise ValueError("plot spec needs at least one series")
        if self.ordinate not in ORDINATES:
            raise ValueError(f"ordinate must be one of {sorted(ORDINATES)}")


def _finite_prefix(ts, ys):
    """Truncate a series at its last finite value; reports if it was cut."""
    keep = len(ys)
    for i, y in enumerate(ys):
        if not math.isfinite(y):
            keep = i
            break
    return ts[:keep], ys[:keep], keep < len(ys)


def build_figure(spec):
    """Assemble the matplotlib figure for a spec (without saving)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for path, label in spec.series:
        ts, ys = read_timeseries(path, ("t", spec.ordinate))
        ts, ys, truncated = _finite_prefix(ts, ys)
        if not ts:
            raise ValueError(f"{path}: no finite values to plot")
        (line,) = ax.plot(ts, ys, label=label)
        if truncated:
            # mark where a blown-up series leaves the finite range
            ax.plot(ts[-1], ys[-1], "x", markersize=9, color=line.get_color())
    ax.set_xlabel("t")
    ax.set_ylabel(ORDINATES[spec.ordinate])
    if spec.logscale:
        ax.set_yscale("log")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    fig.tight_layout()
    return fig


def plot_timeseries(spec):
    """Render the spec to its output image; returns the path."""
    fig = build_figure(spec)
    try:
        fig.savefig(spec.out_path, dpi=130)
    finally:
        plt.close(fig)
    return spec.out_path
