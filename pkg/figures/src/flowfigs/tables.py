"""Markdown rendering of divergence-summary CSVs.

Decay rates are recomputed here from the averaged and end-time divergence
columns (log-quotient between consecutive distinct gamma rows); that is the
only arithmetic these scripts perform on the data.
"""

from __future__ import annotations

import math

from .csvio import read_summary

HEADER = ("γ", "Avg(‖∇·u‖²)", "rate", "‖∇·u(T)‖", "rate")


def rate(q1, q2, gamma1, gamma2):
    """ln(q2/q1) / ln(gamma2/gamma1); must match the solver's diagnostics."""
    if q1 <= 0.0 or q2 <= 0.0:
        raise ValueError("rate undefined for nonpositive quantities")
    if gamma1 <= 0.0 or gamma2 <= 0.0 or gamma1 == gamma2:
        raise ValueError("rate needs distinct positive gamma values")
    return math.log(q2 / q1) / math.log(gamma2 / gamma1)


def _fmt(value):
    return f"{value:.5g}"


def _rate_cell(prev, cur, key):
    if prev is None or prev["gamma"] == cur["gamma"]:
        return "-"
    if prev[key] <= 0.0 or cur[key] <= 0.0:
        return "-"
    return _fmt(rate(prev[key], cur[key], prev["gamma"], cur["gamma"]))


def render_table1(summary_csv):
    """Markdown table of gamma, averaged div^2, end-time div, and rates."""
    rows = read_summary(summary_csv)
    lines = [
        "| " + " | ".join(HEADER) + " |",
        "|" + "|".join(["---"] * len(HEADER)) + "|",
    ]
    prev = None
    for row in rows:
        cells = (
            _fmt(row["gamma"]),
            _fmt(row["avg_div_sq"]),
            _rate_cell(prev, row, "avg_div_sq"),
            _fmt(row["final_div"]),
            _rate_cell(prev, row, "final_div"),
        )
        lines.append("| " + " | ".join(cells) + " |")
        prev = row
    return "\n".join(lines) + "\n"


def parse_table(markdown):
    """Parse a rendered table back into cell strings (for round-trip checks)."""
    rows = []
    for line in markdown.strip().splitlines()[2:]:
        cells = [c.strip() for c in line.strip().strip("|").split("|")]
        rows.append(cells)
    return rows
