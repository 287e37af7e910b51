"""Minimal readers for the harness CSV contracts."""

from __future__ import annotations

import csv
from pathlib import Path

TIMESERIES_COLUMNS = (
    "n", "t", "kinetic_energy", "div_norm", "E", "D", "identity_residual", "load_pairing",
)
SUMMARY_COLUMNS = (
    "gamma", "alpha", "avg_div_sq", "final_div", "rate_avg", "rate_final", "blowup_step",
)


class SchemaError(ValueError):
    """CSV does not follow the harness header contract."""


def read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: empty file")
    return rows[0], rows[1:]


def read_timeseries(path, columns=("t",)):
    """Columns from a time-series CSV as float lists (in file order)."""
    header, rows = read_rows(path)
    missing = [c for c in columns if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {missing}; header is {header}")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    idx = [header.index(c) for c in columns]
    return [[float(row[i]) for row in rows] for i in idx]


def read_summary(path):
    """Summary rows as dicts with floats (blowup_step kept as string)."""
    header, rows = read_rows(path)
    if list(header) != list(SUMMARY_COLUMNS):
        raise SchemaError(f"{path}: header {header} != {list(SUMMARY_COLUMNS)}")
    out = []
    for row in rows:
        entry = {name: row[i] for i, name in enumerate(SUMMARY_COLUMNS)}
        for key in ("gamma", "alpha", "avg_div_sq", "final_div"):
            entry[key] = float(entry[key])
        out.append(entry)
    if not out:
        raise SchemaError(f"{path}: no summary rows")
    return out


def default_label(path):
    return Path(path).stem
