"""Standalone entry points: flowfigs-plot and flowfigs-table."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .csvio import SchemaError, default_label
from .plots import PlotSpec, plot_timeseries
from .tables import render_table1


def _parse_series(tokens):
    series = []
    for token in tokens:
        if ":" in token and not Path(token).exists():
            path, label = token.rsplit(":", 1)
        else:
            path, label = token, default_label(token)
        series.append((path, label))
    return series


def plot_main(argv=None):
    parser = argparse.ArgumentParser(
        prog="flowfigs-plot",
        description="Plot harness time-series CSVs as one labelled figure.",
    )
    parser.add_argument("series", nargs="+", metavar="CSV[:LABEL]")
    parser.add_argument("--ordinate", default="kinetic_energy",
                        choices=("kinetic_energy", "div_norm"))
    parser.add_argument("--log", action="store_true", help="log-scale ordinate")
    parser.add_argument("--out", default="figure.png",
                        help="output image (format from the extension; default PNG)")
    parser.add_argument("--title", default="")
    args = parser.parse_args(argv)
    spec = PlotSpec(
        series=_parse_series(args.series),
        ordinate=args.ordinate,
        logscale=args.log,
        out_path=args.out,
        title=args.title,
    )
    try:
        path = plot_timeseries(spec)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


def table_main(argv=None):
    parser = argparse.ArgumentParser(
        prog="flowfigs-table",
        description="Render a sweep summary CSV as a Markdown table.",
    )
    parser.add_argument("summary", metavar="SUMMARY_CSV")
    parser.add_argument("--out", help="write to a file instead of stdout")
    args = parser.parse_args(argv)
    try:
        table = render_table1(args.summary)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.out:
        Path(args.out).write_text(table)
    else:
        print(table, end="")
    return 0


if __name__ == "__main__":
    sys.exit(plot_main())
