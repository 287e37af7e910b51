#!/usr/bin/env python3
"""Recompute a sweep summary from its time-series files and compare.

Usage:
    python scripts/crosscheck_summary.py RESULTS_DIR

Reads summary.csv in RESULTS_DIR, recomputes avg ||div u||^2, the end-time
divergence, and the decay rates from the per-pair time-series CSVs, and
exits nonzero on any mismatch beyond 1e-12 relative.
"""

import math
import sys
from pathlib import Path

from sparsegd import cli, diagnostics


def check(results_dir):
    results_dir = Path(results_dir)
    _, rows = cli.load_csv(results_dir / "summary.csv")
    problems = []
    recomputed = []
    for row in rows:
        gamma, alpha = float(row[0]), float(row[1])
        series = results_dir / cli.pair_filename(gamma, alpha)
        _, ts = cli.load_csv(series)
        divs = [float(r[3]) for r in ts if math.isfinite(float(r[3]))]
        avg = sum(d * d for d in divs) / len(divs)
        final = divs[-1]
        recomputed.append((gamma, avg, final))
        for label, got, want in (("avg_div_sq", float(row[2]), avg), ("final_div", float(row[3]), final)):
            if abs(got - want) > 1e-12 * max(abs(want), 1.0):
                problems.append(f"gamma={gamma} alpha={alpha}: {label} {got!r} != {want!r}")
        blowup = row[6]
        if blowup and len(ts) >= int(blowup) and ts[-1][0] != blowup:
            problems.append(f"gamma={gamma}: blow-up step {blowup} not at series end")

    for prev, cur, row in zip(recomputed, recomputed[1:], rows[1:]):
        if prev[0] == cur[0] or row[4] == "":
            continue
        want = diagnostics.rate(prev[1], cur[1], prev[0], cur[0])
        got = float(row[4])
        if abs(got - want) > 1e-12 * max(abs(want), 1.0):
            problems.append(f"gamma={cur[0]}: rate_avg {got!r} != {want!r}")
    return problems


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print(__doc__, file=sys.stderr)
        return 2
    problems = check(argv[0])
    if problems:
        for p in problems:
            print(f"MISMATCH {p}", file=sys.stderr)
        return 1
    print(f"{argv[0]}: summary consistent with time series")
    return 0


if __name__ == "__main__":
    sys.exit(main())
