#!/usr/bin/env python3
"""Run every shipped experiment config through the harness.

Usage:
    python scripts/run_experiments.py [--configs DIR] [--max-steps N] [--skip NAME ...]

With no arguments this reproduces the full desk-scale experiment set
(stability thresholds for both schemes, near-critical alphas, gamma sweeps,
and the conditioning sweep). Expect a few minutes of runtime; pass
--max-steps 40 for a quick pass.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from sparsegd import cli

TIME_STEPPING = [
    "smoke.json",
    "stability_threshold.json",
    "stability_threshold_sgd1.json",
    "near_critical.json",
    "gamma_sweep.json",
    "gamma_sweep_full.json",
]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--configs", default=Path(__file__).resolve().parent.parent / "configs")
    parser.add_argument("--max-steps", type=int, default=None)
    parser.add_argument("--skip", nargs="*", default=())
    args = parser.parse_args(argv)
    configs = Path(args.configs)

    for name in TIME_STEPPING:
        if name in args.skip:
            continue
        path = configs / name
        t0 = time.time()
        result = cli.run_experiment(cli.load_config(path), max_steps=args.max_steps)
        print(f"{name}: {len(result['series'])} series -> {result['out_dir']} "
              f"({time.time() - t0:.1f}s)")

    if "conditioning.json" not in args.skip:
        path = configs / "conditioning.json"
        config = cli.parse_cond_config(json.loads(path.read_text()), base_dir=path.parent)
        t0 = time.time()
        result = cli.run_cond_sweep(config)
        print(f"conditioning.json -> {result['conditioning']} ({time.time() - t0:.1f}s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
