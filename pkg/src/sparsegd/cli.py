"""Configuration-driven experiment harness.

Subcommands:

* ``run <config.json>``: time-step a (gamma, alpha) sweep, writing one
  time-series CSV per pair plus a summary CSV with divergence statistics
  and decay rates.
* ``cond-sweep <config.json>``: condition-number sweep of the relaxation
  component block over mesh sizes and k(gamma+alpha) values.
* ``mesh-info <path | gen:name:n>``: print mesh and DOF statistics.

Output floats use the shortest round-trip decimal representation, so
serial reruns of a config are byte-identical. The output directory can be
overridden by --out or the SPARSEGD_OUT environment variable; the
SPARSEGD_THREADS variable caps BLAS thread counts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import conditioning as cond_mod
from . import diagnostics
from .assembly import assemble_operator_set
from .fem_space import build_taylor_hood
from .forcing import FORCING_NAMES, get_forcing
from .mesh import generate_unit_cube, generate_unit_square, import_msh
from .schemes import SCHEMES, SchemeParams, SimulationError, run_with_operators

TIMESERIES_HEADER = "n,t,kinetic_energy,div_norm,E,D,identity_residual,load_pairing"
SUMMARY_HEADER = "gamma,alpha,avg_div_sq,final_div,rate_avg,rate_final,blowup_step"
CONDITIONING_HEADER = (
    "n,h,k_gamma_alpha,lambda_max,lambda_min,cond2,bound_shape,ratio,converged"
)

GENERATORS = {"unit_square": generate_unit_square, "unit_cube": generate_unit_cube}


class ConfigError(ValueError):
    """Configuration problem, reported with the offending field path."""


@dataclass(eq=False)
class MeshSpec:
    generator: str | None = None
    n: int | None = None
    msh_path: str | None = None

    def build(self):
        if self.msh_path is not None:
            with open(self.msh_path, "rb") as fh:
                return import_msh(fh)
        return GENERATORS[self.generator](self.n)

    def describe(self):
        if self.msh_path is not None:
            return f"msh:{self.msh_path}"
        return f"gen:{self.generator}:{self.n}"


@dataclass(eq=False)
class ExperimentConfig:
    name: str
    mesh: MeshSpec
    scheme: str
    nu: float
    k: float
    t_end: float
    gammas: list
    alpha_rule: dict
    forcing: str
    out_dir: str
    solver: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def pairs(self):
        """Resolve the (gamma, alpha) grid in configuration order."""
        mode = self.alpha_rule["mode"]
        if mode == "absolute":
            return [(g, a) for g in self.gammas for a in self.alpha_rule["values"]]
        return [(g, self.alpha_rule["value"] * g) for g in self.gammas]


_REQUIRED = object()


def _expect(mapping, key, kinds, path, default=_REQUIRED):
    if key not in mapping:
        if default is not _REQUIRED:
            return default
        raise ConfigError(f"{path}.{key}: missing required field")
    value = mapping[key]
    if kinds is not None and not isinstance(value, kinds):
        names = kinds.__name__ if isinstance(kinds, type) else "/".join(k.__name__ for k in kinds)
        raise ConfigError(f"{path}.{key}: expected {names}, got {type(value).__name__}")
    return value


def _parse_mesh(raw, path):
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object")
    if "msh_path" in raw:
        msh = _expect(raw, "msh_path", str, path)
        if not Path(msh).exists():
            raise ConfigError(f"{path}.msh_path: file not found: {msh}")
        return MeshSpec(msh_path=msh)
    generator = _expect(raw, "generator", str, path)
    if generator not in GENERATORS:
        raise ConfigError(f"{path}.generator: unknown generator {generator!r}")
    n = _expect(raw, "n", int, path)
    if n < 1:
        raise ConfigError(f"{path}.n: must be >= 1")
    return MeshSpec(generator=generator, n=n)


def parse_config(raw, base_dir=None):
    """Validate a decoded JSON object into an ExperimentConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object")
    name = _expect(raw, "experiment", str, "config")
    mesh = _parse_mesh(_expect(raw, "mesh", dict, "config"), "config.mesh")
    scheme = _expect(raw, "scheme", str, "config", default="modular_sgd")
    if scheme not in SCHEMES:
        raise ConfigError(f"config.scheme: unknown scheme {scheme!r}")
    nu = float(_expect(raw, "nu", (int, float), "config"))
    k = float(_expect(raw, "k", (int, float), "config"))
    t_end = float(_expect(raw, "t_end", (int, float), "config"))
    gammas = _expect(raw, "gammas", list, "config")
    if not gammas:
        raise ConfigError("config.gammas: must be nonempty")
    gammas = [float(g) for g in gammas]
    rule = _expect(raw, "alpha_rule", dict, "config")
    mode = _expect(rule, "mode", str, "config.alpha_rule")
    if mode == "absolute":
        values = _expect(rule, "values", list, "config.alpha_rule")
        if not values:
            raise ConfigError("config.alpha_rule.values: must be nonempty")
        rule = {"mode": mode, "values": [float(v) for v in values]}
    elif mode == "ratio":
        rule = {"mode": mode, "value": float(_expect(rule, "value", (int, float), "config.alpha_rule"))}
    else:
        raise ConfigError(f"config.alpha_rule.mode: expected 'absolute' or 'ratio', got {mode!r}")
    forcing = _expect(raw, "forcing", str, "config", default="zero")
    if forcing not in FORCING_NAMES:
        raise ConfigError(f"config.forcing: unknown forcing {forcing!r}")
    out_dir = _expect(raw, "out_dir", str, "config", default="results")
    if base_dir is not None and not os.path.isabs(out_dir):
        out_dir = str(Path(base_dir) / out_dir)
    solver = _expect(raw, "solver", dict, "config", default={})
    diag = _expect(raw, "diagnostics", dict, "config", default={})
    return ExperimentConfig(
        name=name,
        mesh=mesh,
        scheme=scheme,
        nu=nu,
        k=k,
        t_end=t_end,
        gammas=gammas,
        alpha_rule=rule,
        forcing=forcing,
        out_dir=out_dir,
        solver=solver,
        diagnostics=diag,
    )


def load_config(path):
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON in {path}: {exc}") from exc
    cfg = parse_config(raw, base_dir=path.parent)
    return cfg


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def pair_filename(gamma, alpha):
    return f"ts_gamma{_fmt(gamma)}_alpha{_fmt(alpha)}.csv"


def write_timeseries(path, records):
    lines = [TIMESERIES_HEADER]
    for r in records:
        lines.append(
            ",".join(
                [
                    str(r.n),
                    _fmt(r.t),
                    _fmt(r.kinetic_energy),
                    _fmt(r.div_norm),
                    _fmt(r.E),
                    _fmt(r.D),
                    _fmt(r.identity_residual),
                    _fmt(r.load_pairing),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_summary(path, summary):
    lines = [SUMMARY_HEADER]
    for row in summary.rows:
        lines.append(
            ",".join(
                [
                    _fmt(row.gamma),
                    _fmt(row.alpha),
                    _fmt(row.avg_div_sq),
                    _fmt(row.final_div),
                    _fmt(row.rate_avg),
                    _fmt(row.rate_final),
                    "" if row.blowup_step is None else str(row.blowup_step),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def load_csv(path):
    """Read a harness CSV into (header list, list of string-row lists)."""
    text = Path(path).read_text().strip().splitlines()
    header = text[0].split(",")
    return header, [line.split(",") for line in text[1:]]


def run_experiment(config, out_dir=None, max_steps=None):
    """Execute every (gamma, alpha) pair of a config; returns output paths.

    Time-series files carry the per-step diagnostics; the summary carries
    time-averaged divergence, end-time divergence, decay rates between
    consecutive gamma values, and the blow-up step when one occurred.
    """
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mesh = config.mesh.build()
    space = build_taylor_hood(mesh)
    ops = assemble_operator_set(space)
    forcing = get_forcing(config.forcing)

    series_paths = []
    entries = []
    for gamma, alpha in config.pairs():
        params = SchemeParams(
            nu=config.nu,
            k=config.k,
            t_end=config.t_end,
            gamma=gamma,
            alpha=alpha,
            scheme=config.scheme,
            forcing=forcing,
        )
        result = run_with_operators(space, ops, params, max_steps=max_steps)
        path = out / pair_filename(gamma, alpha)
        write_timeseries(path, result.records)
        series_paths.append(path)
        entries.append((gamma, alpha, result.records, result.blowup_step))

    summary = diagnostics.summarize_sweep(entries)
    summary_path = out / "summary.csv"
    write_summary(summary_path, summary)
    return {"series": series_paths, "summary": summary_path, "out_dir": out}


def parse_cond_config(raw, base_dir=None):
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object")
    mesh_raw = _expect(raw, "mesh", dict, "config", default={"generator": "unit_square"})
    generator = _expect(mesh_raw, "generator", str, "config.mesh", default="unit_square")
    if generator not in GENERATORS:
        raise ConfigError(f"config.mesh.generator: unknown generator {generator!r}")
    ns = _expect(raw, "ns", list, "config")
    if not ns or any(not isinstance(n, int) or n < 1 for n in ns):
        raise ConfigError("config.ns: expected a nonempty list of positive integers")
    kga = _expect(raw, "k_gamma_alpha", list, "config")
    kga = [float(v) for v in kga]
    if not kga or any(v < 0 for v in kga):
        raise ConfigError("config.k_gamma_alpha: expected nonnegative values")
    out_dir = _expect(raw, "out_dir", str, "config", default="results")
    if base_dir is not None and not os.path.isabs(out_dir):
        out_dir = str(Path(base_dir) / out_dir)
    return {"generator": generator, "ns": ns, "k_gamma_alpha": kga, "out_dir": out_dir}


def run_cond_sweep(config, out_dir=None):
    """Condition-number sweep; writes one CSV of report rows."""
    out = Path(out_dir or config["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for n in config["ns"]:
        mesh = GENERATORS[config["generator"]](n)
        space = build_taylor_hood(mesh)
        for kga in config["k_gamma_alpha"]:
            # k and gamma+alpha enter only through their product
            report = cond_mod.estimate_cond2(space, 1.0, kga)
            rows.append((n, report))
    lines = [CONDITIONING_HEADER]
    for n, r in rows:
        lines.append(
            ",".join(
                [
                    str(n),
                    _fmt(r.h),
                    _fmt(r.k * r.gamma_plus_alpha),
                    _fmt(r.lambda_max),
                    _fmt(r.lambda_min),
                    _fmt(r.cond2),
                    _fmt(r.bound_shape),
                    _fmt(r.cond2 / r.bound_shape),
                    _fmt(r.converged),
                ]
            )
        )
    path = out / "conditioning.csv"
    path.write_text("\n".join(lines) + "\n")
    return {"conditioning": path, "out_dir": out}


def describe_mesh(target):
    """Mesh statistics for a .msh path or a gen:<name>:<n> spec string."""
    if target.startswith("gen:"):
        parts = target.split(":")
        if len(parts) != 3 or parts[1] not in GENERATORS:
            raise ConfigError(f"mesh spec must be gen:<{'|'.join(GENERATORS)}>:<n>, got {target!r}")
        try:
            n = int(parts[2])
        except ValueError:
            raise ConfigError(f"mesh spec subdivision must be an integer, got {parts[2]!r}") from None
        mesh = GENERATORS[parts[1]](n)
    else:
        with open(target, "rb") as fh:
            mesh = import_msh(fh)
    space = build_taylor_hood(mesh)
    return {
        "dim": mesh.dim,
        "vertices": mesh.num_vertices,
        "cells": mesh.num_cells,
        "boundary_facets": len(mesh.boundary_facets),
        "h": mesh.h,
        "scalar_p2_dofs": space.n_scalar,
        "velocity_dofs": space.n_velocity,
        "pressure_dofs": space.n_pressure,
        "dirichlet_velocity_dofs": int(space.dirichlet_velocity_dofs.size),
    }


def _apply_thread_env():
    threads = os.environ.get("SPARSEGD_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)


def _resolve_out(args_out):
    return args_out or os.environ.get("SPARSEGD_OUT") or None


def main(argv=None):
    parser = argparse.ArgumentParser(prog="sparsegd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a time-stepping experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (overrides config and SPARSEGD_OUT)")
    p_run.add_argument("--max-steps", type=int, default=None)

    p_cond = sub.add_parser("cond-sweep", help="run a conditioning sweep config")
    p_cond.add_argument("config")
    p_cond.add_argument("--out", help="output directory (overrides config and SPARSEGD_OUT)")

    p_info = sub.add_parser("mesh-info", help="print mesh statistics")
    p_info.add_argument("target", help=".msh path or gen:<generator>:<n>")

    args = parser.parse_args(argv)
    _apply_thread_env()

    try:
        if args.command == "run":
            config = load_config(args.config)
            result = run_experiment(
                config, out_dir=_resolve_out(args.out), max_steps=args.max_steps
            )
            print(f"wrote {len(result['series'])} time series and {result['summary']}")
        elif args.command == "cond-sweep":
            config = parse_cond_config(
                json.loads(Path(args.config).read_text()), base_dir=Path(args.config).parent
            )
            result = run_cond_sweep(config, out_dir=_resolve_out(args.out))
            print(f"wrote {result['conditioning']}")
        else:
            info = describe_mesh(args.target)
            for key, value in info.items():
                print(f"{key}: {value}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
