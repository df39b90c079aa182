"""Batch front door: config parsing, command dispatch, output management.

Configs are flat TOML tables (or the ``summary.json`` emitted by a previous
run, which makes every run replayable from its own output).  Exit codes:
0 success, 2 config error, 3 numeric non-convergence, 4 inconclusive
certification.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import kernel, mp
from .errors import ConfigError, ConvergenceError
from .experiments import (
    ExperimentConfig,
    __version__,
    run_convergence,
    run_fluctuations,
    write_summary,
)
from .population import PopulationModel, build_population, decompose
from .sampling import EntryLaw

logger = logging.getLogger("covlab")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_INCONCLUSIVE = 4

_SCHEMAS = {
    "population": {
        "kind", "N", "d", "slowly_varying", "theta",
        "spikes", "bulk", "matrix_path", "eigenvalues",
    },
    "law": {"name"},
    "experiment": {
        "N_ladder", "n_numerator", "n_denominator", "n",
        "replicates", "seed", "diagonalize_population", "dump_matrices",
    },
    "kernel": {"rho", "grids", "k", "compare_N"},
    "support": {"r", "x_min", "x_max", "points", "curve_points"},
    "spectrum": {"N_ladder", "k"},
}

_COMMAND_SECTIONS = {
    "simulate-convergence": ("population", "law", "experiment"),
    "simulate-fluctuations": ("population", "law", "experiment"),
    "toeplitz-spectrum": ("population", "spectrum"),
    "kernel-limit": ("kernel",),
    "support-scan": ("population", "support"),
}


def load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    if p.suffix == ".json":
        data = json.loads(p.read_text())
        if "config" in data:          # replaying an emitted summary.json
            data = data["config"]
        return data
    try:
        return tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def _parse_literal(text: str):
    lowered = text.strip()
    if lowered in ("true", "false"):
        return lowered == "true"
    for caster in (int, float):
        try:
            return caster(lowered)
        except ValueError:
            pass
    if lowered.startswith("["):
        try:
            return json.loads(lowered)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse list override {text!r}: {exc}") from exc
    return lowered


def apply_overrides(config: dict, assignments: list) -> dict:
    out = {sec: dict(table) for sec, table in config.items()}
    for item in assignments:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        section, dot, name = key.strip().partition(".")
        if not dot:
            raise ConfigError(f"override key {key!r} needs a section prefix")
        out.setdefault(section, {})[name] = _parse_literal(value)
    return out


def validate_config(config: dict, command: str) -> None:
    allowed = _COMMAND_SECTIONS[command]
    for section, table in config.items():
        if section not in allowed:
            raise ConfigError(f"unknown config section {section!r} for {command}")
        if not isinstance(table, dict):
            raise ConfigError(f"section {section!r} must be a table")
        for key in table:
            if key not in _SCHEMAS[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
    for section in allowed:
        if section in ("population", "law", "kernel") and section not in config:
            raise ConfigError(f"missing required config section [{section}]")


def _experiment_config(config: dict, args) -> ExperimentConfig:
    law_name = config.get("law", {}).get("name")
    if not law_name:
        raise ConfigError("missing law.name")
    try:
        law = EntryLaw.from_name(law_name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    exp = dict(config.get("experiment", {}))
    seed = args.seed if args.seed is not None else exp.get("seed", 0)
    ladder = exp.get("N_ladder")
    if ladder is None:
        n_pop = config.get("population", {}).get("N")
        if n_pop is None:
            raise ConfigError("missing experiment.N_ladder (or population.N)")
        ladder = [n_pop]
    try:
        return ExperimentConfig(
            population=dict(config["population"]),
            law=law,
            N_ladder=list(ladder),
            n_numerator=int(exp.get("n_numerator", 5)),
            n_denominator=int(exp.get("n_denominator", 4)),
            n_explicit=int(exp["n"]) if "n" in exp else None,
            replicates=int(exp.get("replicates", 1)),
            seed=int(seed),
            diagonalize_population=bool(exp.get("diagonalize_population", False)),
            out_dir=Path(args.out),
            workers=args.workers,
            dump_matrices=bool(args.dump_matrices or exp.get("dump_matrices", False)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid experiment config: {exc}") from exc


def _g17(x) -> str:
    return format(float(x), ".17g")


def _typed(table: dict, key: str, caster, default):
    if key not in table:
        return default
    try:
        return caster(table[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {table[key]!r}") from exc


def _cmd_simulate_convergence(config, args) -> int:
    run_convergence(_experiment_config(config, args))
    return EXIT_OK


def _cmd_simulate_fluctuations(config, args) -> int:
    run_fluctuations(_experiment_config(config, args))
    return EXIT_OK


def _cmd_toeplitz_spectrum(config, args) -> int:
    pop = config["population"]
    if pop.get("kind") != "toeplitz":
        raise ConfigError("toeplitz-spectrum needs a population of kind 'toeplitz'")
    spec_tbl = config.get("spectrum", {})
    ladder = _typed(spec_tbl, "N_ladder", lambda v: [int(N) for N in v],
                    [int(pop.get("N", 1000))])
    k = _typed(spec_tbl, "k", int, 2)
    try:
        model0 = PopulationModel.from_config(pop, N=max(ladder))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid population config: {exc}") from exc
    kspec = kernel.KernelSpec.from_autocovariance(model0.autocov)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["N", "k", "lambda_k", "normalized"])
    per_n = {}
    for N in ladder:
        logger.info("toeplitz-spectrum: N=%d k=%d", N, k)
        normalized = kernel.widom_shampine_eigs(kspec, N, k)
        rn = float(kspec.R(N))
        for j, val in enumerate(normalized, start=1):
            writer.writerow([N, j, _g17(val * N * rn), _g17(val)])
        per_n[str(N)] = {"normalized": [float(v) for v in normalized]}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "toeplitz_spectrum.csv").write_text(buf.getvalue())
    write_summary(out / "summary.json", {
        "command": "toeplitz-spectrum",
        "code_version": __version__,
        "seed": args.seed or 0,
        "config": {"population": dict(pop), "spectrum": {"N_ladder": ladder, "k": k}},
        "per_N": per_n,
    })
    return EXIT_OK


def _cmd_kernel_limit(config, args) -> int:
    tbl = config["kernel"]
    if "rho" not in tbl:
        raise ConfigError("missing kernel.rho")
    rho = _typed(tbl, "rho", float, None)
    grids = _typed(tbl, "grids", lambda v: tuple(int(g) for g in v), kernel.DEFAULT_GRIDS)
    k = _typed(tbl, "k", int, 2)
    try:
        estimate = kernel.gap_ratio_estimate(rho, grids=grids, k=k)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    payload = estimate.to_json_dict()
    summary = {
        "command": "kernel-limit",
        "code_version": __version__,
        "seed": args.seed or 0,
        "config": {"kernel": {"rho": rho, "grids": list(grids), "k": k}},
        "estimate": payload,
    }
    compare_n = _typed(tbl, "compare_N", int, 0)
    if compare_n:
        d = (rho + 1.0) / 2.0
        kspec = kernel.KernelSpec.from_memory_exponent(d)
        toeplitz_vals = kernel.widom_shampine_eigs(kspec, compare_n, k)
        summary["config"]["kernel"]["compare_N"] = compare_n
        summary["toeplitz_route"] = {
            "N": compare_n,
            "normalized": [float(v) for v in toeplitz_vals],
        }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "kernel_limit.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    write_summary(out / "summary.json", summary)
    if estimate.status != "certified":
        logger.warning("kernel-limit: inconclusive separation at rho=%g", rho)
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _cmd_support_scan(config, args) -> int:
    tbl = config.get("support", {})
    if "r" not in tbl:
        raise ConfigError("missing support.r (aspect ratio)")
    r = _typed(tbl, "r", float, None)
    x_min = _typed(tbl, "x_min", float, 0.0)
    x_max = _typed(tbl, "x_max", float, 10.0)
    points = _typed(tbl, "points", int, 101)
    curve_points = _typed(tbl, "curve_points", int, 201)
    try:
        model = PopulationModel.from_config(config["population"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid population config: {exc}") from exc
    eigs = decompose(build_population(model)).eigenvalues
    xs = np.linspace(x_min, x_max, points)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["x", "outside", "witness_y"])
    flips = []
    last = None
    for x in xs:
        outside, witness = mp.support_complement(eigs, r, float(x))
        writer.writerow([_g17(x), int(outside), _g17(witness.y) if witness else ""])
        if last is not None and outside != last:
            flips.append(float(x))
        last = outside
    lam1 = float(np.max(eigs))
    y_hi = 1.0 / lam1 if lam1 > 0 else 1.0
    y_grid = np.linspace(1e-6 * y_hi, (1 - 1e-6) * y_hi, curve_points)
    curve = mp.boundary_scan(eigs, r, y_grid)
    cbuf = io.StringIO()
    cwriter = csv.writer(cbuf)
    cwriter.writerow(["y", "x", "x_prime"])
    for y, x, xp in curve:
        cwriter.writerow([_g17(y), _g17(x), _g17(xp)])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "support_scan.csv").write_text(buf.getvalue())
    (out / "boundary_curve.csv").write_text(cbuf.getvalue())
    write_summary(out / "summary.json", {
        "command": "support-scan",
        "code_version": __version__,
        "seed": args.seed or 0,
        "config": {
            "population": dict(config["population"]),
            "support": {"r": r, "x_min": x_min, "x_max": x_max,
                        "points": points, "curve_points": curve_points},
        },
        "upper_edge_estimate": mp.upper_support_edge(eigs, r),
        "flips": flips,
    })
    return EXIT_OK


_HANDLERS = {
    "simulate-convergence": _cmd_simulate_convergence,
    "simulate-fluctuations": _cmd_simulate_fluctuations,
    "toeplitz-spectrum": _cmd_toeplitz_spectrum,
    "kernel-limit": _cmd_kernel_limit,
    "support-scan": _cmd_support_scan,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covlab",
        description="Largest-eigenvalue laboratory for sample covariance matrices",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _HANDLERS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML config or a summary.json to replay")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="override a config entry")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--dump-matrices", action="store_true")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="[covlab] %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        config = apply_overrides(load_config(args.config), args.overrides)
        validate_config(config, args.command)
        return _HANDLERS[args.command](config, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
