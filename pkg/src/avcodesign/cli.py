"""Batch command line: sweep simulations, build implementation tables,
answer design queries, run task-chain sweeps, and re-render exports.

Subcommands
    simulate  run the Monte-Carlo sweeps and fill the cell cache
    build     write the monotone implementation tables to tables.json
    solve     assemble the diagram, query it, export the front and figures
    sweep     solve along the configured task chain and check that harder
              tasks only move the answer upward
    export    regenerate front.csv, plot data, and figures from front.json

Exit codes: 0 success, 2 feasible run with an empty front, 1 failure.
Every run writes manifest.json (config and catalog digests, seeds, library
versions, output file hashes) into the output directory.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .assemble import (
    EXPOSED_RESOURCES,
    build_relations,
    catalog_for,
)
from .cache import CacheError, SweepCache
from .catalog import CatalogError, catalog_digest
from .config import (
    ConfigError,
    RunConfig,
    config_digest,
    default_config,
    load_config,
)
from .designspace import monotonize
from .diagram import DiagramError, FixedPointDivergence
from .mdpi import MdpiError
from .order import PosetError
from .report import (
    EXPORT_SCHEMA,
    ReportError,
    regenerate_exports,
    run_query,
    write_front_outputs,
    write_manifest,
    write_sweep_outputs,
)

_ERRORS = (ConfigError, CatalogError, CacheError, DiagramError, MdpiError,
           PosetError, ReportError, OSError, FixedPointDivergence)


def _parse_projections(text: str):
    pairs = []
    for part in text.split("|"):
        names = tuple(n.strip() for n in part.split(","))
        if len(names) != 2 or not all(names):
            raise ConfigError(
                f"projection {part!r} must be two coordinates "
                "separated by a comma")
        for name in names:
            if name not in EXPOSED_RESOURCES:
                raise ConfigError(
                    f"unknown projection coordinate {name!r}; "
                    f"choose from {', '.join(EXPOSED_RESOURCES)}")
        pairs.append(names)
    return tuple(pairs)


def _resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else default_config()
    sweep = config.sweep
    if getattr(args, "seed", None) is not None:
        sweep = replace(sweep, seed=args.seed)
    if getattr(args, "runs", None) is not None:
        sweep = replace(sweep, runs=args.runs)
    if sweep != config.sweep:
        config = replace(config, sweep=sweep)
    if getattr(args, "projection", None):
        config = replace(config,
                         projections=_parse_projections(args.projection))
    return config


def _open_cache(args) -> SweepCache | None:
    if not getattr(args, "cache", None):
        return None
    cache_dir = Path(args.cache)
    cache_dir.mkdir(parents=True, exist_ok=True)
    return SweepCache(cache_dir / "sweep_cache.csv")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_simulate(args) -> int:
    config = _resolve_config(args)
    out = _out_dir(args)
    catalog = catalog_for(config)
    cache = _open_cache(args)
    try:
        lateral, longitudinal = build_relations(config, cache=cache,
                                                catalog=catalog)
    finally:
        if cache is not None:
            cache.close()
    summary = {
        "schema": EXPORT_SCHEMA,
        "kind": "simulate",
        "config_digest": config_digest(config),
        "catalog_digest": catalog_digest(catalog),
        "seed": config.sweep.seed,
        "runs": config.sweep.runs,
        "relations": {
            "lateral": {"designs": len(lateral.labels()),
                        "samples": len(lateral.samples)},
            "longitudinal": {"designs": len(longitudinal.labels()),
                             "samples": len(longitudinal.samples)},
        },
    }
    (out / "simulate.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    write_manifest(out, command="simulate", config=config, catalog=catalog,
                   outputs=["simulate.json"])
    print(f"lateral: {len(lateral.samples)} samples over "
          f"{len(lateral.labels())} designs")
    print(f"longitudinal: {len(longitudinal.samples)} samples over "
          f"{len(longitudinal.labels())} designs")
    print(f"wrote {out / 'simulate.json'}")
    return 0


def _table_payload(table) -> dict:
    rows = []
    for label, provide, require in table.rows:
        design, cell = label if isinstance(label, tuple) else (label, provide)
        rows.append({"label": str(design), "cell": list(cell),
                     "require": list(require)})
    rows.sort(key=lambda r: (r["label"], r["cell"]))
    return {
        "functionality": [n for n, _ in table.functionality.components],
        "resources": [n for n, _ in table.resource.components],
        "rows": rows,
    }


def _cmd_build(args) -> int:
    config = _resolve_config(args)
    out = _out_dir(args)
    catalog = catalog_for(config)
    cache = _open_cache(args)
    try:
        lateral, longitudinal = build_relations(config, cache=cache,
                                                catalog=catalog)
    finally:
        if cache is not None:
            cache.close()
    tables = {
        "schema": EXPORT_SCHEMA,
        "kind": "tables",
        "config_digest": config_digest(config),
        "catalog_digest": catalog_digest(catalog),
        "lateral": _table_payload(monotonize(lateral)),
        "longitudinal": _table_payload(monotonize(longitudinal)),
    }
    (out / "tables.json").write_text(
        json.dumps(tables, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    write_manifest(out, command="build", config=config, catalog=catalog,
                   outputs=["tables.json"])
    print(f"lateral table: {len(tables['lateral']['rows'])} rows; "
          f"longitudinal table: {len(tables['longitudinal']['rows'])} rows")
    print(f"wrote {out / 'tables.json'}")
    return 0


def _cmd_solve(args) -> int:
    config = _resolve_config(args)
    out = _out_dir(args)
    cache = _open_cache(args)
    try:
        report = run_query(config, cache=cache)
    finally:
        if cache is not None:
            cache.close()
    outputs = write_front_outputs(report, out)
    write_manifest(out, command="solve", config=config,
                   catalog=report.catalog, outputs=outputs)
    front = report.solution.antichain
    print(f"front: {len(front)} point(s) at query "
          f"{report.config.query_point()}")
    print(f"wrote {', '.join(sorted(outputs))} and manifest.json to {out}")
    if not report.solution.feasible:
        print("query is infeasible: no design meets the demand",
              file=sys.stderr)
        return 2
    return 0


def _cmd_sweep(args) -> int:
    config = _resolve_config(args)
    out = _out_dir(args)
    cache = _open_cache(args)
    try:
        report = run_query(config, cache=cache, tasks=config.task_chain)
    finally:
        if cache is not None:
            cache.close()
    outputs, payload = write_sweep_outputs(report, out)
    write_manifest(out, command="sweep", config=config,
                   catalog=report.catalog, outputs=outputs)
    for inc in payload["inclusions"]:
        state = "holds" if inc["holds"] else \
            f"violated by {len(inc['violations'])} point(s)"
        print(f"task {inc['from_task']} -> {inc['to_task']}: "
              f"upper-set inclusion {state}")
    print(f"wrote {', '.join(sorted(outputs))} and manifest.json to {out}")
    return 0


def _cmd_export(args) -> int:
    out = _out_dir(args)
    projections = None
    if getattr(args, "projection", None):
        projections = _parse_projections(args.projection)
    outputs = regenerate_exports(out, projections)
    print(f"regenerated {', '.join(sorted(outputs))} in {out}")
    return 0


def _add_common(sub, *, cache=True, sweep_flags=True, projection=True):
    sub.add_argument("--config", help="run configuration JSON document")
    sub.add_argument("--out", required=True,
                     help="output directory (created if missing)")
    if cache:
        sub.add_argument("--cache",
                         help="directory holding the simulation cell cache")
    if sweep_flags:
        sub.add_argument("--seed", type=int,
                         help="override the sweep seed")
        sub.add_argument("--runs", type=int,
                         help="override the Monte-Carlo repetitions per cell")
    if projection:
        sub.add_argument(
            "--projection",
            help="2D report planes, e.g. error,effort|cost,error")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="avcodesign",
        description="Monotone co-design of vehicle control stacks")
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser(
        "simulate", help="run the configured sweeps and fill the cache")
    _add_common(sim, projection=False)
    sim.set_defaults(func=_cmd_simulate)

    build = commands.add_parser(
        "build", help="write the monotone implementation tables")
    _add_common(build, projection=False)
    build.set_defaults(func=_cmd_build)

    solve_cmd = commands.add_parser(
        "solve", help="answer the configured design query")
    _add_common(solve_cmd)
    solve_cmd.set_defaults(func=_cmd_solve)

    sweep_cmd = commands.add_parser(
        "sweep", help="solve along the task chain and check monotonicity")
    _add_common(sweep_cmd)
    sweep_cmd.set_defaults(func=_cmd_sweep)

    export = commands.add_parser(
        "export", help="re-render exports from a saved front.json")
    export.add_argument("--out", required=True,
                        help="directory holding front.json")
    export.add_argument(
        "--projection",
        help="2D report planes, e.g. error,effort|cost,error")
    export.set_defaults(func=_cmd_export)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
