"""Query execution and exports: delimited front tables, a full JSON record,
per-projection plot data with staircase boundaries, rendered figures, and a
run manifest.

All writers are deterministic: rows are sorted, floats go through repr, JSON
is emitted with sorted keys, and figures carry no timestamps or software
tags, so rerunning an identical configuration reproduces every output file
byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .assemble import (
    DESIGN_NODES,
    EXPOSED_RESOURCES,
    assemble_diagram,
    build_relations,
    catalog_for,
)
from .catalog import Catalog, catalog_digest
from .config import ConfigError, RunConfig, config_digest
from .designspace import Task, monotonize
from .diagram import Diagram, QuerySolution, solve
from .order import Product, Reals, pareto_min

EXPORT_SCHEMA = 1

_CSV_DESIGN_COLUMNS = ("lateral_control", "lateral_cell",
                       "longitudinal_control", "longitudinal_cell",
                       "sensor", "computer", "vehicle")

_CELL_COORDS = ("speed", "curvature", "v_scale", "w_scale", "drop_p")


class ReportError(ValueError):
    pass


def _package_version() -> str:
    try:
        from importlib.metadata import version
        return version("avcodesign")
    except Exception:
        return "unknown"


def _versions() -> dict:
    import matplotlib
    import numpy
    import scipy
    return {
        "python": sys.version.split()[0],
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
        "avcodesign": _package_version(),
    }


def _split_label(raw):
    """Table rows built from sweeps carry (design label, validated cell)."""
    if isinstance(raw, tuple) and len(raw) == 2 and isinstance(raw[1], tuple):
        return str(raw[0]), tuple(float(x) for x in raw[1])
    return str(raw), None


def _dispersion_index(relation) -> dict:
    names = tuple(n for n, _ in relation.resource.components)
    return {
        (s.label, s.functionality): dict(zip(names, s.dispersion))
        for s in relation.samples
    }


@dataclass(frozen=True)
class QueryReport:
    """One assembled diagram queried at one or more tasks."""

    config: RunConfig
    catalog: Catalog
    diagram: Diagram
    solutions: tuple[QuerySolution, ...]  # parallel to config tasks
    tasks: tuple[Task, ...]
    dispersion: dict  # (design label, cell) -> {resource: standard error}

    @property
    def solution(self) -> QuerySolution:
        return self.solutions[0]


def run_query(config: RunConfig, *, cache=None,
              tasks: tuple[Task, ...] | None = None) -> QueryReport:
    """Build (or reuse cached) tables, assemble, and solve per task."""
    catalog = catalog_for(config)
    lateral, longitudinal = build_relations(config, cache=cache,
                                            catalog=catalog)
    diagram = assemble_diagram(monotonize(lateral), monotonize(longitudinal),
                               catalog, frequency_mode=config.frequency_mode)
    dispersion = _dispersion_index(lateral)
    dispersion.update(_dispersion_index(longitudinal))
    wanted = tuple(tasks) if tasks is not None else (config.task,)
    solutions = tuple(
        solve(diagram, config.query_point(task)) for task in wanted)
    return QueryReport(config=config, catalog=catalog, diagram=diagram,
                       solutions=solutions, tasks=wanted,
                       dispersion=dispersion)


# ---------------------------------------------------------------------------
# Flattening one solution into rows and payloads.


def _choice(report: QueryReport | None, raw_label) -> dict:
    label, cell = _split_label(raw_label)
    out: dict = {"label": label, "cell": list(cell) if cell else None,
                 "dispersion": None}
    if report is not None and cell is not None:
        se = report.dispersion.get((label, cell))
        if se is not None:
            out["dispersion"] = {k: v for k, v in sorted(se.items())}
    return out


def _design_entries(report: QueryReport | None, assignments) -> list[dict]:
    """Per assignment: every design-carrying node's choices, JSON-ready."""
    entries = []
    for asg in assignments:
        entry = {}
        for node in DESIGN_NODES:
            labels = asg.get(node)
            if labels is None:
                continue
            entry[node] = [_choice(report, raw) for raw in labels]
        entries.append(entry)
    entries.sort(key=lambda e: json.dumps(e, sort_keys=True))
    return entries


def front_payload(report: QueryReport,
                  solution: QuerySolution | None = None,
                  task: Task | None = None) -> dict:
    """The complete JSON record of one query's answer."""
    sol = solution if solution is not None else report.solution
    t = task if task is not None else report.tasks[0]
    cfg = report.config
    order = sorted(range(len(sol.antichain.points)),
                   key=lambda i: sol.antichain.points[i])
    points = []
    for i in order:
        res = sol.antichain.points[i]
        points.append({
            "resources": dict(zip(EXPOSED_RESOURCES, res)),
            "designs": _design_entries(report, sol.designs[i]),
        })
    names = tuple(n for _, n in report.diagram.exposed_functionality)
    return {
        "schema": EXPORT_SCHEMA,
        "kind": "front",
        "query": dict(zip(names, cfg.query_point(t))),
        "task": {"kind": t.kind, "curvature_level": t.curvature_level,
                 "speed": t.speed, "length": t.length},
        "functionality": report.diagram.functionality.describe(),
        "resources": report.diagram.resource.describe(),
        "resource_names": list(EXPOSED_RESOURCES),
        "feasible": sol.feasible,
        "iterations": sol.iterations,
        "projections": [list(p) for p in cfg.projections],
        "config_digest": config_digest(cfg),
        "catalog_digest": catalog_digest(report.catalog),
        "seed": cfg.sweep.seed,
        "runs": cfg.sweep.runs,
        "points": points,
    }


def _cell_text(cell) -> str:
    if not cell:
        return ""
    return " ".join(f"{n}={v!r}" for n, v in zip(_CELL_COORDS, cell))


def _labels_text(entries: list[dict], node: str) -> str:
    seen: dict[str, None] = {}
    for entry in entries:
        for choice in entry.get(node, ()):
            seen[choice["label"]] = None
    return ";".join(seen)


def _cells_text(entries: list[dict], node: str) -> str:
    seen: dict[str, None] = {}
    for entry in entries:
        for choice in entry.get(node, ()):
            text = _cell_text(choice["cell"])
            if text:
                seen[text] = None
    return ";".join(seen)


def front_rows(payload: dict) -> list[dict]:
    """Flat view: one row per front point, design labels joined."""
    rows = []
    for point in payload["points"]:
        row = {name: repr(point["resources"][name])
               for name in payload["resource_names"]}
        entries = point["designs"]
        row["lateral_control"] = _labels_text(entries, "lateral_control")
        row["lateral_cell"] = _cells_text(entries, "lateral_control")
        row["longitudinal_control"] = _labels_text(entries,
                                                   "longitudinal_control")
        row["longitudinal_cell"] = _cells_text(entries,
                                               "longitudinal_control")
        for node in ("sensor", "computer", "vehicle"):
            row[node] = _labels_text(entries, node)
        rows.append(row)
    return rows


def write_front_csv(payload: dict, path) -> None:
    columns = tuple(payload["resource_names"]) + _CSV_DESIGN_COLUMNS
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in front_rows(payload):
            writer.writerow(row)


def write_front_json(payload: dict, path) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def load_front(path) -> dict:
    """Read a saved front record and re-validate its antichain."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise ReportError(f"cannot read front record {path}: {err}") from err
    if payload.get("schema") != EXPORT_SCHEMA or \
            payload.get("kind") != "front":
        raise ReportError(f"{path} is not a version-{EXPORT_SCHEMA} "
                          "front record")
    names = payload["resource_names"]
    poset = Product(components=tuple((n, Reals()) for n in names))
    points = [tuple(p["resources"][n] for n in names)
              for p in payload["points"]]
    for i, a in enumerate(points):
        for j, b in enumerate(points):
            if i != j and poset.leq(a, b):
                raise ReportError(
                    f"{path}: stored front is not an antichain "
                    f"(point {i} <= point {j})")
    return payload


# ---------------------------------------------------------------------------
# Projections: plot data and figures.


def staircase(points2d) -> list[tuple[float, float]]:
    """Lower-left boundary of a 2D point cloud as step-plot vertices,
    nonincreasing in y as x grows."""
    if not points2d:
        return []
    plane = Product(components=(("x", Reals()), ("y", Reals())))
    minimal, _ = pareto_min(list(points2d), plane)
    minimal.sort()
    vertices = [minimal[0]]
    for x, y in minimal[1:]:
        vertices.append((x, vertices[-1][1]))
        vertices.append((x, y))
    return vertices


def plot_payload(payload: dict, projection) -> dict:
    x_name, y_name = projection
    names = payload["resource_names"]
    if x_name not in names or y_name not in names:
        raise ReportError(
            f"projection ({x_name}, {y_name}) not among resources {names}")
    pts = [(p["resources"][x_name], p["resources"][y_name])
           for p in payload["points"]]
    return {
        "schema": EXPORT_SCHEMA,
        "kind": "plot-data",
        "x": x_name,
        "y": y_name,
        "points": [list(p) for p in pts],
        "boundary": [list(v) for v in staircase(pts)],
    }


def write_plot_data(plot: dict, path) -> None:
    Path(path).write_text(
        json.dumps(plot, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _pyplot():
    import matplotlib
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt
    return plt


_FIG_KW = {"figsize": (6.0, 4.5), "dpi": 100}
_SAVE_KW = {"metadata": {"Software": None}}  # keep PNG bytes reproducible


def render_front_figure(plot: dict, path, title: str = "") -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(**_FIG_KW)
    if plot["boundary"]:
        xs = [v[0] for v in plot["boundary"]]
        ys = [v[1] for v in plot["boundary"]]
        ax.plot(xs, ys, color="tab:gray", linewidth=1.2, zorder=1)
    if plot["points"]:
        xs = [p[0] for p in plot["points"]]
        ys = [p[1] for p in plot["points"]]
        ax.scatter(xs, ys, color="tab:blue", s=28, zorder=2)
    ax.set_xlabel(plot["x"])
    ax.set_ylabel(plot["y"])
    ax.set_title(title or f"front: {plot['y']} vs {plot['x']}")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_sweep_figure(plots: list[tuple[str, dict]], path,
                        title: str = "") -> None:
    """Overlay several fronts' staircases, one labelled trace per task."""
    plt = _pyplot()
    fig, ax = plt.subplots(**_FIG_KW)
    x_name = y_name = ""
    for label, plot in plots:
        x_name, y_name = plot["x"], plot["y"]
        if plot["boundary"]:
            xs = [v[0] for v in plot["boundary"]]
            ys = [v[1] for v in plot["boundary"]]
            ax.plot(xs, ys, linewidth=1.4, label=label)
        if plot["points"]:
            ax.scatter([p[0] for p in plot["points"]],
                       [p[1] for p in plot["points"]], s=22)
    ax.set_xlabel(x_name)
    ax.set_ylabel(y_name)
    ax.set_title(title or f"fronts: {y_name} vs {x_name}")
    ax.grid(True, alpha=0.3)
    if plots:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Task-chain monotonicity.


def upper_set_violations(front_low, front_high, poset: Product) -> list:
    """Points of the harder task's front that no easier-task point serves.

    With tasks t <= t', every resource answer at t' must dominate some
    answer at t; returns the t' points breaking that inclusion."""
    return [q for q in front_high
            if not any(poset.leq(p, q) for p in front_low)]


def sweep_payload(report: QueryReport) -> dict:
    cfg = report.config
    chain = report.tasks
    for a, b in zip(chain, chain[1:]):
        if not a.leq(b):
            raise ConfigError(
                "sweep tasks must form an ascending chain; "
                f"({a.speed}, {a.curvature_level}) does not precede "
                f"({b.speed}, {b.curvature_level})")
    fronts = [front_payload(report, solution=sol, task=task)
              for task, sol in zip(chain, report.solutions)]
    poset = report.diagram.resource
    inclusions = []
    for i in range(len(chain) - 1):
        low = [tuple(p["resources"][n] for n in EXPOSED_RESOURCES)
               for p in fronts[i]["points"]]
        high = [tuple(p["resources"][n] for n in EXPOSED_RESOURCES)
                for p in fronts[i + 1]["points"]]
        violations = upper_set_violations(low, high, poset)
        inclusions.append({
            "from_task": i,
            "to_task": i + 1,
            "holds": not violations,
            "violations": [dict(zip(EXPOSED_RESOURCES, v))
                           for v in violations],
        })
    return {
        "schema": EXPORT_SCHEMA,
        "kind": "sweep",
        "tasks": [f["task"] for f in fronts],
        "fronts": fronts,
        "inclusions": inclusions,
        "config_digest": config_digest(cfg),
        "catalog_digest": catalog_digest(report.catalog),
        "seed": cfg.sweep.seed,
        "runs": cfg.sweep.runs,
    }


def write_sweep_csv(payload: dict, path) -> None:
    columns = ("task_index", "task_speed", "task_curvature_level") + \
        tuple(EXPOSED_RESOURCES) + _CSV_DESIGN_COLUMNS
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for i, front in enumerate(payload["fronts"]):
            for row in front_rows(front):
                row["task_index"] = i
                row["task_speed"] = repr(front["task"]["speed"])
                row["task_curvature_level"] = front["task"]["curvature_level"]
                writer.writerow(row)


# ---------------------------------------------------------------------------
# Output directories and the manifest.


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest_doc(out: Path, *, command: str, config_hash: str,
                        catalog_hash: str, seed: int, runs: int,
                        outputs) -> Path:
    manifest = {
        "schema": EXPORT_SCHEMA,
        "kind": "manifest",
        "command": command,
        "config_digest": config_hash,
        "catalog_digest": catalog_hash,
        "seed": seed,
        "runs": runs,
        "versions": _versions(),
        "outputs": {name: _sha256_file(out / name)
                    for name in sorted(outputs)},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def write_manifest(out_dir, *, command: str, config: RunConfig,
                   catalog: Catalog, outputs: list[str]) -> Path:
    """Written last: records digests of the config, catalog, and every
    produced file, plus library versions. No timestamps."""
    return _write_manifest_doc(Path(out_dir), command=command,
                               config_hash=config_digest(config),
                               catalog_hash=catalog_digest(catalog),
                               seed=config.sweep.seed,
                               runs=config.sweep.runs,
                               outputs=outputs)


def _projection_stem(projection) -> str:
    return f"{projection[0]}_{projection[1]}"


def write_front_outputs(report: QueryReport, out_dir,
                        projections=None) -> list[str]:
    """front.json, front.csv, per-projection plot data and figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    projections = tuple(projections) if projections is not None \
        else report.config.projections
    payload = front_payload(report)
    outputs = []
    write_front_json(payload, out / "front.json")
    outputs.append("front.json")
    write_front_csv(payload, out / "front.csv")
    outputs.append("front.csv")
    outputs += _write_projection_outputs(payload, out, projections)
    return outputs


def _write_projection_outputs(payload: dict, out: Path,
                              projections) -> list[str]:
    outputs = []
    for projection in projections:
        stem = _projection_stem(projection)
        plot = plot_payload(payload, projection)
        write_plot_data(plot, out / f"plotdata_{stem}.json")
        outputs.append(f"plotdata_{stem}.json")
        query = payload.get("query", {})
        title = f"{plot['y']} vs {plot['x']} @ " + " ".join(
            f"{k}={v}" for k, v in query.items())
        render_front_figure(plot, out / f"front_{stem}.png", title)
        outputs.append(f"front_{stem}.png")
    return outputs


def write_sweep_outputs(report: QueryReport, out_dir,
                        projections=None) -> tuple[list[str], dict]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    projections = tuple(projections) if projections is not None \
        else report.config.projections
    payload = sweep_payload(report)
    outputs = []
    Path(out / "sweep.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    outputs.append("sweep.json")
    write_sweep_csv(payload, out / "sweep.csv")
    outputs.append("sweep.csv")
    for projection in projections:
        stem = _projection_stem(projection)
        plots = []
        for front in payload["fronts"]:
            task = front["task"]
            label = f"v={task['speed']} {task['curvature_level']}"
            plots.append((label, plot_payload(front, projection)))
        render_sweep_figure(plots, out / f"sweep_{stem}.png")
        outputs.append(f"sweep_{stem}.png")
    return outputs, payload


def regenerate_exports(out_dir, projections=None) -> list[str]:
    """Rebuild the derived files from a directory's front.json.

    The manifest is rewritten to cover every file in the directory, so it
    stays an accurate inventory after projections are added or changed.
    """
    out = Path(out_dir)
    payload = load_front(out / "front.json")
    if projections is None:
        projections = [tuple(p) for p in payload.get("projections", [])]
    outputs = []
    write_front_csv(payload, out / "front.csv")
    outputs.append("front.csv")
    outputs += _write_projection_outputs(payload, out, projections)
    present = sorted(p.name for p in out.iterdir()
                     if p.is_file() and p.name != "manifest.json")
    _write_manifest_doc(out, command="export",
                        config_hash=payload["config_digest"],
                        catalog_hash=payload["catalog_digest"],
                        seed=payload["seed"], runs=payload["runs"],
                        outputs=present)
    return outputs
