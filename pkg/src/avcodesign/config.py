"""Run configuration: one JSON document drives simulation sweeps, diagram
assembly, and queries.

Schema (version 1), all sections optional with shipped defaults:

  task        kind / curvature_level / speed / length of the queried task
  tasks       optional ascending task chain for monotonicity sweeps
  environment w_scale and drop_p coordinates of the query point
  diagram     enabled lateral controller families and the frequency mode
  grids       per-family lists of parameter records; the default reproduces
              the shipped design grids exactly
  noise_grid  v_scale / w_scale / drop_p axes swept when building relations
  sweep       runs, seed, dt, control_every, workers
  catalog     path to a sensor and computer catalog file, null for shipped
  projections pairs of resource coordinates for 2D reporting
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from .designspace import (
    GRID_FAMILIES,
    LATERAL_FAMILIES,
    GridPoint,
    NoiseGrid,
    SweepSettings,
    Task,
    controller_grid,
    grid_point,
)

CONFIG_SCHEMA = 1

FREQUENCY_MODES = ("enforced", "neglected")

DEFAULT_PROJECTIONS = (("error", "effort"), ("cost", "error"))


class ConfigError(ValueError):
    pass


def _default_grids() -> dict[str, tuple[GridPoint, ...]]:
    return {family: controller_grid(family) for family in GRID_FAMILIES}


@dataclass(frozen=True)
class TaskGrid:
    """Mission cells the implementation tables are evaluated over; queries
    are answerable only inside the swept envelope."""

    kinds: tuple[str, ...] = ("ninety_degree_turn",)
    speeds: tuple[float, ...] = (8.0, 15.0)
    curvature_levels: tuple[str, ...] = ("low", "high")
    length: float = 60.0

    def __post_init__(self):
        if not self.kinds or not self.speeds:
            raise ConfigError("task grid needs at least one kind and speed")

    def tasks(self) -> tuple[Task, ...]:
        out: dict[Task, None] = {}
        for kind in self.kinds:
            # a straight path has one curvature regardless of level
            levels = ("low",) if kind == "straight" else self.curvature_levels
            for level in levels:
                for speed in self.speeds:
                    out[Task(kind=kind, curvature_level=level,
                             speed=float(speed), length=self.length)] = None
        return tuple(out)


@dataclass(frozen=True)
class RunConfig:
    """Everything a query run needs, resolved and validated."""

    task: Task = field(default_factory=Task)
    tasks: tuple[Task, ...] = ()
    w_scale: float = 1.0
    drop_p: float = 0.0
    lateral_families: tuple[str, ...] = LATERAL_FAMILIES
    frequency_mode: str = "enforced"
    grids: Mapping[str, tuple[GridPoint, ...]] = field(
        default_factory=_default_grids)
    task_grid: TaskGrid = field(default_factory=TaskGrid)
    noise: NoiseGrid = field(default_factory=NoiseGrid)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    catalog_path: str | None = None
    projections: tuple[tuple[str, str], ...] = DEFAULT_PROJECTIONS

    def __post_init__(self):
        if self.frequency_mode not in FREQUENCY_MODES:
            raise ConfigError(
                f"frequency_mode must be one of {FREQUENCY_MODES}, "
                f"got {self.frequency_mode!r}")
        if not self.lateral_families:
            raise ConfigError("at least one lateral family must be enabled")
        for family in self.lateral_families:
            if family not in LATERAL_FAMILIES:
                raise ConfigError(f"unknown lateral family {family!r}")
        if len(set(self.lateral_families)) != len(self.lateral_families):
            raise ConfigError("duplicate lateral family")
        for family in self.grids:
            if family not in GRID_FAMILIES:
                raise ConfigError(f"grid for unknown family {family!r}")
        # families absent from a partial grids mapping keep their defaults
        merged = _default_grids()
        merged.update({f: tuple(pts) for f, pts in self.grids.items()})
        object.__setattr__(self, "grids", merged)
        for family in (*self.lateral_families, "pid"):
            if not self.grids.get(family):
                raise ConfigError(f"enabled family {family!r} has no grid")
        if not (self.w_scale > 0.0):
            raise ConfigError("w_scale must be positive")
        if not (0.0 <= self.drop_p < 1.0):
            raise ConfigError("drop_p must lie in [0, 1)")
        for pair in self.projections:
            if len(pair) != 2 or pair[0] == pair[1]:
                raise ConfigError(
                    f"projection must name two distinct coordinates: {pair}")

    @property
    def task_chain(self) -> tuple[Task, ...]:
        return self.tasks if self.tasks else (self.task,)

    def build_tasks(self) -> tuple[Task, ...]:
        """Mission cells to simulate: the task grid plus whatever is queried."""
        out: dict[Task, None] = {t: None for t in self.task_grid.tasks()}
        for t in self.task_chain:
            out[t] = None
        return tuple(out)

    def query_point(self, task: Task | None = None) -> tuple[float, ...]:
        """Functionality demanded of the assembled diagram, in the exposed
        coordinate order (speed, curvature, w_scale, drop_p)."""
        t = self.task if task is None else task
        return (t.speed, t.curvature, self.w_scale, self.drop_p)

    def lateral_points(self) -> dict[str, tuple[GridPoint, ...]]:
        return {f: tuple(self.grids[f]) for f in self.lateral_families}

    def longitudinal_points(self) -> tuple[GridPoint, ...]:
        return tuple(self.grids["pid"])


def _task_to_dict(task: Task) -> dict:
    return {
        "kind": task.kind,
        "curvature_level": task.curvature_level,
        "speed": task.speed,
        "length": task.length,
    }


def _task_from_dict(obj: Mapping) -> Task:
    allowed = {"kind", "curvature_level", "speed", "length"}
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"unknown task fields {sorted(extra)}")
    fields = dict(obj)
    for key in ("speed", "length"):
        if key in fields:
            fields[key] = float(fields[key])
    try:
        return Task(**fields)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid task {dict(obj)}: {err}") from err


def config_to_dict(config: RunConfig) -> dict:
    return {
        "schema": CONFIG_SCHEMA,
        "task": _task_to_dict(config.task),
        "tasks": [_task_to_dict(t) for t in config.tasks],
        "environment": {
            "w_scale": config.w_scale,
            "drop_p": config.drop_p,
        },
        "diagram": {
            "lateral_families": list(config.lateral_families),
            "frequency_mode": config.frequency_mode,
        },
        "grids": {
            family: [dict(point.params) for point in points]
            for family, points in sorted(config.grids.items())
        },
        "task_grid": {
            "kinds": list(config.task_grid.kinds),
            "speeds": list(config.task_grid.speeds),
            "curvature_levels": list(config.task_grid.curvature_levels),
            "length": config.task_grid.length,
        },
        "noise_grid": {
            "v_scales": list(config.noise.v_scales),
            "w_scales": list(config.noise.w_scales),
            "drop_ps": list(config.noise.drop_ps),
        },
        "sweep": {
            "runs": config.sweep.runs,
            "seed": config.sweep.seed,
            "dt": config.sweep.dt,
            "control_every": config.sweep.control_every,
            "workers": config.sweep.workers,
        },
        "catalog": config.catalog_path,
        "projections": [list(pair) for pair in config.projections],
    }


def _section(obj: Mapping, name: str, allowed: set[str]) -> dict:
    section = obj.get(name) or {}
    if not isinstance(section, Mapping):
        raise ConfigError(f"section {name!r} must be an object")
    extra = set(section) - allowed
    if extra:
        raise ConfigError(f"unknown {name} fields {sorted(extra)}")
    return dict(section)


def config_from_dict(obj: Mapping) -> RunConfig:
    try:
        return _config_from_dict(obj)
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        # constructor validation and numeric coercion surface as config errors
        raise ConfigError(str(err)) from err


def _config_from_dict(obj: Mapping) -> RunConfig:
    if not isinstance(obj, Mapping):
        raise ConfigError("config must be a JSON object")
    schema = obj.get("schema", CONFIG_SCHEMA)
    if schema != CONFIG_SCHEMA:
        raise ConfigError(f"unsupported config schema {schema!r}")
    known = {"schema", "task", "tasks", "environment", "diagram", "grids",
             "task_grid", "noise_grid", "sweep", "catalog", "projections"}
    extra = set(obj) - known
    if extra:
        raise ConfigError(f"unknown config sections {sorted(extra)}")

    defaults = RunConfig()
    kwargs: dict = {}
    if "task" in obj and obj["task"] is not None:
        kwargs["task"] = _task_from_dict(obj["task"])
    if obj.get("tasks"):
        kwargs["tasks"] = tuple(_task_from_dict(t) for t in obj["tasks"])

    env = _section(obj, "environment", {"w_scale", "drop_p"})
    if "w_scale" in env:
        kwargs["w_scale"] = float(env["w_scale"])
    if "drop_p" in env:
        kwargs["drop_p"] = float(env["drop_p"])

    diagram = _section(obj, "diagram", {"lateral_families", "frequency_mode"})
    if "lateral_families" in diagram:
        kwargs["lateral_families"] = tuple(diagram["lateral_families"])
    if "frequency_mode" in diagram:
        kwargs["frequency_mode"] = diagram["frequency_mode"]

    if obj.get("grids"):
        grids = dict(defaults.grids)
        for family, records in obj["grids"].items():
            if family not in GRID_FAMILIES:
                raise ConfigError(f"grid for unknown family {family!r}")
            grids[family] = tuple(
                grid_point(family, record) for record in records)
        kwargs["grids"] = grids

    tg = _section(obj, "task_grid",
                  {"kinds", "speeds", "curvature_levels", "length"})
    if tg:
        base_tg = TaskGrid()
        kwargs["task_grid"] = TaskGrid(
            kinds=tuple(tg.get("kinds", base_tg.kinds)),
            speeds=tuple(float(s) for s in tg.get("speeds", base_tg.speeds)),
            curvature_levels=tuple(
                tg.get("curvature_levels", base_tg.curvature_levels)),
            length=float(tg.get("length", base_tg.length)))

    noise = _section(obj, "noise_grid", {"v_scales", "w_scales", "drop_ps"})
    if noise:
        base = NoiseGrid()
        kwargs["noise"] = NoiseGrid(
            v_scales=tuple(float(v)
                           for v in noise.get("v_scales", base.v_scales)),
            w_scales=tuple(float(w)
                           for w in noise.get("w_scales", base.w_scales)),
            drop_ps=tuple(float(p)
                          for p in noise.get("drop_ps", base.drop_ps)))

    sweep = _section(obj, "sweep",
                     {"runs", "seed", "dt", "control_every", "workers"})
    if sweep:
        kwargs["sweep"] = replace(SweepSettings(), **sweep)

    if obj.get("catalog") is not None:
        kwargs["catalog_path"] = str(obj["catalog"])

    if obj.get("projections"):
        kwargs["projections"] = tuple(
            tuple(pair) for pair in obj["projections"])

    return RunConfig(**kwargs)


def default_config() -> RunConfig:
    return RunConfig()


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as handle:
        try:
            obj = json.load(handle)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: {err}") from err
    return config_from_dict(obj)


def save_config(config: RunConfig, path) -> None:
    Path(path).write_text(
        json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def config_digest(config: RunConfig) -> str:
    """Stable content hash; identical configs hash identically regardless
    of how they were loaded."""
    canon = json.dumps(config_to_dict(config), sort_keys=True,
                       separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
