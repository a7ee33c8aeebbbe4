"""Empirical construction of controller design interfaces.

A controller family becomes a finite monotone interface in three moves:
sweep its parameter grid over tasks and nuisance severities in closed loop,
record the per-cell aggregate metrics as resource points, and close the
relation upward so that demanding less never costs more.

Functionality coordinates are plain reals where larger means harder to
serve: target speed and peak curvature describe the task, and v_scale,
w_scale, drop_p give the noise severities the loop must tolerate. A design
measured at measurement scale 16 also answers demands at scale 4; the
metrics measured at 16 are then a conservative bound, and the upward closure
lets the cheaper scale-4 row win wherever it exists.

Resource coordinates per design: the tracking error and actuation effort
integrals, that actuator's share of ride discomfort, the observation rate
the loop consumes, and the compute throughput it needs.
"""

from __future__ import annotations

import itertools
import json
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .catalog import computation_model
from .controllers import (LqrParams, NmpcParams, PidParams,
                          PurePursuitParams, StanleyParams)
from .mdpi import AdderMdpi, TableMdpi
from .order import Poset, Product, Reals
from .paths import PATH_KINDS, PathSpec, make_path
from .simulate import (COMFORT_ACCEL_WEIGHT, ControllerSpec, SimConfig,
                       run_closed_loop)
from .vehicle import NoiseSpec, VehicleParams

GRID_FAMILIES = ("pure_pursuit", "stanley", "lqr", "nmpc", "pid")
LATERAL_FAMILIES = ("pure_pursuit", "stanley", "lqr", "nmpc")

CURVATURE_LEVELS = {"low": 0.05, "high": 0.125}
DEFAULT_SPEEDS = (8.0, 15.0)

FUNCTIONALITY_COORDS = ("speed", "curvature", "v_scale", "w_scale", "drop_p")
LATERAL_RESOURCES = ("error", "effort", "discomfort", "frequency",
                     "computation")
LONGITUDINAL_RESOURCES = ("speed_error", "speed_effort", "discomfort",
                          "frequency", "computation")

# scale 1.0 of the nuisance severities
BASE_PROCESS_COV = np.diag([1e-6, 1e-6, 1e-6, 1e-6, 1e-5])
BASE_MEASUREMENT_COV = np.diag([0.01, 0.01, 0.0025, 0.0025, 0.04])

# closing the other loop while one family is swept
NOMINAL_PID_GAINS = {"k_p": 1.0, "k_i": 0.1, "k_d": 0.01}
NOMINAL_LATERAL_GAIN = 0.5  # stanley

PP_LOOKAHEADS = (0.01, 0.05, 0.5, 1.0, 2.0)
STANLEY_GAINS = (0.05, 0.1, 0.5, 1.0, 1.5, 2.0)
LQR_R_OPTIONS = (0.001, 0.05, 0.5, 1.0, 10.0)
# three isotropic state weights and three that de-weight heading ten to one
LQR_Q_OPTIONS = (
    ("0.1*I", ((0.1, 0.0), (0.0, 0.1))),
    ("1.0*I", ((1.0, 0.0), (0.0, 1.0))),
    ("10.0*I", ((10.0, 0.0), (0.0, 10.0))),
    ("0.2*diag(1,0.1)", ((0.2, 0.0), (0.0, 0.02))),
    ("1.0*diag(1,0.1)", ((1.0, 0.0), (0.0, 0.1))),
    ("5.0*diag(1,0.1)", ((5.0, 0.0), (0.0, 0.5))),
)
NMPC_HORIZONS = (10, 15, 20, 25)
NMPC_R_OPTIONS = (0.05, 0.5, 1.0, 5.0)
NMPC_Q_SCALES = (0.01, 0.1, 1.0, 10.0)
PID_KP = (0.1, 0.5, 1.0, 2.0)
PID_KI = (0.01, 0.1, 0.5, 1.0)
PID_KD = (0.01, 0.05, 0.1, 1.0)

_SPEED_CAP = VehicleParams().v_max


@dataclass(frozen=True)
class Task:
    """One mission point: path shape, curvature severity, target speed.

    Tasks order by the product of (speed, peak curvature); a faster and
    sharper mission demands at least as much from every component.
    """

    kind: str = "ninety_degree_turn"
    curvature_level: str = "low"
    speed: float = 8.0
    length: float = 60.0

    def __post_init__(self):
        if self.kind not in PATH_KINDS:
            raise ValueError(f"unknown path kind {self.kind!r}")
        if self.kind != "straight" and self.curvature_level not in CURVATURE_LEVELS:
            raise ValueError(f"unknown curvature level {self.curvature_level!r}")
        if not 0.0 < self.speed <= _SPEED_CAP:
            raise ValueError(
                f"target speed must lie in (0, {_SPEED_CAP}] m/s")
        if self.length <= 0:
            raise ValueError("path length must be positive")

    @property
    def curvature(self) -> float:
        if self.kind == "straight":
            return 0.0
        return CURVATURE_LEVELS[self.curvature_level]

    def path(self, wheelbase: float = 2.7,
             max_steering: float = 0.6) -> PathSpec:
        return make_path(self.kind, self.curvature, self.length,
                         wheelbase, max_steering)

    def demand(self) -> tuple[float, float]:
        return (self.speed, self.curvature)

    def leq(self, other: "Task") -> bool:
        return self.speed <= other.speed and self.curvature <= other.curvature


@dataclass(frozen=True)
class NoiseGrid:
    """Severity levels swept when building an interface."""

    v_scales: tuple = (1.0, 4.0, 16.0)
    w_scales: tuple = (1.0, 4.0, 16.0)
    drop_ps: tuple = (0.0, 0.1, 0.3)

    def cells(self) -> Iterable[tuple[float, float, float]]:
        return itertools.product(self.v_scales, self.w_scales, self.drop_ps)


def noise_for(v_scale: float, w_scale: float, drop_p: float,
              seed: int) -> NoiseSpec:
    """Severity multipliers applied to the base covariances."""
    return NoiseSpec(W=w_scale * BASE_PROCESS_COV,
                     V=v_scale * BASE_MEASUREMENT_COV,
                     drop_probability=drop_p, seed=seed)


# ---------------------------------------------------------------------------
# Parameter grids.


@dataclass(frozen=True)
class GridPoint:
    """One swept design: family plus canonical parameter pairs (matrices as
    nested tuples, so the point hashes and serializes)."""

    family: str
    label: str
    params: tuple

    def controller(self, v_t: float | None = None):
        return controller_params_from(self.family, dict(self.params), v_t)


def controller_params_from(family: str, params: Mapping,
                           v_t: float | None = None):
    if family == "stanley":
        return StanleyParams(g=params["g"])
    if family == "pure_pursuit":
        return PurePursuitParams(L=params["L"])
    if family == "lqr":
        return LqrParams(Q=np.array(params["Q"], dtype=float), R=params["R"])
    if family == "nmpc":
        return NmpcParams(Q=np.array(params["Q"], dtype=float),
                          R=params["R"], n_h=int(params["n_h"]))
    if family == "pid":
        if v_t is None:
            raise ValueError("longitudinal gains need the target speed")
        return PidParams(k_p=params["k_p"], k_i=params["k_i"],
                         k_d=params["k_d"], v_t=v_t)
    raise ValueError(f"unknown controller family {family!r}")


def _weight_name(q) -> str:
    """Readable tag for a 2x2 state weight; named options keep their names."""
    for name, option in LQR_Q_OPTIONS:
        if option == q:
            return name
    (a, b), (c, d) = q
    if b == c == 0.0 and a == d:
        return f"{a}*I"
    return f"[[{a},{b}],[{c},{d}]]"


def label_for(family: str, params: Mapping) -> str:
    """Canonical design label; config-supplied grids and the shipped ones
    produce identical labels for identical parameters."""
    if family == "pure_pursuit":
        return f"pure_pursuit L={params['L']}"
    if family == "stanley":
        return f"stanley g={params['g']}"
    if family == "lqr":
        return f"lqr Q={_weight_name(params['Q'])} R={params['R']}"
    if family == "nmpc":
        return f"nmpc n_h={params['n_h']} R={params['R']}" \
               f" Q={_weight_name(params['Q'])}"
    if family == "pid":
        return f"pid k_p={params['k_p']} k_i={params['k_i']}" \
               f" k_d={params['k_d']}"
    raise ValueError(f"unknown controller family {family!r}")


def _freeze(value):
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    return value


def grid_point(family: str, params: Mapping) -> GridPoint:
    """A labelled design from raw parameter values (matrices may arrive as
    nested lists, e.g. out of a JSON config)."""
    frozen = tuple(sorted((str(k), _freeze(v)) for k, v in params.items()))
    return GridPoint(family, label_for(family, dict(frozen)), frozen)


def controller_grid(family: str) -> tuple[GridPoint, ...]:
    """The shipped parameter grid of a family, one labelled point each."""
    if family == "pure_pursuit":
        return tuple(grid_point(family, {"L": L}) for L in PP_LOOKAHEADS)
    if family == "stanley":
        return tuple(grid_point(family, {"g": g}) for g in STANLEY_GAINS)
    if family == "lqr":
        return tuple(
            grid_point(family, {"Q": q, "R": R})
            for _, q in LQR_Q_OPTIONS for R in LQR_R_OPTIONS)
    if family == "nmpc":
        return tuple(
            grid_point(family, {"Q": ((q, 0.0), (0.0, q)), "R": R, "n_h": n})
            for n in NMPC_HORIZONS
            for R in NMPC_R_OPTIONS
            for q in NMPC_Q_SCALES)
    if family == "pid":
        return tuple(
            grid_point(family, {"k_p": p, "k_i": i, "k_d": d})
            for p in PID_KP for i in PID_KI for d in PID_KD)
    raise ValueError(f"unknown controller family {family!r}")


def functionality_poset() -> Product:
    return Product(components=tuple(
        (name, Reals()) for name in FUNCTIONALITY_COORDS))


def resource_poset(family: str) -> Product:
    names = LONGITUDINAL_RESOURCES if family == "pid" else LATERAL_RESOURCES
    return Product(components=tuple((name, Reals()) for name in names))


def snap(value: float) -> float:
    """Round onto a 1e-3 relative grid (four significant digits) so equal
    outcomes compare exactly inside antichains."""
    if value == 0.0 or not math.isfinite(value):
        return value
    quantum = 10.0 ** (math.floor(math.log10(abs(value))) - 3)
    return round(value / quantum) * quantum


# ---------------------------------------------------------------------------
# Empirical relations and their monotone closure.


@dataclass(frozen=True)
class RelationSample:
    functionality: tuple
    resource: tuple
    label: str
    dispersion: tuple


@dataclass(frozen=True)
class EmpiricalRelation:
    """Raw sweep outcomes: what each labelled design delivered at each
    functionality cell, with the Monte-Carlo standard errors kept for
    reporting."""

    functionality: Poset
    resource: Poset
    samples: tuple

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        for s in self.samples:
            self.functionality.validate(s.functionality)
            self.resource.validate(s.resource)

    def labels(self) -> tuple:
        seen = []
        for s in self.samples:
            if s.label not in seen:
                seen.append(s.label)
        return tuple(seen)

    def filter(self, labels) -> "EmpiricalRelation":
        wanted = set(labels)
        return EmpiricalRelation(
            self.functionality, self.resource,
            tuple(s for s in self.samples if s.label in wanted))


def merge_relations(relations: Iterable[EmpiricalRelation]) -> EmpiricalRelation:
    """Concatenate relations that share both posets (e.g. several lateral
    families feeding one implementation table)."""
    relations = tuple(relations)
    if not relations:
        raise ValueError("nothing to merge")
    first = relations[0]
    samples = []
    for rel in relations:
        if rel.functionality != first.functionality \
                or rel.resource != first.resource:
            raise ValueError("relations live on different posets")
        samples.extend(rel.samples)
    return EmpiricalRelation(first.functionality, first.resource,
                             tuple(samples))


def monotonize(rel: EmpiricalRelation) -> TableMdpi:
    """Wrap a relation as a finite implementation table whose response is
    the Pareto floor over every sample at least as capable as the demand.

    Rows that another sample at the same cell renders redundant (resources
    dominated, not tied) are pruned. The closure repairs the statistical
    wiggles Monte-Carlo estimates leave in raw data, and applying it twice
    changes nothing.
    """
    deduped = []
    seen = set()
    for s in rel.samples:
        key = (s.label, s.functionality)
        if key in seen:
            continue  # first record of a (label, cell) pair wins
        seen.add(key)
        deduped.append((key, s))
    by_cell: dict = {}
    for _, s in deduped:
        by_cell.setdefault(s.functionality, []).append(s)
    rows = []
    for key, s in deduped:
        beaten = any(
            other.resource != s.resource
            and rel.resource.leq(other.resource, s.resource)
            for other in by_cell[s.functionality])
        if not beaten:
            rows.append((key, s.functionality, s.resource))
    return TableMdpi(functionality=rel.functionality, resource=rel.resource,
                     rows=tuple(rows))


def relation_of(table: TableMdpi) -> EmpiricalRelation:
    """View a monotonized table as a dispersion-free relation; row keys made
    by monotonize unwrap back to their design label."""
    samples = []
    for lab, p, r in table.rows:
        design = lab[0] if isinstance(lab, tuple) and len(lab) == 2 else lab
        width = len(r) if isinstance(r, tuple) else 1
        samples.append(RelationSample(p, r, design, (0.0,) * width))
    return EmpiricalRelation(table.functionality, table.resource,
                             tuple(samples))


# ---------------------------------------------------------------------------
# Sweeps.


@dataclass(frozen=True)
class SweepSettings:
    """Knobs of a Monte-Carlo sweep; worker counts above one fan the grid
    cells out over processes."""

    runs: int = 100
    seed: int = 0
    dt: float = 0.01
    control_every: int = 2
    workers: int = 0

    @property
    def frequency(self) -> float:
        return 1.0 / (self.dt * self.control_every)


def cell_seed(global_seed: int, point: GridPoint, task: Task) -> int:
    """Per-cell base seed, derived from content rather than position so a
    resumed or reordered sweep reproduces the same draws. Noise scales stay
    out on purpose: cells that differ only in severity share their noise
    streams, which turns the severity sweeps into paired comparisons."""
    text = f"{point.family}|{point.label}|{task.kind}|" \
           f"{task.curvature_level}|{task.speed!r}|{task.length!r}"
    return (int(global_seed) << 32) | zlib.crc32(text.encode())


def _cell_payload(point: GridPoint, task: Task, v: float, w: float,
                  p: float, seed: int, settings: SweepSettings) -> tuple:
    return (point.family, point.params,
            (task.kind, task.curvature_level, task.speed, task.length),
            v, w, p, seed, settings.runs, settings.dt,
            settings.control_every)


def _run_cell(payload: tuple) -> dict:
    """One grid cell: close the loop, average the repetitions. Module level
    so process pools can ship it."""
    (family, params, task_fields, v, w, p, seed, runs, dt,
     control_every) = payload
    task = Task(*task_fields)
    path = task.path()
    noise = noise_for(v, w, p, seed)
    config = SimConfig(dt=dt, control_every=control_every, runs=runs)
    gains = dict(params)
    if family == "pid":
        lateral = ControllerSpec(
            "stanley", StanleyParams(g=NOMINAL_LATERAL_GAIN))
        pid = controller_params_from("pid", gains, v_t=task.speed)
    else:
        lateral = ControllerSpec(
            family, controller_params_from(family, gains))
        pid = PidParams(**NOMINAL_PID_GAINS, v_t=task.speed)
    return run_closed_loop(lateral, pid, path, noise, config).as_dict()


def _sample_from(family: str, outcome: Mapping, task: Task, v: float,
                 w: float, p: float, label: str, frequency: float,
                 computation: float) -> RelationSample | None:
    if outcome["runs"] == 0:
        return None
    if family == "pid":
        fields = ("speed_err_tot", "accel_tot")
        weight = COMFORT_ACCEL_WEIGHT
    else:
        fields = ("e_p_tot", "delta_tot")
        weight = 1.0
    err, eff = (outcome[f] for f in fields)
    comfort_src = outcome["accel_tot" if family == "pid" else "steer_rate_tot"]
    if any(not math.isfinite(x) for x in (err, eff, comfort_src)):
        return None
    resource = (snap(err), snap(eff), snap(weight * comfort_src),
                frequency, computation)
    disp = (snap(outcome["se_" + fields[0]]),
            snap(outcome["se_" + fields[1]]),
            snap(weight * outcome[
                "se_" + ("accel_tot" if family == "pid" else "steer_rate_tot")]),
            0.0, 0.0)
    return RelationSample((task.speed, task.curvature, v, w, p),
                          resource, label, disp)


def build_controller_relation(family: str, tasks: Iterable[Task],
                              noise: NoiseGrid, settings: SweepSettings,
                              *, points: Iterable[GridPoint] | None = None,
                              cache=None, costs=None) -> EmpiricalRelation:
    """Sweep a family's grid over tasks and severities in closed loop.

    Cells already present in the cache are not rerun; finished cells are
    written back so an interrupted sweep resumes. Cells whose repetitions
    all failed simply drop out of the relation.
    """
    points = controller_grid(family) if points is None else tuple(points)
    for point in points:
        if point.family != family:
            raise ValueError(
                f"grid point {point.label!r} is not from family {family!r}")
    tasks = tuple(tasks)
    cells = []
    for point in points:
        for task in tasks:
            seed = cell_seed(settings.seed, point, task)
            for v, w, p in noise.cells():
                cells.append((point, task, v, w, p, seed))

    results: dict[int, Mapping] = {}
    missing = []
    for idx, (point, task, v, w, p, seed) in enumerate(cells):
        cached = None
        if cache is not None:
            cached = cache.get(sweep_key(point, task, v, w, p, settings, seed))
        if cached is not None:
            results[idx] = cached
        else:
            missing.append(idx)

    if settings.workers > 1 and missing:
        payloads = [_cell_payload(*cells[i][:5], cells[i][5], settings)
                    for i in missing]
        with ProcessPoolExecutor(max_workers=settings.workers) as pool:
            outcomes = list(pool.map(_run_cell, payloads))
    else:
        outcomes = [_run_cell(_cell_payload(*cells[i][:5], cells[i][5],
                                            settings))
                    for i in missing]
    for idx, outcome in zip(missing, outcomes):
        results[idx] = outcome
        if cache is not None:
            point, task, v, w, p, seed = cells[idx]
            cache.put(sweep_key(point, task, v, w, p, settings, seed),
                      outcome)

    samples = []
    for idx, (point, task, v, w, p, seed) in enumerate(cells):
        computation = computation_model(family, dict(point.params),
                                        settings.frequency, costs)
        sample = _sample_from(family, results[idx], task, v, w, p,
                              point.label, settings.frequency, computation)
        if sample is not None:
            samples.append(sample)
    return EmpiricalRelation(functionality_poset(), resource_poset(family),
                             tuple(samples))


def sweep_key(point: GridPoint, task: Task, v: float, w: float, p: float,
              settings: SweepSettings, seed: int) -> tuple:
    """Canonical cache key for one cell, aligned with cache.KEY_FIELDS."""
    return (point.family, point.label, json.dumps(point.params),
            task.kind, task.curvature_level, repr(task.speed),
            repr(task.length), repr(float(v)), repr(float(w)),
            repr(float(p)), str(settings.runs), str(seed),
            repr(settings.dt), str(settings.control_every))


def build_controller_mdpi(family: str, tasks: Iterable[Task],
                          noise: NoiseGrid, settings: SweepSettings,
                          *, points: Iterable[GridPoint] | None = None,
                          cache=None, costs=None) -> TableMdpi:
    """Monotone interface of a controller family over the given grids."""
    return monotonize(build_controller_relation(
        family, tasks, noise, settings, points=points, cache=cache,
        costs=costs))


# ---------------------------------------------------------------------------
# Boundary evaluation nodes.


def constant_node(name: str, value: float) -> TableMdpi:
    """Zero-input stub that requires a fixed value; stands in for resource
    coordinates whose model is deferred."""
    return TableMdpi(functionality=Product(components=()),
                     resource=Product(components=((name, Reals()),)),
                     rows=(("fixed", (), (float(value),)),))


def adder_block(port_names: Iterable[str], total_name: str):
    """Total over the named inputs; an empty input set pins the total at 0."""
    names = tuple(port_names)
    if not names:
        return constant_node(total_name, 0.0)
    return AdderMdpi(names, total_name)


def evaluation_blocks() -> dict:
    """The platform boundary: sums over component resources, identity
    pass-throughs for the per-loop metrics, and a fixed danger stub pending
    a braking model."""
    return {
        "cost": adder_block(("sensor", "computer"), "cost"),
        "power": adder_block(("sensor", "computer"), "power"),
        "mass": adder_block(("sensor", "computer"), "mass"),
        "computation": adder_block(("lateral", "longitudinal"),
                                   "computation"),
        "error": adder_block(("lateral",), "error"),
        "effort": adder_block(("lateral",), "effort"),
        "speed_error": adder_block(("longitudinal",), "speed_error"),
        "speed_effort": adder_block(("longitudinal",), "speed_effort"),
        "discomfort": adder_block(("lateral", "longitudinal"), "discomfort"),
        "danger": constant_node("danger", 0.0),
    }
