"""Wire controller interfaces, platform components, and evaluation sums into
one queryable co-design diagram.

Node inventory and demand flow:

  mission_speed / mission_curvature / mission_w_scale / mission_drop
      single-port pass-through adders; the query enters on their
      functionality ports and the totals broadcast to every consumer
  lateral_control, longitudinal_control
      empirical implementation tables built by the design-space sweep
  vehicle
      the physical platform: provides the speed and curvature envelopes the
      mission demands, requires the (stubbed) danger budget
  sensor
      one catalog choice providing a measurement stream at some maximum
      frequency; its imposed measurement-noise scale is a requirement the
      controllers must have been validated against
  computer
      one catalog choice providing compute capacity, requiring cost, power
      and mass
  lateral_implementation, longitudinal_implementation
      per-loop deployment stage forwarding each controller's computation
      demand; the conversion rate from loop frequency to operations per
      second is already folded into the tables by the sweep
  computation
      sums both implementation demands and asks the computer for capacity
  error, effort, speed_error, speed_effort, discomfort, cost, power, mass,
  danger
      evaluation boundary; every exposed resource is one of these totals

The frequency mode decides whether the controllers' loop-frequency
requirement is wired into the sensor's maximum frequency ("enforced") or
left unconnected ("neglected").
"""

from __future__ import annotations

import math

from .catalog import Catalog, CatalogError, default_catalog, load_catalog
from .config import RunConfig
from .designspace import (
    FUNCTIONALITY_COORDS,
    LATERAL_RESOURCES,
    LONGITUDINAL_RESOURCES,
    adder_block,
    build_controller_relation,
    merge_relations,
    monotonize,
)
from .diagram import Diagram, DiagramError, Edge, Port
from .mdpi import AdderMdpi, TableMdpi
from .order import Product, Reals
from .vehicle import VehicleParams

EXPOSED_FUNCTIONALITY = ("speed", "curvature", "w_scale", "drop_p")
EXPOSED_RESOURCES = ("error", "effort", "speed_error", "speed_effort",
                     "discomfort", "cost", "power", "mass", "danger")

# design-carrying nodes, in report order
DESIGN_NODES = ("lateral_control", "longitudinal_control", "sensor",
                "computer", "vehicle")


def _reals_product(names) -> Product:
    return Product(components=tuple((n, Reals()) for n in names))


def sensor_node(catalog: Catalog) -> TableMdpi:
    """Perception stage: one catalog sensor serving both control loops.

    The simulator observes the full state through a single measurement
    stream, so the perception choice collapses to one device."""
    rows = tuple(
        (s.name, (s.max_frequency,), (s.v_scale, s.cost, s.power, s.mass))
        for s in catalog.sensors)
    return TableMdpi(
        functionality=_reals_product(("frequency",)),
        resource=_reals_product(("imposed_v_scale", "cost", "power", "mass")),
        rows=rows)


def computer_node(catalog: Catalog) -> TableMdpi:
    rows = tuple(
        (c.name, (c.compute_capacity,), (c.cost, c.power, c.mass))
        for c in catalog.computers)
    return TableMdpi(
        functionality=_reals_product(("capacity",)),
        resource=_reals_product(("cost", "power", "mass")),
        rows=rows)


def vehicle_node(params: VehicleParams | None = None) -> TableMdpi:
    """Platform envelopes: top speed and the curvature reachable at full
    steering lock. Danger is a fixed stub until a collision model exists."""
    p = params if params is not None else VehicleParams()
    curvature_env = math.tan(p.delta_max) / p.wheelbase
    return TableMdpi(
        functionality=_reals_product(("speed_env", "curvature_env")),
        resource=_reals_product(("danger",)),
        rows=(("standard_platform", (p.v_max, curvature_env), (0.0,)),))


def _check_table(name: str, table: TableMdpi, fun_names, res_names) -> None:
    got_fun = tuple(n for n, _ in table.functionality.components)
    got_res = tuple(n for n, _ in table.resource.components)
    if got_fun != tuple(fun_names):
        raise DiagramError(
            f"{name}: functionality ports {got_fun} != {tuple(fun_names)}")
    if got_res != tuple(res_names):
        raise DiagramError(
            f"{name}: resource ports {got_res} != {tuple(res_names)}")


def assemble_diagram(lateral: TableMdpi, longitudinal: TableMdpi,
                     catalog: Catalog, *, frequency_mode: str = "enforced",
                     vehicle: VehicleParams | None = None) -> Diagram:
    """The full co-design diagram over prebuilt controller tables."""
    if frequency_mode not in ("enforced", "neglected"):
        raise DiagramError(f"unknown frequency mode {frequency_mode!r}")
    _check_table("lateral_control", lateral,
                 FUNCTIONALITY_COORDS, LATERAL_RESOURCES)
    _check_table("longitudinal_control", longitudinal,
                 FUNCTIONALITY_COORDS, LONGITUDINAL_RESOURCES)

    nodes = {
        "mission_speed": AdderMdpi(("speed",), "speed"),
        "mission_curvature": AdderMdpi(("curvature",), "curvature"),
        "mission_w_scale": AdderMdpi(("w_scale",), "w_scale"),
        "mission_drop": AdderMdpi(("drop_p",), "drop_p"),
        "lateral_control": lateral,
        "longitudinal_control": longitudinal,
        "vehicle": vehicle_node(vehicle),
        "sensor": sensor_node(catalog),
        "computer": computer_node(catalog),
        "lateral_implementation": AdderMdpi(("computation",), "computation"),
        "longitudinal_implementation": AdderMdpi(("computation",),
                                                 "computation"),
        "computation": adder_block(("lateral", "longitudinal"),
                                   "computation"),
        "error": adder_block(("lateral",), "error"),
        "effort": adder_block(("lateral",), "effort"),
        "speed_error": adder_block(("longitudinal",), "speed_error"),
        "speed_effort": adder_block(("longitudinal",), "speed_effort"),
        "discomfort": adder_block(("lateral", "longitudinal"), "discomfort"),
        "cost": adder_block(("sensor", "computer"), "cost"),
        "power": adder_block(("sensor", "computer"), "power"),
        "mass": adder_block(("sensor", "computer"), "mass"),
        "danger": adder_block(("vehicle",), "danger"),
    }

    def edge(src_node, src_comp, dst_node, dst_comp):
        return Edge(Port(src_node, src_comp), Port(dst_node, dst_comp))

    edges = [
        # mission broadcast
        edge("mission_speed", "speed", "lateral_control", "speed"),
        edge("mission_speed", "speed", "longitudinal_control", "speed"),
        edge("mission_speed", "speed", "vehicle", "speed_env"),
        edge("mission_curvature", "curvature", "lateral_control",
             "curvature"),
        edge("mission_curvature", "curvature", "longitudinal_control",
             "curvature"),
        edge("mission_curvature", "curvature", "vehicle", "curvature_env"),
        edge("mission_w_scale", "w_scale", "lateral_control", "w_scale"),
        edge("mission_w_scale", "w_scale", "longitudinal_control",
             "w_scale"),
        edge("mission_drop", "drop_p", "lateral_control", "drop_p"),
        edge("mission_drop", "drop_p", "longitudinal_control", "drop_p"),
        # the chosen sensor imposes its noise scale on both loops
        edge("sensor", "imposed_v_scale", "lateral_control", "v_scale"),
        edge("sensor", "imposed_v_scale", "longitudinal_control", "v_scale"),
        # deployment: controller computation through the implementation
        # stage into the computer's capacity
        edge("lateral_control", "computation", "lateral_implementation",
             "computation"),
        edge("longitudinal_control", "computation",
             "longitudinal_implementation", "computation"),
        edge("lateral_implementation", "computation", "computation",
             "lateral"),
        edge("longitudinal_implementation", "computation", "computation",
             "longitudinal"),
        edge("computation", "computation", "computer", "capacity"),
        # evaluation sums
        edge("lateral_control", "error", "error", "lateral"),
        edge("lateral_control", "effort", "effort", "lateral"),
        edge("longitudinal_control", "speed_error", "speed_error",
             "longitudinal"),
        edge("longitudinal_control", "speed_effort", "speed_effort",
             "longitudinal"),
        edge("lateral_control", "discomfort", "discomfort", "lateral"),
        edge("longitudinal_control", "discomfort", "discomfort",
             "longitudinal"),
        edge("sensor", "cost", "cost", "sensor"),
        edge("computer", "cost", "cost", "computer"),
        edge("sensor", "power", "power", "sensor"),
        edge("computer", "power", "power", "computer"),
        edge("sensor", "mass", "mass", "sensor"),
        edge("computer", "mass", "mass", "computer"),
        edge("vehicle", "danger", "danger", "vehicle"),
    ]
    if frequency_mode == "enforced":
        edges.append(edge("lateral_control", "frequency", "sensor",
                          "frequency"))
        edges.append(edge("longitudinal_control", "frequency", "sensor",
                          "frequency"))

    exposed_functionality = tuple(
        (Port(f"mission_{'drop' if name == 'drop_p' else name}", name), name)
        for name in EXPOSED_FUNCTIONALITY)
    exposed_resources = tuple(
        (Port(name, name), name) for name in EXPOSED_RESOURCES)

    return Diagram(nodes=nodes, edges=tuple(edges),
                   exposed_functionality=exposed_functionality,
                   exposed_resources=exposed_resources)


def catalog_for(config: RunConfig) -> Catalog:
    if config.catalog_path is None:
        return default_catalog()
    try:
        return load_catalog(config.catalog_path)
    except OSError as err:
        raise CatalogError(
            f"cannot read catalog {config.catalog_path!r}: {err}") from err


def build_lateral_relation(config: RunConfig, *, cache=None,
                           catalog: Catalog | None = None):
    """Raw sweep outcomes of every enabled lateral family, merged."""
    cat = catalog if catalog is not None else catalog_for(config)
    return merge_relations(
        build_controller_relation(
            family, config.build_tasks(), config.noise, config.sweep,
            points=config.grids[family], cache=cache,
            costs=cat.per_step_cost)
        for family in config.lateral_families)


def build_longitudinal_relation(config: RunConfig, *, cache=None,
                                catalog: Catalog | None = None):
    cat = catalog if catalog is not None else catalog_for(config)
    return build_controller_relation(
        "pid", config.build_tasks(), config.noise, config.sweep,
        points=config.grids["pid"], cache=cache, costs=cat.per_step_cost)


def build_relations(config: RunConfig, *, cache=None,
                    catalog: Catalog | None = None):
    """Raw sweep relations: (merged lateral, longitudinal)."""
    cat = catalog if catalog is not None else catalog_for(config)
    return (build_lateral_relation(config, cache=cache, catalog=cat),
            build_longitudinal_relation(config, cache=cache, catalog=cat))


def build_lateral_table(config: RunConfig, *, cache=None,
                        catalog: Catalog | None = None) -> TableMdpi:
    """Merged monotone interface of every enabled lateral family."""
    return monotonize(build_lateral_relation(config, cache=cache,
                                             catalog=catalog))


def build_longitudinal_table(config: RunConfig, *, cache=None,
                             catalog: Catalog | None = None) -> TableMdpi:
    return monotonize(build_longitudinal_relation(config, cache=cache,
                                                  catalog=catalog))


def assembled_from_config(config: RunConfig, *, cache=None) -> Diagram:
    """Sweep (or reuse cached) simulations and assemble the full diagram."""
    catalog = catalog_for(config)
    lateral, longitudinal = build_relations(config, cache=cache,
                                            catalog=catalog)
    return assemble_diagram(monotonize(lateral), monotonize(longitudinal),
                            catalog, frequency_mode=config.frequency_mode)
