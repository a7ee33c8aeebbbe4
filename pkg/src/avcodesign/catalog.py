"""Component catalogs: sensor and computer options plus the compute model.

The shipped catalog carries illustrative numbers, not vendor data. A study
with real hardware should load its own JSON file; everything downstream only
cares about the field structure and the orderings (a better sensor costs
more, a bigger computer provides more throughput).
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass
from importlib import resources
from typing import Mapping

CATALOG_SCHEMA = 1

# ops per control step for the constant-cost families; keys of the
# per_step_cost table shipped in the catalog
FAMILY_COST_KEYS = ("stanley", "pure_pursuit", "lqr", "pid",
                    "nmpc_base", "nmpc_per_candidate")


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class SensorEntry:
    """A perception option.

    ``v_scale`` multiplies the base measurement covariance, so 1.0 is the
    best sensor in the catalog and larger values are noisier. The imposed
    scale flows to the controllers as a demanded robustness level.
    """

    name: str
    v_scale: float
    max_frequency: float
    cost: float
    power: float
    mass: float

    def __post_init__(self):
        if self.v_scale <= 0:
            raise CatalogError(f"sensor {self.name!r}: v_scale must be positive")
        for attr in ("max_frequency", "cost", "power", "mass"):
            if getattr(self, attr) < 0:
                raise CatalogError(f"sensor {self.name!r}: {attr} must be >= 0")


@dataclass(frozen=True)
class ComputerEntry:
    """A compute option; capacity is in the same normalized op/s unit the
    per-step cost table uses."""

    name: str
    compute_capacity: float
    cost: float
    power: float
    mass: float

    def __post_init__(self):
        for attr in ("compute_capacity", "cost", "power", "mass"):
            if getattr(self, attr) < 0:
                raise CatalogError(f"computer {self.name!r}: {attr} must be >= 0")


@dataclass(frozen=True)
class Catalog:
    sensors: tuple
    computers: tuple
    per_step_cost: dict

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        object.__setattr__(self, "computers", tuple(self.computers))
        for group, entries in (("sensor", self.sensors),
                               ("computer", self.computers)):
            names = [e.name for e in entries]
            if len(set(names)) != len(names):
                raise CatalogError(f"duplicate {group} names")
        missing = [k for k in FAMILY_COST_KEYS if k not in self.per_step_cost]
        if missing:
            raise CatalogError(f"per_step_cost is missing {missing}")

    def sensor(self, name: str) -> SensorEntry:
        for entry in self.sensors:
            if entry.name == name:
                return entry
        raise CatalogError(f"no sensor named {name!r}")

    def computer(self, name: str) -> ComputerEntry:
        for entry in self.computers:
            if entry.name == name:
                return entry
        raise CatalogError(f"no computer named {name!r}")


def catalog_from_dict(obj: dict) -> Catalog:
    if obj.get("schema") != CATALOG_SCHEMA:
        raise CatalogError(
            f"catalog schema {obj.get('schema')!r}, expected {CATALOG_SCHEMA}")
    return Catalog(
        sensors=tuple(SensorEntry(**s) for s in obj["sensors"]),
        computers=tuple(ComputerEntry(**c) for c in obj["computers"]),
        per_step_cost={str(k): float(v)
                       for k, v in obj["per_step_cost"].items()})


def catalog_to_dict(cat: Catalog) -> dict:
    return {
        "schema": CATALOG_SCHEMA,
        "sensors": [asdict(s) for s in cat.sensors],
        "computers": [asdict(c) for c in cat.computers],
        "per_step_cost": dict(cat.per_step_cost),
    }


def catalog_digest(cat: Catalog) -> str:
    """Stable content hash of the catalog, independent of file layout."""
    canon = json.dumps(catalog_to_dict(cat), sort_keys=True,
                       separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def load_catalog(path) -> Catalog:
    with open(path, encoding="utf-8") as fh:
        return catalog_from_dict(json.load(fh))


def save_catalog(cat: Catalog, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(catalog_to_dict(cat), fh, indent=2, sort_keys=True)
        fh.write("\n")


_DEFAULT: Catalog | None = None


def default_catalog() -> Catalog:
    """The catalog shipped with the package (parsed once per process)."""
    global _DEFAULT
    if _DEFAULT is None:
        ref = resources.files("avcodesign").joinpath("data/catalog.json")
        _DEFAULT = catalog_from_dict(json.loads(ref.read_text(encoding="utf-8")))
    return _DEFAULT


def computation_model(family: str, params, frequency: float,
                      costs: Mapping[str, float] | None = None) -> float:
    """Required compute in normalized op/s: per-step cost times control rate.

    The receding-horizon family pays per candidate rollout step, so its cost
    grows linearly in horizon length times the optimizer's sweep budget; the
    closed-form families are constant per step.
    """
    if frequency <= 0:
        raise CatalogError("frequency must be positive")
    if costs is None:
        costs = default_catalog().per_step_cost
    if family == "nmpc":
        from .controllers import _SWEEP_BUDGET
        n_h = params["n_h"] if isinstance(params, Mapping) else params.n_h
        per_step = costs["nmpc_base"] + \
            costs["nmpc_per_candidate"] * float(n_h) * _SWEEP_BUDGET
    else:
        try:
            per_step = costs[family]
        except KeyError:
            raise CatalogError(f"no per-step cost for family {family!r}") from None
    return per_step * frequency


def benchmark_step_costs(repeats: int = 20) -> dict:
    """Wall-clock seconds per control step for each family on one fixed
    scenario. Offline calibration aid for the per_step_cost table; too
    machine-dependent to pin in tests beyond gross ordering."""
    import numpy as np

    from .controllers import (LqrGainCache, LqrParams, NmpcParams, PidMemory,
                              PidParams, PurePursuitParams, StanleyParams,
                              nmpc, pid_speed, pure_pursuit, stanley,
                              tracking_error)
    from .paths import make_path

    path = make_path("ninety_degree_turn", 0.05, 60.0)
    state = (5.0, 0.4, 0.2, 0.05, 8.0)
    bounds = (-0.6, 0.6)
    err = tracking_error(state, path, 2.7, ref_point="front_axle")
    timings = {}

    def clock(fn) -> float:
        fn()  # warm caches before timing
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        return (time.perf_counter() - t0) / repeats

    timings["stanley"] = clock(
        lambda: stanley(err, 8.0, StanleyParams(g=0.5), bounds))
    timings["pure_pursuit"] = clock(
        lambda: pure_pursuit(state, path, PurePursuitParams(L=1.0), 2.7, bounds))
    gains = LqrGainCache(2.7, LqrParams(Q=np.eye(2), R=1.0))
    timings["lqr"] = clock(lambda: gains.gain(8.0))
    cog = tracking_error(state, path, 2.7, ref_point="center_of_gravity")
    window = path.window(path.nearest_index(5.0, 0.4), 20.0)
    timings["nmpc"] = clock(
        lambda: nmpc(cog, window, 8.0, NmpcParams(Q=np.eye(2), R=0.5, n_h=10),
                     0.02, bounds, 2.7))
    pid = PidParams(k_p=1.0, k_i=0.1, k_d=0.01, v_t=8.0)
    timings["pid"] = clock(
        lambda: pid_speed(6.0, PidMemory(), pid, 0.02, (-3.0, 3.0)))
    return timings
