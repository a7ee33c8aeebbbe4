"""Partial-order primitives: poset descriptors, comparisons, antichains, upper sets.

Points are plain Python values (floats, strings, tuples, numpy arrays); the
poset object supplies the order. All posets used by the solver are finite or
finitely discretized, so equality of points is exact value equality except for
the positive-semidefinite matrix order, which compares through an eigenvalue
tolerance.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np


class PosetError(ValueError):
    """A point does not belong to the poset, or two posets are incompatible."""


class UnsupportedOrderOperation(ValueError):
    """The requested lattice operation (join/bottom) is not available."""


class Outcome(enum.Enum):
    """Result of comparing two points of a poset."""

    LESS_OR_EQUAL = "less_or_equal"      # a < b (strictly below)
    GREATER_OR_EQUAL = "greater_or_equal"  # a > b (strictly above)
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"

    def implies_le(self) -> bool:
        return self in (Outcome.LESS_OR_EQUAL, Outcome.EQUAL)

    def implies_ge(self) -> bool:
        return self in (Outcome.GREATER_OR_EQUAL, Outcome.EQUAL)

    def dual(self) -> "Outcome":
        if self is Outcome.LESS_OR_EQUAL:
            return Outcome.GREATER_OR_EQUAL
        if self is Outcome.GREATER_OR_EQUAL:
            return Outcome.LESS_OR_EQUAL
        return self


class Poset:
    """Base class. Subclasses implement ``leq`` and ``validate``."""

    def leq(self, a: Any, b: Any) -> bool:
        raise NotImplementedError

    def validate(self, x: Any) -> None:
        raise NotImplementedError

    def compare(self, a: Any, b: Any) -> Outcome:
        le = self.leq(a, b)
        ge = self.leq(b, a)
        if le and ge:
            return Outcome.EQUAL
        if le:
            return Outcome.LESS_OR_EQUAL
        if ge:
            return Outcome.GREATER_OR_EQUAL
        return Outcome.INCOMPARABLE

    def equal(self, a: Any, b: Any) -> bool:
        return self.compare(a, b) is Outcome.EQUAL

    def bottom(self) -> Any:
        raise UnsupportedOrderOperation(f"{self.describe()['kind']} poset has no declared bottom")

    def join(self, a: Any, b: Any) -> Any:
        raise UnsupportedOrderOperation(f"{self.describe()['kind']} poset has no computable binary join")

    def describe(self) -> dict:
        raise NotImplementedError

    def point_to_json(self, x: Any) -> Any:
        return x

    def point_from_json(self, obj: Any) -> Any:
        return obj

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Poset) and self.describe() == other.describe()

    def __hash__(self) -> int:
        return hash(json.dumps(self.describe(), sort_keys=True))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.describe()})"


@dataclass(frozen=True, eq=False)
class Reals(Poset):
    """Totally ordered real quantities. ``floor`` is the declared least element
    (resource quantities here are physically nonnegative)."""

    floor: float = 0.0

    def leq(self, a: float, b: float) -> bool:
        return float(a) <= float(b)

    def validate(self, x: Any) -> None:
        if not isinstance(x, (int, float, np.floating, np.integer)):
            raise PosetError(f"not a real number: {x!r}")
        if not np.isfinite(float(x)):
            raise PosetError(f"not finite: {x!r}")

    def bottom(self) -> float:
        return self.floor

    def join(self, a: float, b: float) -> float:
        return max(float(a), float(b))

    def describe(self) -> dict:
        return {"kind": "reals", "floor": self.floor}


@dataclass(frozen=True, eq=False)
class Chain(Poset):
    """Finite totally ordered labels, least first."""

    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(set(self.labels)) != len(self.labels):
            raise PosetError("chain labels must be distinct")

    def _index(self, x: Any) -> int:
        try:
            return self.labels.index(x)
        except ValueError:
            raise PosetError(f"{x!r} is not a label of this chain") from None

    def leq(self, a: Any, b: Any) -> bool:
        return self._index(a) <= self._index(b)

    def validate(self, x: Any) -> None:
        self._index(x)

    def bottom(self) -> Any:
        return self.labels[0]

    def join(self, a: Any, b: Any) -> Any:
        return self.labels[max(self._index(a), self._index(b))]

    def describe(self) -> dict:
        return {"kind": "chain", "labels": list(self.labels)}


@dataclass(frozen=True, eq=False)
class Opposite(Poset):
    """The dual: order reversed, points unchanged."""

    base: Poset

    def leq(self, a: Any, b: Any) -> bool:
        return self.base.leq(b, a)

    def compare(self, a: Any, b: Any) -> Outcome:
        return self.base.compare(a, b).dual()

    def validate(self, x: Any) -> None:
        self.base.validate(x)

    def join(self, a: Any, b: Any) -> Any:
        # join in the dual is the base meet; only available where the base
        # meet is computable (totally ordered components).
        if isinstance(self.base, Reals):
            return min(float(a), float(b))
        if isinstance(self.base, Chain):
            ia, ib = self.base._index(a), self.base._index(b)
            return self.base.labels[min(ia, ib)]
        raise UnsupportedOrderOperation("no computable join in this dual poset")

    def describe(self) -> dict:
        return {"kind": "opposite", "base": self.base.describe()}

    def point_to_json(self, x: Any) -> Any:
        return self.base.point_to_json(x)

    def point_from_json(self, obj: Any) -> Any:
        return self.base.point_from_json(obj)


@dataclass(frozen=True, eq=False)
class Product(Poset):
    """Named product poset; points are tuples compared componentwise."""

    components: tuple  # ((name, Poset), ...)

    def __post_init__(self):
        comps = tuple((str(n), p) for n, p in self.components)
        object.__setattr__(self, "components", comps)
        names = [n for n, _ in comps]
        if len(set(names)) != len(names):
            raise PosetError("product component names must be distinct")

    @property
    def names(self) -> tuple:
        return tuple(n for n, _ in self.components)

    def component(self, name: str) -> Poset:
        for n, p in self.components:
            if n == name:
                return p
        raise PosetError(f"no component named {name!r}")

    def index(self, name: str) -> int:
        for i, (n, _) in enumerate(self.components):
            if n == name:
                return i
        raise PosetError(f"no component named {name!r}")

    def validate(self, x: Any) -> None:
        if not isinstance(x, (tuple, list)) or len(x) != len(self.components):
            raise PosetError(f"point {x!r} does not have {len(self.components)} components")
        for (name, p), v in zip(self.components, x):
            try:
                p.validate(v)
            except PosetError as exc:
                raise PosetError(f"component {name!r}: {exc}") from None

    def leq(self, a: Sequence, b: Sequence) -> bool:
        return all(p.leq(va, vb) for (_, p), va, vb in zip(self.components, a, b))

    def compare(self, a: Sequence, b: Sequence) -> Outcome:
        if len(a) != len(self.components) or len(b) != len(self.components):
            raise PosetError("arity mismatch in product comparison")
        le = ge = True
        for (_, p), va, vb in zip(self.components, a, b):
            c = p.compare(va, vb)
            le = le and c.implies_le()
            ge = ge and c.implies_ge()
            if not le and not ge:
                return Outcome.INCOMPARABLE
        if le and ge:
            return Outcome.EQUAL
        return Outcome.LESS_OR_EQUAL if le else Outcome.GREATER_OR_EQUAL

    def bottom(self) -> tuple:
        return tuple(p.bottom() for _, p in self.components)

    def join(self, a: Sequence, b: Sequence) -> tuple:
        return tuple(p.join(va, vb) for (_, p), va, vb in zip(self.components, a, b))

    def describe(self) -> dict:
        return {"kind": "product",
                "components": [[n, p.describe()] for n, p in self.components]}

    def point_to_json(self, x: Sequence) -> list:
        return [p.point_to_json(v) for (_, p), v in zip(self.components, x)]

    def point_from_json(self, obj: Sequence) -> tuple:
        return tuple(p.point_from_json(v) for (_, p), v in zip(self.components, obj))


#: below this, a symmetric-part residual means the input was not symmetric
_SYMMETRY_TOL = 1e-10
#: eigenvalue slack when testing positive semidefiniteness of differences
_PSD_TOL = 1e-9


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


@dataclass(frozen=True, eq=False)
class LoewnerPsd(Poset):
    """Symmetric matrices ordered by A <= B iff B - A is positive semidefinite."""

    dim: int
    tol: float = _PSD_TOL

    def validate(self, x: Any) -> None:
        m = np.asarray(x, dtype=float)
        if m.shape != (self.dim, self.dim):
            raise PosetError(f"expected a {self.dim}x{self.dim} matrix, got shape {m.shape}")
        if np.max(np.abs(m - m.T)) > _SYMMETRY_TOL:
            raise PosetError("matrix is not symmetric within tolerance")

    def leq(self, a: np.ndarray, b: np.ndarray) -> bool:
        diff = _symmetrize(np.asarray(b, float) - np.asarray(a, float))
        return float(np.linalg.eigvalsh(diff)[0]) >= -self.tol

    def bottom(self) -> np.ndarray:
        return np.zeros((self.dim, self.dim))

    def describe(self) -> dict:
        return {"kind": "loewner", "dim": self.dim}

    def point_to_json(self, x: np.ndarray) -> list:
        return np.asarray(x, float).tolist()

    def point_from_json(self, obj: Any) -> np.ndarray:
        return np.asarray(obj, dtype=float)


@dataclass(frozen=True, eq=False)
class PointwiseSequence(Poset):
    """Finite sequences over a base poset, compared pointwise. Sequences of
    different lengths are rejected rather than padded."""

    base: Poset

    def validate(self, x: Any) -> None:
        if not isinstance(x, (tuple, list)):
            raise PosetError("sequence point must be a tuple or list")
        for v in x:
            self.base.validate(v)

    def _check_len(self, a: Sequence, b: Sequence) -> None:
        if len(a) != len(b):
            raise PosetError(f"sequence lengths differ: {len(a)} vs {len(b)}")

    def leq(self, a: Sequence, b: Sequence) -> bool:
        self._check_len(a, b)
        return all(self.base.leq(va, vb) for va, vb in zip(a, b))

    def compare(self, a: Sequence, b: Sequence) -> Outcome:
        self._check_len(a, b)
        le = ge = True
        for va, vb in zip(a, b):
            c = self.base.compare(va, vb)
            le = le and c.implies_le()
            ge = ge and c.implies_ge()
            if not le and not ge:
                return Outcome.INCOMPARABLE
        if le and ge:
            return Outcome.EQUAL
        return Outcome.LESS_OR_EQUAL if le else Outcome.GREATER_OR_EQUAL

    def describe(self) -> dict:
        return {"kind": "sequence", "base": self.base.describe()}

    def point_to_json(self, x: Sequence) -> list:
        return [self.base.point_to_json(v) for v in x]

    def point_from_json(self, obj: Sequence) -> tuple:
        return tuple(self.base.point_from_json(v) for v in obj)


def poset_from_descriptor(desc: dict) -> Poset:
    """Rebuild a poset from its JSON descriptor."""
    kind = desc.get("kind")
    if kind == "reals":
        return Reals(floor=float(desc.get("floor", 0.0)))
    if kind == "chain":
        return Chain(labels=tuple(desc["labels"]))
    if kind == "opposite":
        return Opposite(base=poset_from_descriptor(desc["base"]))
    if kind == "product":
        return Product(components=tuple(
            (name, poset_from_descriptor(sub)) for name, sub in desc["components"]))
    if kind == "loewner":
        return LoewnerPsd(dim=int(desc["dim"]))
    if kind == "sequence":
        return PointwiseSequence(base=poset_from_descriptor(desc["base"]))
    raise PosetError(f"unknown poset kind {kind!r}")


# ---------------------------------------------------------------------------
# Antichains and Pareto filtering


def pareto_min(points: Iterable, poset: Poset,
               annotations: Iterable | None = None) -> tuple[list, list]:
    """Minimal elements of ``points``: drop every point strictly dominated by
    another, deduplicate order-equal points (their annotations merge).

    Returns (minimal_points, merged_annotation_lists) preserving first-seen
    order. Annotations default to empty lists.
    """
    pts = list(points)
    anns = [list(a) if isinstance(a, (list, tuple)) else [a] for a in annotations] \
        if annotations is not None else [[] for _ in pts]
    if len(anns) != len(pts):
        raise ValueError("annotations length mismatch")

    minimal: list = []
    kept_anns: list[list] = []
    for p, a in zip(pts, anns):
        # Once p is found dominated it cannot unseat anything else: the
        # dominator already dominates whatever p would (transitivity, and the
        # kept points form an antichain).
        dominated = False
        survivors: list = []
        surv_anns: list[list] = []
        for q, qa in zip(minimal, kept_anns):
            if dominated:
                survivors.append(q)
                surv_anns.append(qa)
                continue
            c = poset.compare(q, p)
            if c is Outcome.EQUAL:
                dominated = True
                survivors.append(q)
                surv_anns.append(qa + a)
            elif c is Outcome.LESS_OR_EQUAL:
                dominated = True
                survivors.append(q)
                surv_anns.append(qa)
            elif c is Outcome.GREATER_OR_EQUAL:
                continue  # q strictly dominated by p; drop it
            else:
                survivors.append(q)
                surv_anns.append(qa)
        if not dominated:
            survivors.append(p)
            surv_anns.append(list(a))
        minimal, kept_anns = survivors, surv_anns
    return minimal, kept_anns


def pareto_max(points: Iterable, poset: Poset,
               annotations: Iterable | None = None) -> tuple[list, list]:
    """Maximal elements; the same filter in the dual order."""
    return pareto_min(points, Opposite(poset), annotations)


@dataclass(frozen=True)
class Antichain:
    """An antichain: pairwise incomparable points of ``poset``.

    Construct through ``Antichain.minimal`` (applies the Pareto filter) unless
    the points are already known incomparable.
    """

    poset: Poset
    points: tuple

    @staticmethod
    def minimal(points: Iterable, poset: Poset) -> "Antichain":
        mins, _ = pareto_min(points, poset)
        return Antichain(poset=poset, points=tuple(mins))

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        for p in self.points:
            self.poset.validate(p)

    def check(self) -> None:
        """Raise if any two points are comparable (O(n^2), for tests)."""
        for i, a in enumerate(self.points):
            for b in self.points[i + 1:]:
                if self.poset.compare(a, b) is not Outcome.INCOMPARABLE:
                    raise PosetError(f"antichain violation: {a!r} vs {b!r}")

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def same_points(self, other: "Antichain") -> bool:
        """Set equality up to order-Equal points (the fixed-point stopping test)."""
        if self.poset != other.poset or len(self) != len(other):
            return False
        used = [False] * len(other.points)
        for p in self.points:
            for j, q in enumerate(other.points):
                if not used[j] and self.poset.compare(p, q) is Outcome.EQUAL:
                    used[j] = True
                    break
            else:
                return False
        return True

    def to_json(self) -> dict:
        return {"poset": self.poset.describe(),
                "points": [self.poset.point_to_json(p) for p in self.points]}

    @staticmethod
    def from_json(obj: dict) -> "Antichain":
        poset = poset_from_descriptor(obj["poset"])
        pts = tuple(poset.point_from_json(p) for p in obj["points"])
        return Antichain(poset=poset, points=pts)


@dataclass(frozen=True)
class UpperSet:
    """An upward-closed set represented by its generator antichain."""

    generators: Antichain

    @property
    def poset(self) -> Poset:
        return self.generators.poset

    def contains(self, x: Any) -> bool:
        return any(self.poset.leq(g, x) for g in self.generators)

    def union(self, other: "UpperSet") -> "UpperSet":
        if self.poset != other.poset:
            raise PosetError("upper sets live in different posets")
        merged = list(self.generators) + list(other.generators)
        return UpperSet(Antichain.minimal(merged, self.poset))

    def intersection(self, other: "UpperSet") -> "UpperSet":
        """Pairwise joins of generators; raises UnsupportedOrderOperation when
        the poset lacks computable joins (e.g. the matrix order)."""
        if self.poset != other.poset:
            raise PosetError("upper sets live in different posets")
        joins = [self.poset.join(a, b) for a in self.generators for b in other.generators]
        return UpperSet(Antichain.minimal(joins, self.poset))

    def includes(self, other: "UpperSet") -> bool:
        """True iff ``other`` is a subset of this upper set."""
        return all(self.contains(g) for g in other.generators)


def check_order_axioms(poset: Poset, sample: Callable[[np.random.Generator], Any],
                       rng: np.random.Generator, triples: int = 1000) -> None:
    """Reflexivity, antisymmetry and transitivity on randomly sampled triples.

    ``sample`` draws one point. Raises AssertionError on the first violation.
    """
    for _ in range(triples):
        a, b, c = sample(rng), sample(rng), sample(rng)
        assert poset.leq(a, a), "reflexivity"
        if poset.leq(a, b) and poset.leq(b, a):
            assert poset.compare(a, b) is Outcome.EQUAL, "antisymmetry up to Equal"
        if poset.leq(a, b) and poset.leq(b, c):
            assert poset.leq(a, c), "transitivity"
