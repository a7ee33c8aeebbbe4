"""Monotone design-problem interfaces.

An interface relates a functionality poset F and a resource poset R through a
finite set of implementations, each providing a point of F and requiring a
point of R. The induced maps:

* ``evaluate(f, r)``  -- implementations providing at least ``f`` within budget ``r``
* ``h(f)``            -- minimal resource antichain able to provide ``f``
* ``h_prime(r)``      -- maximal functionality antichain available within ``r``

``h`` is antitone-monotone by construction: raising the demanded functionality
can only shrink the feasible set, so the minimal resources can only move up.
Composition in series and in parallel preserves this structure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from .order import (
    Antichain,
    Opposite,
    Outcome,
    Poset,
    PosetError,
    Product,
    pareto_max,
    pareto_min,
)


class MdpiError(ValueError):
    pass


@dataclass(frozen=True)
class Front:
    """An antichain with, per point, the implementation labels achieving it.

    Labels of order-Equal implementations are merged onto one point, so every
    co-optimal design stays reported.
    """

    antichain: Antichain
    labels: tuple  # tuple of tuples, parallel to antichain.points

    def __post_init__(self):
        if len(self.labels) != len(self.antichain.points):
            raise MdpiError("labels must parallel the antichain points")
        object.__setattr__(self, "labels", tuple(tuple(ls) for ls in self.labels))

    @property
    def points(self) -> tuple:
        return self.antichain.points

    def __len__(self) -> int:
        return len(self.antichain)


class Mdpi:
    """Base interface; see TableMdpi for the finite-table form."""

    functionality: Poset
    resource: Poset

    def labels(self) -> tuple:
        raise NotImplementedError

    def provide(self, label) -> Any:
        raise NotImplementedError

    def require(self, label) -> Any:
        raise NotImplementedError

    def respond(self, f):
        """For analytic nodes: the unique minimal (require, label) serving
        demand ``f``; None for general finite tables."""
        return None

    def evaluate(self, f, r) -> list:
        """Labels of implementations with provide >= f and require <= r."""
        self.functionality.validate(f)
        self.resource.validate(r)
        out = []
        for lab in self.labels():
            if self.functionality.leq(f, self.provide(lab)) and \
                    self.resource.leq(self.require(lab), r):
                out.append(lab)
        return out

    def h(self, f) -> Front:
        """Minimal resources providing at least ``f``, with design annotations.

        Empty front encodes infeasibility (no implementation reaches ``f``).
        """
        self.functionality.validate(f)
        resp = self.respond(f)
        if resp is not None:
            req, lab = resp
            return Front(Antichain(poset=self.resource, points=(req,)), ((lab,),))
        pts, anns = [], []
        for lab in self.labels():
            if self.functionality.leq(f, self.provide(lab)):
                pts.append(self.require(lab))
                # wrapped so tuple-valued labels survive annotation merging
                anns.append([lab])
        mins, merged = pareto_min(pts, self.resource, annotations=anns)
        return Front(Antichain(poset=self.resource, points=tuple(mins)),
                     tuple(tuple(m) for m in merged))

    def h_prime(self, r) -> Front:
        """Maximal functionalities reachable within budget ``r``."""
        self.resource.validate(r)
        pts, anns = [], []
        for lab in self.labels():
            if self.resource.leq(self.require(lab), r):
                pts.append(self.provide(lab))
                # wrapped so tuple-valued labels survive annotation merging
                anns.append([lab])
        maxs, merged = pareto_max(pts, self.functionality, annotations=anns)
        return Front(Antichain(poset=self.functionality, points=tuple(maxs)),
                     tuple(tuple(m) for m in merged))


@dataclass(frozen=True)
class TableMdpi(Mdpi):
    """Finite implementation table: ``rows`` maps label -> (provide, require)."""

    functionality: Poset
    resource: Poset
    rows: tuple  # ((label, provide, require), ...)

    def __post_init__(self):
        rows = tuple((lab, p, r) for lab, p, r in self.rows)
        object.__setattr__(self, "rows", rows)
        labels = [lab for lab, _, _ in rows]
        if len(set(labels)) != len(labels):
            raise MdpiError("implementation labels must be distinct")
        for lab, p, r in rows:
            try:
                self.functionality.validate(p)
                self.resource.validate(r)
            except PosetError as exc:
                raise MdpiError(f"implementation {lab!r}: {exc}") from None
        object.__setattr__(self, "_by_label", {lab: (p, r) for lab, p, r in rows})

    def labels(self) -> tuple:
        return tuple(lab for lab, _, _ in self.rows)

    def provide(self, label) -> Any:
        return self._by_label[label][0]

    def require(self, label) -> Any:
        return self._by_label[label][1]


@dataclass(frozen=True)
class AdderMdpi(Mdpi):
    """Combines resource streams by addition: the functionality ports absorb
    the addends and the single resource port carries their total. With one
    port this is the identity pass-through. Monotone by construction."""

    port_names: tuple
    total_name: str = "total"

    def __post_init__(self):
        from .order import Reals
        names = tuple(str(n) for n in self.port_names)
        if not names:
            raise MdpiError("an adder needs at least one input port")
        object.__setattr__(self, "port_names", names)
        object.__setattr__(self, "functionality",
                           Product(components=tuple((n, Reals()) for n in names)))
        object.__setattr__(self, "resource",
                           Product(components=((self.total_name, Reals()),)))

    def labels(self) -> tuple:
        raise MdpiError("adder implementations are demand-indexed; use respond()")

    def respond(self, f):
        self.functionality.validate(f)
        return (float(np.sum(np.asarray(f, dtype=float))),), "sum"


def identity_mdpi(poset: Poset, grid: Iterable) -> TableMdpi:
    """One implementation per grid point with provide == require; composing it
    in series leaves h unchanged on demands whose answers lie on the grid."""
    rows = tuple((("id", i), g, g) for i, g in enumerate(grid))
    return TableMdpi(functionality=poset, resource=poset, rows=rows)


def series(first: TableMdpi, second: TableMdpi) -> TableMdpi:
    """Chain two interfaces: what the first requires, the second must provide.

    The composite provides the first's functionality and requires the second's
    resources; implementations are the compatible pairs.
    """
    if first.resource != second.functionality:
        raise MdpiError("series composition needs first.resource == second.functionality")
    rows = []
    for la in first.labels():
        ra = first.require(la)
        for lb in second.labels():
            if second.functionality.leq(ra, second.provide(lb)):
                rows.append(((la, lb), first.provide(la), second.require(lb)))
    return TableMdpi(functionality=first.functionality,
                     resource=second.resource, rows=tuple(rows))


def parallel(left: TableMdpi, right: TableMdpi) -> TableMdpi:
    """Side-by-side composition on product posets; all label pairs."""
    fun = Product(components=(("left", left.functionality), ("right", right.functionality)))
    res = Product(components=(("left", left.resource), ("right", right.resource)))
    rows = []
    for la in left.labels():
        for lb in right.labels():
            rows.append(((la, lb),
                         (left.provide(la), right.provide(lb)),
                         (left.require(la), right.require(lb))))
    return TableMdpi(functionality=fun, resource=res, rows=tuple(rows))


def check_h_antitone(mdpi: Mdpi, f_pairs: Sequence[tuple]) -> list:
    """For each comparable pair f <= f', verify every point of h(f') lies in
    the upper set of h(f). Returns the list of violating pairs (empty = pass)."""
    violations = []
    for f_lo, f_hi in f_pairs:
        if not mdpi.functionality.leq(f_lo, f_hi):
            raise MdpiError("check_h_antitone expects ordered pairs f_lo <= f_hi")
        lo = mdpi.h(f_lo)
        hi = mdpi.h(f_hi)
        for p in hi.points:
            if not any(mdpi.resource.leq(q, p) for q in lo.points):
                violations.append((f_lo, f_hi, p))
    return violations
