"""Interconnection diagrams of design-problem interfaces and the query solver.

A diagram wires nodes (interfaces whose functionality/resource posets are
named products) through edges from a resource port of one node to a
functionality port of another: the demand flows along the edge and the target
must provide at least what the source requires. Queries fix the exposed
functionality ports and ask for the Pareto-minimal antichain over the exposed
resource ports, with the implementation choices that achieve each point.

Acyclic diagrams solve by propagating the per-node minimal fronts in demand
order. Cycles solve by a fixed-point iteration on the looped demand: starting
from the bottom of the cut port and re-solving with joined demands until the
iterate antichain stops changing. Iterates ascend; a configurable iteration
cap guards divergence.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .mdpi import AdderMdpi, TableMdpi
from .order import (
    Antichain,
    Product,
    UnsupportedOrderOperation,
    pareto_min,
    poset_from_descriptor,
)


class DiagramError(ValueError):
    pass


class FixedPointDivergence(RuntimeError):
    """The loop iteration hit the cap; carries the last iterate antichain."""

    def __init__(self, message: str, last_iterate):
        super().__init__(message)
        self.last_iterate = last_iterate


@dataclass(frozen=True)
class Port:
    node: str
    component: str

    def key(self) -> tuple:
        return (self.node, self.component)


@dataclass(frozen=True)
class Edge:
    source: Port  # resource side: the demander
    target: Port  # functionality side: the provider


@dataclass(frozen=True)
class Diagram:
    nodes: dict
    edges: tuple
    exposed_functionality: tuple  # ((Port, name), ...)
    exposed_resources: tuple      # ((Port, name), ...)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "exposed_functionality",
                           tuple((p, str(n)) for p, n in self.exposed_functionality))
        object.__setattr__(self, "exposed_resources",
                           tuple((p, str(n)) for p, n in self.exposed_resources))
        self._validate()

    def _fun_poset(self, node: str) -> Product:
        p = self.nodes[node].functionality
        if not isinstance(p, Product):
            raise DiagramError(f"node {node!r}: functionality must be a named product")
        return p

    def _res_poset(self, node: str) -> Product:
        p = self.nodes[node].resource
        if not isinstance(p, Product):
            raise DiagramError(f"node {node!r}: resource must be a named product")
        return p

    def _validate(self) -> None:
        for name in self.nodes:
            self._fun_poset(name)
            self._res_poset(name)
        for e in self.edges:
            if e.source.node not in self.nodes:
                raise DiagramError(f"edge source node {e.source.node!r} unknown")
            if e.target.node not in self.nodes:
                raise DiagramError(f"edge target node {e.target.node!r} unknown")
            sp = self._res_poset(e.source.node).component(e.source.component)
            tp = self._fun_poset(e.target.node).component(e.target.component)
            if sp != tp:
                raise DiagramError(
                    f"edge {e.source.key()} -> {e.target.key()}: port posets differ")
        names = [n for _, n in self.exposed_functionality] + \
                [n for _, n in self.exposed_resources]
        if len(set(names)) != len(names):
            raise DiagramError("exposed port names must be distinct")
        for p, _ in self.exposed_functionality:
            self._fun_poset(p.node).component(p.component)
        for p, _ in self.exposed_resources:
            self._res_poset(p.node).component(p.component)

    @property
    def functionality(self) -> Product:
        """Product poset of the exposed functionality ports, in declaration order."""
        return Product(components=tuple(
            (name, self._fun_poset(p.node).component(p.component))
            for p, name in self.exposed_functionality))

    @property
    def resource(self) -> Product:
        """Product poset of the exposed resource ports, in declaration order."""
        return Product(components=tuple(
            (name, self._res_poset(p.node).component(p.component))
            for p, name in self.exposed_resources))

    def demand_arcs(self) -> set:
        return {(e.source.node, e.target.node) for e in self.edges}


@dataclass(frozen=True)
class QuerySolution:
    """Pareto-minimal exposed resources with the designs achieving each point."""

    functionality: Product
    query: tuple
    resource: Product
    antichain: Antichain
    designs: tuple  # per point: tuple of assignments; assignment: {node: (labels,)}
    iterations: int

    @property
    def feasible(self) -> bool:
        return len(self.antichain) > 0

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "query": {
                "poset": self.functionality.describe(),
                "point": self.functionality.point_to_json(self.query),
            },
            "resource_poset": self.resource.describe(),
            "feasible": self.feasible,
            "points": [self.resource.point_to_json(p) for p in self.antichain.points],
            "designs": [
                [{node: list(labels) for node, labels in sorted(asg.items())}
                 for asg in design_set]
                for design_set in self.designs
            ],
            "iterations": self.iterations,
        }


@dataclass
class _State:
    assignment: dict      # node -> tuple of co-optimal labels
    exposed: dict         # exposed-resource name -> value
    pending: dict         # functionality Port.key -> joined edge demand
    cut_demand: dict      # edge index -> demanded value

    def clone(self) -> "_State":
        return _State(dict(self.assignment), dict(self.exposed),
                      dict(self.pending), dict(self.cut_demand))


def _topological_order(nodes: Iterable[str], arcs: set) -> list | None:
    """Kahn's algorithm; None when a cycle remains. Deterministic order."""
    nodes = sorted(nodes)
    indeg = {n: 0 for n in nodes}
    for a, b in arcs:
        if a != b:
            indeg[b] += 1
    ready = [n for n in nodes if indeg[n] == 0]
    out = []
    while ready:
        n = ready.pop(0)
        out.append(n)
        for a, b in sorted(arcs):
            if a == n and a != b:
                indeg[b] -= 1
                if indeg[b] == 0:
                    ready.append(b)
                    ready.sort()
        arcs = {(a, b) for a, b in arcs if a != n}
    return out if len(out) == len(nodes) else None


def _plan(diagram: Diagram) -> tuple[list, list]:
    """Topological node order plus the indices of edges cut to break cycles.

    Self-edges are always cut; otherwise the first declared edge lying on a
    cycle is cut, repeatedly, until the demand graph is acyclic."""
    cuts = [i for i, e in enumerate(diagram.edges)
            if e.source.node == e.target.node]
    while True:
        arcs = {(e.source.node, e.target.node)
                for i, e in enumerate(diagram.edges) if i not in cuts}
        order = _topological_order(diagram.nodes.keys(), arcs)
        if order is not None:
            return order, cuts
        for i in range(len(diagram.edges)):
            if i not in cuts and _in_cycle(diagram, cuts, i):
                cuts.append(i)
                break
        else:
            raise DiagramError("could not break diagram cycles")


def _in_cycle(diagram: Diagram, cuts: list, idx: int) -> bool:
    e = diagram.edges[idx]
    # on a cycle iff some demand path leads from its target back to its source
    arcs = {(x.source.node, x.target.node)
            for j, x in enumerate(diagram.edges) if j not in cuts}
    seen = {e.target.node}
    frontier = [e.target.node]
    while frontier:
        n = frontier.pop()
        if n == e.source.node:
            return True
        for a, b in arcs:
            if a == n and b not in seen:
                seen.add(b)
                frontier.append(b)
    return False


def _node_demand(diagram: Diagram, node: str, state: _State,
                 query: Mapping, assumed: Mapping) -> tuple:
    """Joined functionality demand on ``node``: query values, edge demands and
    assumed cut levels; unconstrained components sit at their poset bottom."""
    fun = diagram._fun_poset(node)
    values = []
    exposed_vals: dict = {}
    for p, name in diagram.exposed_functionality:
        if p.node == node:
            k = p.key()
            poset = fun.component(p.component)
            v = query[name]
            exposed_vals[k] = poset.join(exposed_vals[k], v) if k in exposed_vals else v
    assumed_by_port: dict = {}
    for idx, level in assumed.items():
        tp = diagram.edges[idx].target
        if tp.node == node:
            k = tp.key()
            poset = fun.component(tp.component)
            assumed_by_port[k] = poset.join(assumed_by_port[k], level) \
                if k in assumed_by_port else level
    for comp_name, poset in fun.components:
        key = (node, comp_name)
        val = None
        for candidate in (exposed_vals.get(key), state.pending.get(key),
                          assumed_by_port.get(key)):
            if candidate is None:
                continue
            val = candidate if val is None else poset.join(val, candidate)
        if val is None:
            try:
                val = poset.bottom()
            except UnsupportedOrderOperation:
                raise DiagramError(
                    f"functionality component {key} is unconstrained and has no bottom")
        values.append(val)
    return tuple(values)


def _distribute(diagram: Diagram, node: str, state: _State, require: tuple,
                cut_set: set, out_edges: Mapping) -> None:
    """Route a resolved node's required resources to edges and exposed ports."""
    res = diagram._res_poset(node)
    for comp_idx, (comp_name, _) in enumerate(res.components):
        key = (node, comp_name)
        value = require[comp_idx]
        for edge_idx in out_edges.get(key, ()):
            e = diagram.edges[edge_idx]
            if edge_idx in cut_set:
                state.cut_demand[edge_idx] = value
            else:
                tkey = e.target.key()
                tposet = diagram._fun_poset(e.target.node).component(e.target.component)
                state.pending[tkey] = tposet.join(state.pending[tkey], value) \
                    if tkey in state.pending else value
        for p, name in diagram.exposed_resources:
            if p.key() == key:
                state.exposed[name] = value


def _propagate(diagram: Diagram, order: list, cuts: list, assumed: Mapping,
               query: Mapping) -> list:
    out_edges: dict = {}
    for i, e in enumerate(diagram.edges):
        out_edges.setdefault(e.source.key(), []).append(i)
    cut_set = set(cuts)
    states = [_State({}, {}, {}, {})]
    for node in order:
        mdpi = diagram.nodes[node]
        next_states = []
        for st in states:
            f_node = _node_demand(diagram, node, st, query, assumed)
            front = mdpi.h(f_node)
            for point, labs in zip(front.points, front.labels):
                st2 = st.clone()
                st2.assignment[node] = tuple(labs)
                _distribute(diagram, node, st2, point, cut_set, out_edges)
                next_states.append(st2)
        states = next_states
        if not states:
            break
    return states


def solve(diagram: Diagram, query, max_iterations: int = 10_000) -> QuerySolution:
    """Answer a co-design query: fix the exposed functionality at ``query``
    (a tuple in declaration order) and return the minimal exposed-resource
    antichain with design annotations."""
    fun = diagram.functionality
    query = tuple(query)
    fun.validate(query)
    qmap = {name: v for (_, name), v in zip(diagram.exposed_functionality, query)}

    order, cuts = _plan(diagram)
    bottom_assumed = {}
    for i in cuts:
        tp = diagram.edges[i].target
        poset = diagram._fun_poset(tp.node).component(tp.component)
        try:
            bottom_assumed[i] = poset.bottom()
        except UnsupportedOrderOperation:
            raise DiagramError(
                f"loop cut on port {tp.key()} needs a poset with a bottom element")

    res_poset = diagram.resource
    final_states: list[_State] = []
    seen = set()
    queue = [bottom_assumed]
    seen.add(_assumed_key(bottom_assumed))
    iterations = 0
    last_levels = list(bottom_assumed.values())
    while queue:
        assumed = queue.pop(0)
        iterations += 1
        if iterations > max_iterations:
            raise FixedPointDivergence(
                f"loop iteration exceeded {max_iterations} rounds", last_levels)
        last_levels = list(assumed.values())
        for st in _propagate(diagram, order, cuts, assumed, qmap):
            ok = True
            raised = dict(assumed)
            for i in cuts:
                tp = diagram.edges[i].target
                poset = diagram._fun_poset(tp.node).component(tp.component)
                demand = st.cut_demand.get(i, bottom_assumed[i])
                if not poset.leq(demand, assumed[i]):
                    ok = False
                    raised[i] = poset.join(assumed[i], demand)
            if ok:
                final_states.append(st)
            else:
                # iterates only ascend: every raised level joins the old one
                key = _assumed_key(raised)
                if key not in seen:
                    seen.add(key)
                    queue.append(raised)

    points = []
    anns = []
    for st in final_states:
        missing = [name for _, name in diagram.exposed_resources if name not in st.exposed]
        if missing:
            raise DiagramError(f"exposed resource ports never resolved: {missing}")
        points.append(tuple(st.exposed[name] for _, name in diagram.exposed_resources))
        anns.append(dict(st.assignment))
    mins, merged = pareto_min(points, res_poset, annotations=anns)
    merged = [_dedup_assignments(m) for m in merged]
    return QuerySolution(
        functionality=fun, query=query, resource=res_poset,
        antichain=Antichain(poset=res_poset, points=tuple(mins)),
        designs=tuple(tuple(m) for m in merged), iterations=iterations)


def _dedup_assignments(assignments: list) -> list:
    out = []
    seen = set()
    for a in assignments:
        key = tuple(sorted((n, tuple(l)) for n, l in a.items()))
        if key not in seen:
            seen.add(key)
            out.append(a)
    return out


def _assumed_key(assumed: Mapping) -> tuple:
    return tuple(sorted(assumed.items(), key=lambda kv: kv[0]))


# ---------------------------------------------------------------------------
# Brute-force reference: exhaustive enumeration plus final Pareto filter.


def enumerate_solve(diagram: Diagram, query) -> QuerySolution:
    """Enumerate every combination of implementation labels across table
    nodes, apply adder-like nodes functionally, check every edge and query
    constraint, and Pareto-filter the exposed resources. Exponential; the
    oracle the solver is tested against."""
    fun = diagram.functionality
    query = tuple(query)
    fun.validate(query)
    qmap = {name: v for (_, name), v in zip(diagram.exposed_functionality, query)}

    table_nodes = sorted(n for n, m in diagram.nodes.items() if not isinstance(m, AdderMdpi))
    det_nodes = sorted(n for n in diagram.nodes if n not in table_nodes)

    det_arcs = {(a, b) for a, b in diagram.demand_arcs() if b in det_nodes}
    det_order = _topological_order(det_nodes,
                                   {(a, b) for a, b in det_arcs if a in det_nodes})
    if det_order is None:
        raise DiagramError("adder-like nodes must not form cycles among themselves")

    label_sets = [list(diagram.nodes[n].labels()) for n in table_nodes]
    points = []
    anns = []
    for combo in itertools.product(*label_sets):
        chosen = dict(zip(table_nodes, combo))
        provides: dict = {}
        requires: dict = {}
        for n, lab in chosen.items():
            provides[n] = diagram.nodes[n].provide(lab)
            requires[n] = diagram.nodes[n].require(lab)
        feasible = True
        # resolve adder-like nodes in dependency order
        for n in det_order:
            f_parts = []
            fun_poset = diagram._fun_poset(n)
            for comp_name, poset in fun_poset.components:
                val = None
                if (Port(n, comp_name).key()) in [p.key() for p, _ in diagram.exposed_functionality]:
                    name = next(name for p, name in diagram.exposed_functionality
                                if p.key() == (n, comp_name))
                    val = qmap[name]
                for e in diagram.edges:
                    if e.target.key() == (n, comp_name):
                        src_val = _component_value(diagram, requires, e.source)
                        if src_val is None:
                            feasible = False
                            break
                        val = src_val if val is None else poset.join(val, src_val)
                if not feasible:
                    break
                if val is None:
                    val = poset.bottom()
                f_parts.append(val)
            if not feasible:
                break
            f_n = tuple(f_parts)
            req, _lab = diagram.nodes[n].respond(f_n)
            provides[n] = f_n
            requires[n] = req
        if not feasible:
            continue
        # every edge constraint: source requirement within target provision
        for e in diagram.edges:
            if e.target.node in det_nodes:
                continue  # absorbed exactly by construction above
            sv = _component_value(diagram, requires, e.source)
            tposet = diagram._fun_poset(e.target.node).component(e.target.component)
            tv = provides[e.target.node][diagram._fun_poset(e.target.node).index(e.target.component)]
            if not tposet.leq(sv, tv):
                feasible = False
                break
        if not feasible:
            continue
        # query constraints on exposed functionality of table nodes
        for p, name in diagram.exposed_functionality:
            if p.node in det_nodes:
                continue
            poset = diagram._fun_poset(p.node).component(p.component)
            pv = provides[p.node][diagram._fun_poset(p.node).index(p.component)]
            if not poset.leq(qmap[name], pv):
                feasible = False
                break
        if not feasible:
            continue
        point = tuple(_component_value(diagram, requires, p)
                      for p, _ in diagram.exposed_resources)
        points.append(point)
        anns.append({n: (lab,) for n, lab in chosen.items()})

    res_poset = diagram.resource
    mins, merged = pareto_min(points, res_poset, annotations=anns)
    merged = [_dedup_assignments(m) for m in merged]
    return QuerySolution(
        functionality=fun, query=query, resource=res_poset,
        antichain=Antichain(poset=res_poset, points=tuple(mins)),
        designs=tuple(tuple(m) for m in merged), iterations=0)


def _component_value(diagram: Diagram, requires: Mapping, port: Port):
    if port.node not in requires:
        return None
    res = diagram._res_poset(port.node)
    return requires[port.node][res.index(port.component)]


# ---------------------------------------------------------------------------
# Declarative JSON form.


def diagram_from_json(obj: dict, builders: Mapping[str, Callable] | None = None) -> Diagram:
    """Load a diagram from its JSON description. ``builders`` resolves nodes
    of kind "builder" to interfaces constructed elsewhere (e.g. from cached
    simulation sweeps)."""
    builders = builders or {}
    nodes = {}
    for name, spec in obj["nodes"].items():
        kind = spec.get("kind", "table")
        if kind == "table":
            fun = Product(components=tuple(
                (n, poset_from_descriptor(d)) for n, d in spec["functionality"]))
            res = Product(components=tuple(
                (n, poset_from_descriptor(d)) for n, d in spec["resource"]))
            rows = tuple(
                (row["label"], fun.point_from_json(row["provides"]),
                 res.point_from_json(row["requires"]))
                for row in spec["implementations"])
            nodes[name] = TableMdpi(functionality=fun, resource=res, rows=rows)
        elif kind == "adder":
            nodes[name] = AdderMdpi(port_names=tuple(spec["ports"]),
                                    total_name=spec.get("total", "total"))
        elif kind == "builder":
            fn = builders.get(spec["builder"])
            if fn is None:
                raise DiagramError(f"no builder registered for {spec['builder']!r}")
            nodes[name] = fn(**spec.get("args", {}))
        else:
            raise DiagramError(f"unknown node kind {kind!r}")
    edges = tuple(Edge(source=Port(*e["source"]), target=Port(*e["target"]))
                  for e in obj["edges"])
    exposed_f = tuple((Port(*e["port"]), e["name"]) for e in obj["exposed_functionality"])
    exposed_r = tuple((Port(*e["port"]), e["name"]) for e in obj["exposed_resources"])
    return Diagram(nodes=nodes, edges=edges,
                   exposed_functionality=exposed_f, exposed_resources=exposed_r)
