"""Temporal directed graphs and knot analytics.

A temporal edge is a directed link stamped with the round in which it was
present; the same link reappearing in a later round is a distinct event.
Knot detection ignores the stamps: a knot is a strongly connected component
of the projected static digraph that has no incoming arcs and at least two
members. Out-arcs leaving a knot are harmless, a single arc entering it
destroys it.

Two knot finders are provided on purpose. ``find_knots`` condenses the graph
into its SCC DAG and keeps the source components; ``reachability_knots`` is a
deliberately naive per-node reachability check kept structurally independent
so the two can cross-validate each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

ProcessId = int

_NO_EDGES: frozenset = frozenset()
_NO_NODES: frozenset = frozenset()


@dataclass(frozen=True, slots=True)
class TemporalEdge:
    """A directed link present in one particular round (state)."""

    src: ProcessId
    dst: ProcessId
    state: int

    def __post_init__(self) -> None:
        if self.src == self.dst:
            raise ValueError(f"self-loop {self.src}->{self.dst} is not a valid link")
        if self.src < 0 or self.dst < 0:
            raise ValueError("process ids are non-negative integers")
        if self.state < 0:
            raise ValueError("state index is a non-negative integer")


@dataclass(frozen=True)
class ObservationGraph:
    """An immutable bag of temporal edges plus their incident processes.

    Serves both as a whole-computation union and as a per-process local
    observation graph; in the latter case ``nodes`` also contains the owner,
    which may not be incident to any edge yet. Construction normalizes
    ``nodes`` to always cover every edge endpoint.
    """

    edges: frozenset = _NO_EDGES
    nodes: frozenset = _NO_NODES

    def __post_init__(self) -> None:
        edges = frozenset(self.edges)
        nodes = frozenset(self.nodes)
        endpoints = {e.src for e in edges} | {e.dst for e in edges}
        if not isinstance(self.edges, frozenset):
            object.__setattr__(self, "edges", edges)
        if not endpoints <= nodes or not isinstance(self.nodes, frozenset):
            object.__setattr__(self, "nodes", nodes | endpoints)

    @classmethod
    def from_edges(cls, edges: Iterable[TemporalEdge],
                   extra_nodes: Iterable[ProcessId] = ()) -> "ObservationGraph":
        return cls(edges=frozenset(edges), nodes=frozenset(extra_nodes))

    def issubset(self, other: "ObservationGraph") -> bool:
        return self.edges <= other.edges and self.nodes <= other.nodes

    def to_text(self) -> str:
        """Edge-list serialization, one ``src dst state`` line per edge."""
        ordered = sorted(self.edges, key=lambda e: (e.state, e.src, e.dst))
        return "".join(f"{e.src} {e.dst} {e.state}\n" for e in ordered)

    @classmethod
    def from_text(cls, text: str) -> "ObservationGraph":
        return cls.from_edges(parse_edge_lines(text.splitlines()))


def parse_edge_lines(lines: Iterable[str]) -> Iterator[TemporalEdge]:
    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"malformed edge line: {raw!r}")
        src, dst, state = (int(p) for p in parts)
        yield TemporalEdge(src, dst, state)


@dataclass(frozen=True)
class Knot:
    """At least two processes forming a source SCC of some observation graph.

    Canonical form: members sorted ascending, so equality is set equality.
    """

    members: tuple

    def __post_init__(self) -> None:
        members = tuple(sorted(set(self.members)))
        if len(members) < 2:
            raise ValueError("a knot has at least two members")
        object.__setattr__(self, "members", members)

    def __contains__(self, pid: ProcessId) -> bool:
        return pid in self.members

    def __len__(self) -> int:
        return len(self.members)


def merge(a: ObservationGraph, b: ObservationGraph) -> ObservationGraph:
    """Union of two observation graphs (commutative, associative, idempotent)."""
    return ObservationGraph(edges=a.edges | b.edges, nodes=a.nodes | b.nodes)


def merge_all(graphs: Iterable[ObservationGraph]) -> ObservationGraph:
    edges: set = set()
    nodes: set = set()
    for g in graphs:
        edges |= g.edges
        nodes |= g.nodes
    return ObservationGraph(edges=frozenset(edges), nodes=frozenset(nodes))


@dataclass(frozen=True)
class Condensation:
    """SCC partition of a digraph plus the arcs between components.

    ``components`` are canonical (each sorted, the list sorted); ``arcs``
    holds (i, j) pairs of component indices and is acyclic by construction.
    """

    components: tuple
    arcs: frozenset


def _strongly_connected_components(nodes: list, adjacency: Mapping) -> list:
    """Iterative Tarjan over the given nodes; roots visited in list order."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    out: list = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(adjacency.get(root, ())))]
        while work:
            v, neighbours = work[-1]
            for w in neighbours:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(adjacency.get(w, ()))))
                    break
                if w in on_stack and index[w] < low[v]:
                    low[v] = index[w]
            else:
                work.pop()
                if work:
                    u = work[-1][0]
                    if low[v] < low[u]:
                        low[u] = low[v]
                if low[v] == index[v]:
                    component = []
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        component.append(w)
                        if w == v:
                            break
                    out.append(component)
    return out


def _condense(nodes: Iterable[ProcessId], adjacency: Mapping) -> Condensation:
    order = sorted(nodes)
    raw = _strongly_connected_components(order, adjacency)
    components = tuple(sorted(tuple(sorted(c)) for c in raw))
    member_of = {v: i for i, comp in enumerate(components) for v in comp}
    arcs = set()
    for u in order:
        cu = member_of[u]
        for w in adjacency.get(u, ()):
            cw = member_of[w]
            if cw != cu:
                arcs.add((cu, cw))
    return Condensation(components=components, arcs=frozenset(arcs))


def _projected_adjacency(edges: Iterable[TemporalEdge]) -> dict:
    """Collapse temporal parallels: one static arc per (src, dst) pair."""
    adjacency: dict = {}
    for e in edges:
        adjacency.setdefault(e.src, set()).add(e.dst)
    return adjacency


def condense(g: ObservationGraph) -> Condensation:
    """Partition g's nodes into SCCs of the projected digraph.

    State stamps are ignored; parallel temporal edges collapse to one arc.
    """
    return _condense(g.nodes, _projected_adjacency(g.edges))


def knots_from_adjacency(nodes: Iterable[ProcessId], adjacency: Mapping,
                         min_size: int = 2) -> list:
    """Source SCCs of size >= min_size over a prebuilt static adjacency.

    The adjacency maps node -> iterable of successors. Result is sorted by
    canonical member list. This is the single knot-extraction routine behind
    ``find_knots``; the engine calls it directly on its incremental
    projection to avoid rebuilding graphs.
    """
    if min_size < 2:
        raise ValueError("min_size must be at least 2")
    condensation = _condense(nodes, adjacency)
    entered = {j for _, j in condensation.arcs}
    return [Knot(comp)
            for i, comp in enumerate(condensation.components)
            if i not in entered and len(comp) >= min_size]


def find_knots(g: ObservationGraph, min_size: int = 2) -> list:
    """Every knot of g: source SCCs of the projection with >= min_size members."""
    return knots_from_adjacency(g.nodes, _projected_adjacency(g.edges), min_size)


def reachability_knots(g: ObservationGraph, min_size: int = 2) -> list:
    """Brute-force knot finder used as an independent oracle.

    Computes a full reachability set per node. A node belongs to a knot
    exactly when every node that can reach it can also be reached back from
    it (any one-way arc into its neighbourhood disqualifies it, one-way arcs
    out of it do not). Mutually reachable knot nodes are grouped into one
    knot; groups below min_size are dropped. Same contract and ordering as
    ``find_knots``, but no condensation machinery is shared.
    """
    if min_size < 2:
        raise ValueError("min_size must be at least 2")
    nodes = sorted(g.nodes)
    successors: dict = {p: set() for p in nodes}
    for e in g.edges:
        successors[e.src].add(e.dst)

    def reach_from(start: ProcessId) -> set:
        seen = {start}
        frontier = [start]
        while frontier:
            nxt = []
            for u in frontier:
                for w in successors[u]:
                    if w not in seen:
                        seen.add(w)
                        nxt.append(w)
            frontier = nxt
        return seen

    reach = {p: reach_from(p) for p in nodes}
    knot_nodes = [p for p in nodes
                  if all(q in reach[p] for q in nodes if p in reach[q])]
    grouped: list = []
    assigned: set = set()
    for p in knot_nodes:
        if p in assigned:
            continue
        group = [q for q in knot_nodes if q in reach[p] and p in reach[q]]
        assigned.update(group)
        if len(group) >= min_size:
            grouped.append(Knot(group))
    grouped.sort(key=lambda k: k.members)
    return grouped


def computation_graph(schedule, i: int) -> ObservationGraph:
    """Union of the first i states of a schedule, stamps preserved.

    ``i`` counts whole states: 0 yields the empty graph, ``schedule.horizon``
    the union of everything. With 1-based state indices this is "the graph
    through state i".
    """
    if not 0 <= i <= len(schedule.states):
        raise IndexError(f"state index {i} outside 0..{len(schedule.states)}")
    return ObservationGraph.from_edges(
        e for state in schedule.states[:i] for e in state)
