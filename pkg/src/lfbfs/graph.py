"""Weighted undirected dynamic network with stable port labels.

Nodes are anonymous integer handles. The protocol layer never sees them; it
only sees port labels, which are allocated per node from a monotone counter so
that surviving edges keep their labels across topology changes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from enum import Enum
from typing import Iterable, Iterator, Mapping


class GraphError(ValueError):
    """Base class for rejected graph constructions and topology events."""


class DisconnectingEvent(GraphError):
    pass


class RootCrash(GraphError):
    pass


class MissingSubject(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


@dataclass(frozen=True)
class Port:
    """One end of an edge as seen from a node."""

    neighbor: int
    weight: float


@dataclass(frozen=True)
class DynamicGraph:
    root: int
    # node -> {port label -> Port}
    ports: Mapping[int, Mapping[int, Port]]
    # node -> highest port label ever handed out at that node
    label_counter: Mapping[int, int] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        nodes: Iterable[int],
        edges: Iterable[tuple[int, int, float]],
        root: int,
    ) -> DynamicGraph:
        """Build a graph; ports are numbered 1, 2, ... in edge order at each node."""
        ports: dict[int, dict[int, Port]] = {v: {} for v in nodes}
        counter = {v: 0 for v in ports}
        if root not in ports:
            raise MissingSubject(f"root {root} is not a node")
        for u, v, w in edges:
            _check_new_edge(ports, u, v, w)
            counter[u] += 1
            counter[v] += 1
            ports[u][counter[u]] = Port(v, w)
            ports[v][counter[v]] = Port(u, w)
        return cls(root, ports, counter)

    @property
    def nodes(self) -> list[int]:
        return sorted(self.ports)

    @property
    def n(self) -> int:
        return len(self.ports)

    def __contains__(self, v: object) -> bool:
        return v in self.ports

    def degree(self, v: int) -> int:
        return len(self.ports[v])

    def neighbors(self, v: int) -> list[int]:
        return [p.neighbor for _, p in sorted(self.ports[v].items())]

    def port_items(self, v: int) -> list[tuple[int, Port]]:
        return sorted(self.ports[v].items())

    def port_to(self, v: int, u: int) -> int | None:
        """Label at ``v`` of the edge leading to ``u``, or None if not adjacent."""
        for label, p in self.ports[v].items():
            if p.neighbor == u:
                return label
        return None

    def neighbor_at(self, v: int, label: int | None) -> int | None:
        if label is None:
            return None
        p = self.ports[v].get(label)
        return None if p is None else p.neighbor

    def has_edge(self, u: int, v: int) -> bool:
        return u in self.ports and self.port_to(u, v) is not None

    def weight(self, u: int, v: int) -> float:
        label = self.port_to(u, v)
        if label is None:
            raise MissingSubject(f"no edge {u}-{v}")
        return self.ports[u][label].weight

    def edges(self) -> Iterator[tuple[int, int, float]]:
        """Each undirected edge once, as (u, v, w) with u < v."""
        for u in sorted(self.ports):
            for _, p in sorted(self.ports[u].items()):
                if u < p.neighbor:
                    yield u, p.neighbor, p.weight

    def edge_set(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset((u, v)) for u, v, _ in self.edges())

    def is_connected(self) -> bool:
        return is_connected(self)

    @cached_property
    def back_ports(self) -> dict[tuple[int, int], int]:
        """(v, label at v) -> label of the same edge at the other endpoint."""
        out = {}
        for v, ps in self.ports.items():
            for label, p in ps.items():
                for back, q in self.ports[p.neighbor].items():
                    if q.neighbor == v:
                        out[v, label] = back
                        break
        return out

    def subgraph(self, keep: Iterable[frozenset[int]]) -> DynamicGraph:
        """Same nodes and port labels, restricted to the given edges."""
        keep = set(keep)
        ports = {
            v: {
                label: p
                for label, p in self.ports[v].items()
                if frozenset((v, p.neighbor)) in keep
            }
            for v in self.ports
        }
        return DynamicGraph(self.root, ports, dict(self.label_counter))


def _check_new_edge(ports: Mapping[int, Mapping[int, Port]], u: int, v: int, w: float) -> None:
    if u == v:
        raise GraphError(f"self-loop at {u}")
    for x in (u, v):
        if x not in ports:
            raise MissingSubject(f"node {x} does not exist")
    if not w > 0:
        raise GraphError(f"edge {u}-{v} has non-positive weight {w}")
    if any(p.neighbor == v for p in ports[u].values()):
        raise DuplicateEdge(f"edge {u}-{v} already present")


def is_connected(g: DynamicGraph) -> bool:
    """True iff every node is reachable from the root."""
    if g.root not in g.ports:
        return False
    seen = {g.root}
    queue = deque([g.root])
    while queue:
        v = queue.popleft()
        for p in g.ports[v].values():
            if p.neighbor not in seen:
                seen.add(p.neighbor)
                queue.append(p.neighbor)
    return len(seen) == len(g.ports)


class EventKind(str, Enum):
    CRASH_EDGE = "crash_edge"
    RECOV_EDGE = "recov_edge"
    CRASH_NODE = "crash_node"
    RECOV_NODE = "recov_node"

    @property
    def in_lambda(self) -> bool:
        """Crash events form the class for which the passage predicate is claimed."""
        return self in (EventKind.CRASH_EDGE, EventKind.CRASH_NODE)


@dataclass(frozen=True)
class TopologyEvent:
    kind: EventKind
    subjects: tuple[int, ...]
    at_step: int = 0
    weight: float | None = None
    # recov_node only: (neighbor, weight) pairs, in the order the new node labels them
    links: tuple[tuple[int, float], ...] = ()

    @classmethod
    def crash_edge(cls, u: int, v: int, at_step: int = 0) -> TopologyEvent:
        return cls(EventKind.CRASH_EDGE, (u, v), at_step)

    @classmethod
    def recov_edge(cls, u: int, v: int, weight: float, at_step: int = 0) -> TopologyEvent:
        return cls(EventKind.RECOV_EDGE, (u, v), at_step, weight=weight)

    @classmethod
    def crash_node(cls, u: int, at_step: int = 0) -> TopologyEvent:
        return cls(EventKind.CRASH_NODE, (u,), at_step)

    @classmethod
    def recov_node(
        cls, u: int, links: Iterable[tuple[int, float]], at_step: int = 0
    ) -> TopologyEvent:
        return cls(EventKind.RECOV_NODE, (u,), at_step, links=tuple(links))


def apply_event(g: DynamicGraph, e: TopologyEvent) -> DynamicGraph:
    """Return the graph after ``e``; ``g`` is left untouched.

    Raises DisconnectingEvent when the result would not be connected, so a
    rejected event never leaves a half-applied snapshot behind.
    """
    ports = {v: dict(ps) for v, ps in g.ports.items()}
    counter = dict(g.label_counter)

    if e.kind is EventKind.CRASH_EDGE:
        u, v = e.subjects
        for x in (u, v):
            if x not in ports:
                raise MissingSubject(f"node {x} does not exist")
        lu, lv = g.port_to(u, v), g.port_to(v, u)
        if lu is None or lv is None:
            raise MissingSubject(f"no edge {u}-{v}")
        del ports[u][lu]
        del ports[v][lv]
    elif e.kind is EventKind.CRASH_NODE:
        (u,) = e.subjects
        if u == g.root:
            raise RootCrash("the root never crashes")
        if u not in ports:
            raise MissingSubject(f"node {u} does not exist")
        for p in ports.pop(u).values():
            label = g.port_to(p.neighbor, u)
            del ports[p.neighbor][label]
        counter.pop(u, None)
    elif e.kind is EventKind.RECOV_EDGE:
        u, v = e.subjects
        w = e.weight if e.weight is not None else 1.0
        _check_new_edge(ports, u, v, w)
        for a, b in ((u, v), (v, u)):
            counter[a] = counter.get(a, 0) + 1
            ports[a][counter[a]] = Port(b, w)
    elif e.kind is EventKind.RECOV_NODE:
        (u,) = e.subjects
        if u in ports:
            raise DuplicateEdge(f"node {u} already present")
        if not e.links:
            raise MissingSubject(f"recovered node {u} has no neighbor")
        ports[u] = {}
        counter[u] = 0
        for v, w in e.links:
            _check_new_edge(ports, u, v, w)
            for a, b in ((u, v), (v, u)):
                counter[a] = counter.get(a, 0) + 1
                ports[a][counter[a]] = Port(b, w)
    else:  # pragma: no cover
        raise GraphError(f"unknown event kind {e.kind}")

    out = DynamicGraph(g.root, ports, counter)
    if not is_connected(out):
        raise DisconnectingEvent(f"{e.kind.value} {e.subjects} would disconnect the network")
    return out
