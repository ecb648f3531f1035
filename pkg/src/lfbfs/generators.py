"""Seeded random instances for sweeps and property tests."""

from __future__ import annotations

import random

from .graph import DynamicGraph, TopologyEvent, apply_event, GraphError
from .verification import parent_graph


def random_connected_graph(
    n: int,
    seed: int,
    extra: float = 0.3,
    weights: tuple[int, int] | None = None,
) -> DynamicGraph:
    """Random spanning tree plus each remaining pair with probability ``extra``.

    Node 0 is the root. ``weights`` draws integer weights from an inclusive
    range; without it every edge weighs 1.
    """
    rng = random.Random(seed)
    order = list(range(1, n))
    rng.shuffle(order)
    placed = [0]
    pairs = set()
    for v in order:
        u = rng.choice(placed)
        pairs.add((min(u, v), max(u, v)))
        placed.append(v)
    for u in range(n):
        for v in range(u + 1, n):
            if (u, v) not in pairs and rng.random() < extra:
                pairs.add((u, v))
    edges = sorted(pairs)
    rng.shuffle(edges)
    lo, hi = weights or (1, 1)
    return DynamicGraph.build(
        range(n), [(u, v, float(rng.randint(lo, hi))) for u, v in edges], 0
    )


def random_crash(g: DynamicGraph, rng: random.Random, at_step: int = 0, tree=None) -> TopologyEvent | None:
    """A crash that keeps the graph connected, or None if none exists.

    With a configuration ``tree`` given, tree edges and inner nodes are
    preferred so the event actually detaches a subtree.
    """
    candidates = [TopologyEvent.crash_edge(u, v, at_step) for u, v, _ in g.edges()]
    candidates += [TopologyEvent.crash_node(v, at_step) for v in g.nodes if v != g.root]
    rng.shuffle(candidates)
    if tree is not None:
        parents = parent_graph(tree)
        kids = set(parents.values())

        def hits(e: TopologyEvent) -> bool:
            if e.kind.value == "crash_edge":
                u, v = e.subjects
                return parents.get(u) == v or parents.get(v) == u
            return e.subjects[0] in kids

        candidates.sort(key=lambda e: not hits(e))
    for e in candidates:
        try:
            apply_event(g, e)
        except GraphError:
            continue
        return e
    return None
