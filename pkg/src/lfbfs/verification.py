"""Predicates over configurations and traces, plus brute-force oracles."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping

from .engine import Configuration, ExecutionTrace, replay
from .graph import DynamicGraph, EventKind, TopologyEvent
from .protocol import NodeState, Status

TOP = math.inf  # flow at the root; beats every edge weight

Edge = frozenset  # frozenset({u, v})


class PreconditionViolated(ValueError):
    pass


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Verdict:
    holds: bool
    witness: str | None = None
    name: str = ""

    def __post_init__(self) -> None:
        if not self.holds and not self.witness:
            raise ValueError("a failed verdict needs a witness")

    def __bool__(self) -> bool:
        return self.holds

    def summary(self) -> str:
        """Machine-readable one-liner: ``VERDICT <name> <holds> [witness=...]``."""
        line = f"VERDICT {self.name or 'check'} {str(self.holds).lower()}"
        if self.witness:
            line += f" witness={self.witness}"
        return line


def _ok(name: str) -> Verdict:
    return Verdict(True, None, name)


def _fail(name: str, witness: str) -> Verdict:
    return Verdict(False, witness, name)


def parent_graph(c: Configuration) -> dict[int, int]:
    """Non-root node -> node designated by its parent port, when that port is live."""
    out = {}
    for v in c.graph.ports:
        if v == c.graph.root:
            continue
        u = c.parent_of(v)
        if u is not None:
            out[v] = u
    return out


def find_cycle(parents: Mapping[int, int]) -> list[int] | None:
    color: dict[int, int] = {}
    for start in parents:
        path = []
        v = start
        while v in parents and v not in color:
            color[v] = 1
            path.append(v)
            v = parents[v]
        if color.get(v) == 1 and v in path:
            return path[path.index(v):]
        for x in path:
            color[x] = 2
    return None


def loop_free(c: Configuration) -> Verdict:
    cycle = find_cycle(parent_graph(c))
    if cycle is None:
        return _ok("loop_free")
    return _fail("loop_free", "cycle=" + ",".join(map(str, cycle)))


def is_loop_free(c: Configuration) -> bool:
    return find_cycle(parent_graph(c)) is None


def bfs_oracle(g: DynamicGraph) -> dict[int, int]:
    dist = {g.root: 0}
    queue = deque([g.root])
    while queue:
        v = queue.popleft()
        for p in g.ports[v].values():
            if p.neighbor not in dist:
                dist[p.neighbor] = dist[v] + 1
                queue.append(p.neighbor)
    return dist


def _distances(g: DynamicGraph) -> dict[int, int]:
    cached = g.__dict__.get("_bfs")
    if cached is None:
        cached = bfs_oracle(g)
        object.__setattr__(g, "_bfs", cached)
    return cached


def _legit_failure(c: Configuration, strict: bool) -> str | None:
    g = c.graph
    dist = _distances(g)
    for v in sorted(g.ports):
        s = c.states[v]
        if v == g.root:
            if s.parent is not None or s.level != 0 or s.status is not Status.N or s.new_level != 0:
                return f"root={v}"
            continue
        if s.status is not Status.N or s.level != dist.get(v):
            return f"node={v}"
        u = c.parent_of(v)
        if u is None or s.level != c.states[u].level + 1:
            return f"node={v}"
        if strict and s.new_level != s.level:
            return f"node={v}"
    return None


def legitimate(c: Configuration, strict: bool = False) -> Verdict:
    """Correct BFS tree with every node neutral.

    ``strict`` also demands ``new_level == level`` at non-roots, which the
    steady state reaches once pending level corrections have run.
    """
    bad = _legit_failure(c, strict)
    return _ok("legitimate") if bad is None else _fail("legitimate", bad)


def is_legitimate(c: Configuration) -> bool:
    return _legit_failure(c, False) is None


def coherent(c: Configuration) -> Verdict:
    g = c.graph
    for v in sorted(g.ports):
        s = c.states[v]
        if v == g.root:
            if s.level != 0 or s.status is not Status.N:
                return _fail("coherent", f"root={v}")
            continue
        u = c.parent_of(v)
        if u is None:
            continue  # orphans are exempt
        if not (c.states[u].level + 1 <= s.level and s.new_level >= s.level):
            return _fail("coherent", f"node={v}")
    return _ok("coherent")


def legitimate_configuration(g: DynamicGraph) -> Configuration:
    """The terminal legitimate configuration: BFS levels, smallest-port parents."""
    dist = bfs_oracle(g)
    if len(dist) != g.n:
        raise PreconditionViolated("graph is not connected")
    states = {}
    for v in g.nodes:
        if v == g.root:
            states[v] = NodeState(None, Status.N, 0, 0)
            continue
        port = min(
            label for label, p in g.ports[v].items() if dist[p.neighbor] == dist[v] - 1
        )
        states[v] = NodeState(port, Status.N, dist[v], dist[v])
    return Configuration(g, states)


def subtree(parents: Mapping[int, int], top: int) -> set[int]:
    """``top`` and every node whose parent chain reaches it."""
    kids: dict[int, list[int]] = {}
    for v, u in parents.items():
        kids.setdefault(u, []).append(v)
    out = {top}
    stack = [top]
    while stack:
        for w in kids.get(stack.pop(), ()):
            if w not in out:
                out.add(w)
                stack.append(w)
    return out


def detached_subtree(c: Configuration, e: TopologyEvent) -> set[int]:
    """Nodes cut off from the root's tree by ``e``, computed on the pre-event tree."""
    parents = parent_graph(c)
    if e.kind is EventKind.CRASH_EDGE:
        u, v = e.subjects
        if parents.get(v) == u:
            return subtree(parents, v)
        if parents.get(u) == v:
            return subtree(parents, u)
        return set()
    if e.kind is EventKind.CRASH_NODE:
        (u,) = e.subjects
        return subtree(parents, u) - {u}
    raise PreconditionViolated(f"{e.kind.value} is not a crash event")


def _single_crash(t: ExecutionTrace, e: TopologyEvent) -> tuple[int, list[Configuration]]:
    if not e.kind.in_lambda:
        raise PreconditionViolated(f"{e.kind.value} is outside the crash class")
    if [ev for _, ev in t.events] != [e]:
        raise PreconditionViolated("the trace must contain exactly this one event")
    if not is_legitimate(t.initial):
        raise PreconditionViolated("the trace must start legitimate")
    configs = t.configs if t.configs is not None else replay(t)
    at = t.events[0][0]
    # index into configs of the last configuration before the event
    pre = sum(1 for rec in t.steps if rec.index < at)
    return pre, configs


def passage_holds(t: ExecutionTrace, e: TopologyEvent) -> Verdict:
    """Only nodes of the detached subtree ever change their parent after the crash."""
    pre, configs = _single_crash(t, e)
    before = configs[pre]
    allowed = detached_subtree(before, e)
    for i in range(pre, len(configs) - 1):
        a, b = configs[i], configs[i + 1]
        for v, s in b.states.items():
            if v in a.states and a.states[v].parent != s.parent and v not in allowed:
                return _fail("passage", f"node={v},step={t.steps[i].index}")
    return _ok("passage")


def outside_untouched(t: ExecutionTrace, e: TopologyEvent) -> Verdict:
    """Stricter diff: nodes outside the detached subtree keep every register unchanged."""
    pre, configs = _single_crash(t, e)
    before = configs[pre]
    allowed = detached_subtree(before, e)
    for c in configs[pre:] + ([t.final] if t.final is not None else []):
        for v, s in c.states.items():
            if v not in allowed and v in before.states and s != before.states[v]:
                return _fail("outside_untouched", f"node={v}")
    return _ok("outside_untouched")


# --- metric oracles -------------------------------------------------------


def widest_path_oracle(g: DynamicGraph) -> dict[int, float]:
    """Best bottleneck value over all root paths, per node (root gets TOP)."""
    best = {v: 0.0 for v in g.ports}
    best[g.root] = TOP
    heap = [(-TOP, g.root)]
    done = set()
    while heap:
        neg, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        for p in g.ports[v].values():
            cand = min(-neg, p.weight)
            if cand > best[p.neighbor]:
                best[p.neighbor] = cand
                heapq.heappush(heap, (-cand, p.neighbor))
    return best


def widest_path_tree(g: DynamicGraph) -> dict[int, int]:
    """Canonical widest-path tree as a parent map (node -> parent node).

    A neighbor ``u`` may serve as parent of ``v`` when it delivers ``v``'s best
    bottleneck value. Among those, the one with the fewest hops along such
    links wins, then the smallest port label.
    """
    fw = widest_path_oracle(g)

    def feeds(u: int, v: int, w: float) -> bool:
        return min(fw[u], w) == fw[v]

    hops = {g.root: 0}
    queue = deque([g.root])
    while queue:
        u = queue.popleft()
        for label, p in sorted(g.ports[u].items()):
            v = p.neighbor
            if v not in hops and v != g.root and feeds(u, v, p.weight):
                hops[v] = hops[u] + 1
                queue.append(v)
    parents = {}
    for v in g.nodes:
        if v == g.root:
            continue
        cands = [
            (hops[p.neighbor], label, p.neighbor)
            for label, p in g.ports[v].items()
            if p.neighbor in hops and feeds(p.neighbor, v, p.weight)
            and hops[p.neighbor] == hops[v] - 1
        ]
        parents[v] = min(cands)[2]
    return parents


def tree_edges(parents: Mapping[int, int]) -> frozenset[Edge]:
    return frozenset(frozenset((v, u)) for v, u in parents.items())


def _tree_parents(g: DynamicGraph, edges: Iterable[Edge]) -> dict[int, int] | None:
    """Orient an edge set away from the root; None unless it is a spanning tree of ``g``."""
    adj: dict[int, list[int]] = {v: [] for v in g.ports}
    count = 0
    for e in edges:
        u, v = tuple(e)
        if u not in adj or v not in adj or not g.has_edge(u, v):
            return None
        adj[u].append(v)
        adj[v].append(u)
        count += 1
    if count != g.n - 1:
        return None
    parents: dict[int, int] = {}
    seen = {g.root}
    stack = [g.root]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                parents[v] = u
                stack.append(v)
    return parents if len(seen) == g.n else None


def tree_flows(g: DynamicGraph, parents: Mapping[int, int]) -> dict[int, float]:
    fw = {g.root: TOP}

    def get(v: int) -> float:
        if v not in fw:
            u = parents[v]
            fw[v] = min(get(u), g.weight(u, v))
        return fw[v]

    for v in g.ports:
        get(v)
    return fw


def _spanning_clauses(g: DynamicGraph, edges: frozenset[Edge], name: str) -> Verdict | None:
    if len(edges) != g.n - 1:
        return _fail(name, f"edges={len(edges)},expected={g.n - 1}")
    covered = {x for e in edges for x in e}
    if g.n > 1 and covered != set(g.ports):
        missing = sorted(set(g.ports) - covered)
        return _fail(name, "uncovered=" + ",".join(map(str, missing)))
    return None


def check_M_maxflow(g: DynamicGraph, edges: Iterable[Edge]) -> Verdict:
    """Spanning tree in which every node gets its best achievable bottleneck value."""
    name = "M_maxflow"
    edges = frozenset(frozenset(e) for e in edges)
    bad = _spanning_clauses(g, edges, name)
    if bad is not None:
        return bad
    parents = _tree_parents(g, edges)
    if parents is None:
        return _fail(name, "not_a_spanning_tree")
    fw = tree_flows(g, parents)
    for v in g.nodes:
        if v == g.root:
            continue
        local = max(min(fw[p.neighbor], p.weight) for p in g.ports[v].values())
        if fw[v] != local:
            return _fail(name, f"node={v},fw={fw[v]:g},local_best={local:g}")
    best = widest_path_oracle(g)
    for v in g.nodes:
        if fw[v] != best[v]:
            return _fail(name, f"node={v},fw={fw[v]:g},optimal={best[v]:g}")
    return _ok(name)


def max_degree(n_nodes: Iterable[int], edges: Iterable[Edge]) -> int:
    deg = {v: 0 for v in n_nodes}
    for e in edges:
        for x in e:
            deg[x] += 1
    return max(deg.values(), default=0)


def min_degree_tree_oracle(g: DynamicGraph, limit: int = 10) -> tuple[frozenset[Edge], int]:
    """Exhaustive search for a spanning tree of least maximum degree.

    Degree bounds are tried in increasing order; for each bound the spanning
    trees are enumerated edge by edge with union-find, pruning any partial tree
    that already exceeds the bound. The first bound admitting a tree is optimal.
    """
    if g.n > limit:
        raise TooLarge(f"{g.n} nodes exceeds the enumeration limit of {limit}")
    if g.n == 1:
        return frozenset(), 0
    nodes = g.nodes
    edges = [(u, v) for u, v, _ in g.edges()]
    need = g.n - 1

    for bound in range(1, g.n):
        found = _tree_with_degree_at_most(nodes, edges, need, bound)
        if found is not None:
            return frozenset(frozenset(e) for e in found), bound
    raise PreconditionViolated("graph is not connected")


def _tree_with_degree_at_most(nodes, edges, need, bound):
    parent = {v: v for v in nodes}
    deg = {v: 0 for v in nodes}
    chosen: list[tuple[int, int]] = []

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    def search(i: int) -> bool:
        if len(chosen) == need:
            return True
        if len(edges) - i < need - len(chosen):
            return False
        u, v = edges[i]
        ru, rv = find(u), find(v)
        if ru != rv and deg[u] < bound and deg[v] < bound:
            parent[ru] = rv
            deg[u] += 1
            deg[v] += 1
            chosen.append((u, v))
            if search(i + 1):
                return True
            chosen.pop()
            deg[u] -= 1
            deg[v] -= 1
            parent[ru] = ru
        return search(i + 1)

    return list(chosen) if search(0) else None


def spanning_trees(g: DynamicGraph) -> Iterable[frozenset[Edge]]:
    """Every spanning tree of ``g`` by plain subset enumeration (tiny graphs only)."""
    edges = [frozenset((u, v)) for u, v, _ in g.edges()]
    for combo in combinations(edges, g.n - 1):
        if _tree_parents(g, combo) is not None:
            yield frozenset(combo)


def check_M_mindeg(g: DynamicGraph, edges: Iterable[Edge]) -> Verdict:
    name = "M_mindeg"
    edges = frozenset(frozenset(e) for e in edges)
    bad = _spanning_clauses(g, edges, name)
    if bad is not None:
        return bad
    if _tree_parents(g, edges) is None:
        return _fail(name, "not_a_spanning_tree")
    _, best = min_degree_tree_oracle(g)
    got = max_degree(g.ports, edges)
    if got != best:
        return _fail(name, f"degree={got},optimal={best}")
    return _ok(name)
