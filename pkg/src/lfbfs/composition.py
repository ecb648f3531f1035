"""Fair composition of a tree-building slave with the BFS master.

The slave outputs an edge set; the master runs the ordinary BFS rules on the
network restricted to those edges. When the slave's output is a spanning tree,
BFS over a tree is that tree itself, so the master ends up holding the slave's
tree while keeping its own loop-freedom and super-stabilization.

Three slaves are available. ``oracle-maxflow`` and ``oracle-mindegree`` are
recomputed from scratch every step and are therefore always correct.
``distributed-maxflow`` is a genuine self-stabilizing layer whose registers
(flow, flow parent, hop count) start arbitrary and converge by local moves.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple

from .engine import Configuration, Daemon, _RoundTracker, _Runner
from .graph import DynamicGraph, MissingSubject, Port
from .verification import (
    TOP,
    Verdict,
    check_M_maxflow,
    check_M_mindeg,
    is_legitimate,
    is_loop_free,
    min_degree_tree_oracle,
    parent_graph,
    tree_edges,
    widest_path_tree,
)

SLAVE_KINDS = ("oracle-maxflow", "oracle-mindegree", "distributed-maxflow")


class SlaveState(NamedTuple):
    flow: float  # TOP at the root, 0 marks an invalidated register
    flow_parent: int | None  # port label
    hops: int

    def __str__(self) -> str:
        p = "none" if self.flow_parent is None else str(self.flow_parent)
        f = "top" if self.flow == TOP else f"{self.flow:g}"
        return f"flow={f} flowparent={p} hops={self.hops}"


ROOT_SLAVE = SlaveState(TOP, None, 0)


@dataclass(frozen=True)
class SlaveProtocol:
    kind: str
    mindegree_limit: int = 10

    def __post_init__(self) -> None:
        if self.kind not in SLAVE_KINDS:
            raise ValueError(f"unknown slave kind {self.kind!r}")

    @property
    def distributed(self) -> bool:
        return self.kind == "distributed-maxflow"

    @property
    def check_M(self) -> Callable[[DynamicGraph, object], Verdict]:
        return check_M_mindeg if self.kind == "oracle-mindegree" else check_M_maxflow


# -- distributed max-flow layer ---------------------------------------------------


def invalid_slave(g: DynamicGraph) -> SlaveState:
    return SlaveState(0.0, None, g.n)


def slave_target(g: DynamicGraph, slave: Mapping[int, SlaveState], v: int) -> SlaveState:
    """What v's registers should hold given its neighbors' current registers.

    The best bottleneck ``min(flow_u, w(u, v))`` wins; ties go to the fewer
    hops, then to the smaller port. A hop count above n can only come from a
    stale value chasing itself around a cycle, so it voids the register.
    """
    if v == g.root:
        return ROOT_SLAVE
    best = None
    for label, p in g.ports[v].items():
        su = slave[p.neighbor]
        key = (-min(su.flow, p.weight), su.hops, label)
        if best is None or key < best[0]:
            best = (key, label, su.hops + 1)
    if best is None:
        return invalid_slave(g)
    (neg, _, _), label, hops = best
    if hops > g.n or neg == 0:
        return invalid_slave(g)
    return SlaveState(-neg, label, hops)


def distributed_maxflow_rules(
    g: DynamicGraph, slave: Mapping[int, SlaveState], v: int
) -> tuple[bool, SlaveState]:
    """(enabled, successor register) for the single slave rule at v."""
    nxt = slave_target(g, slave, v)
    return slave[v] != nxt, nxt


def slave_enabled(g: DynamicGraph, slave: Mapping[int, SlaveState]) -> list[int]:
    return [v for v in g.nodes if slave_target(g, slave, v) != slave[v]]


def random_slave_state(g: DynamicGraph, rng: random.Random) -> dict[int, SlaveState]:
    """Arbitrary registers, including flows far above any edge weight."""
    wmax = max((w for _, _, w in g.edges()), default=1.0)
    out = {}
    for v in g.nodes:
        flow = rng.choice([TOP, 0.0, rng.uniform(0, 3 * wmax), float(rng.randint(1, int(3 * wmax) + 1))])
        out[v] = SlaveState(flow, rng.choice([None, *sorted(g.ports[v])]), rng.randint(0, g.n + 1))
    return out


def fill_slave(g: DynamicGraph, slave: Mapping[int, SlaveState] | None) -> dict[int, SlaveState]:
    """Registers for every node of g; nodes without one start invalidated."""
    slave = dict(slave or {})
    return {v: slave.get(v, invalid_slave(g)) for v in g.nodes}


# -- slave output and filtered views ------------------------------------------------


def slave_output(c: Configuration, s: SlaveProtocol) -> frozenset[frozenset[int]]:
    """Edge set S_A handed to the master."""
    g = c.graph
    if s.kind == "oracle-maxflow":
        return tree_edges(widest_path_tree(g))
    if s.kind == "oracle-mindegree":
        edges, _ = min_degree_tree_oracle(g, s.mindegree_limit)
        return edges
    out = set()
    slave = c.slave or {}
    for v in g.nodes:
        st = slave.get(v)
        if st is None or v == g.root:
            continue
        u = g.neighbor_at(v, st.flow_parent)
        if u is not None:
            out.add(frozenset((v, u)))
    return frozenset(out)


def filtered_view(v: int, c: Configuration, allowed):
    return c.view(v, frozenset(allowed))


def filtered_graph(c: Configuration, allowed) -> DynamicGraph:
    return c.graph.subgraph(allowed)


def master_tree(c: Configuration) -> frozenset[frozenset[int]]:
    return tree_edges(parent_graph(c))


def filtered_configuration(c: Configuration, allowed) -> Configuration:
    """The master as it sees itself: a parent behind a filtered edge is no parent."""
    return Configuration(filtered_graph(c, allowed), c.states, c.slave)


def reweight(g: DynamicGraph, u: int, v: int, w: float) -> DynamicGraph:
    """Same graph and port labels with the weight of edge u-v replaced."""
    if not w > 0:
        raise ValueError("weights must be positive")
    lu, lv = g.port_to(u, v), g.port_to(v, u)
    if lu is None or lv is None:
        raise MissingSubject(f"no edge {u}-{v}")
    ports = {x: dict(ps) for x, ps in g.ports.items()}
    ports[u][lu] = Port(v, w)
    ports[v][lv] = Port(u, w)
    return DynamicGraph(g.root, ports, dict(g.label_counter))


# -- composed execution ----------------------------------------------------------------


@dataclass
class ComposedTrace:
    initial: Configuration
    final: Configuration | None = None
    steps: int = 0
    slave_moves: int = 0
    master_moves: int = 0
    round_ends: list[int] = field(default_factory=list)
    outcome: str = "running"
    loop_free_throughout: bool = True
    first_loop: int | None = None
    configs: list[Configuration] | None = None
    output_changes: int = 0

    @property
    def rounds(self) -> int:
        return len(self.round_ends)


class Composer:
    """Steps both layers; each composed step is one slave step then one master step.

    Each layer has its own daemon, so the fairness bound of the daemon kind
    applies to the slave rules and to the master rules alike.
    """

    def __init__(
        self,
        c: Configuration,
        slave: SlaveProtocol,
        daemon: Daemon,
        slave_daemon: Daemon | None = None,
    ):
        self.slave = slave
        self.slave_daemon = slave_daemon or daemon.fresh(daemon.seed + 7919)
        if slave.distributed:
            c = Configuration(c.graph, c.states, fill_slave(c.graph, c.slave))
        self._oracle_cache: dict[int, frozenset] = {}
        self.allowed = self._output(c)
        self.runner = _Runner(c, daemon, self.allowed)

    @property
    def c(self) -> Configuration:
        return self.runner.c

    def _output(self, c: Configuration) -> frozenset:
        if self.slave.distributed:
            return slave_output(c, self.slave)
        key = id(c.graph)
        got = self._oracle_cache.get(key)
        if got is None:
            self._oracle_cache = {key: slave_output(c, self.slave)}
            got = self._oracle_cache[key]
        return got

    def set_graph(self, g: DynamicGraph) -> None:
        """Swap in a new graph with the same nodes, e.g. after a weight update."""
        c = self.c
        slave = fill_slave(g, c.slave) if self.slave.distributed else c.slave
        self.runner.c = Configuration(g, c.states, slave)
        self._sync()

    def _sync(self) -> bool:
        allowed = self._output(self.c)
        changed = allowed != self.allowed
        self.allowed = allowed
        self.runner.refresh(allowed)
        return changed

    def slave_privileged(self) -> list[int]:
        if not self.slave.distributed:
            return []
        return slave_enabled(self.c.graph, self.c.slave)

    def stable(self) -> bool:
        """Slave quiet and master legitimate on the filtered network."""
        if self.slave_privileged():
            return False
        fc = filtered_configuration(self.c, self.allowed)
        return fc.graph.is_connected() and is_legitimate(fc)

    def loop_free(self) -> bool:
        return is_loop_free(filtered_configuration(self.c, self.allowed))

    def run(self, max_steps: int = 200_000, keep_configs: bool = False) -> ComposedTrace:
        """Continue from the current configuration; see :func:`run_composed`."""
        return run_composed(self.c, self.slave, self.runner.daemon, max_steps=max_steps,
                            keep_configs=keep_configs, composer=self)

    def step(self) -> tuple[list[int], dict, bool]:
        """(slave nodes moved, master firings, whether S_A changed)."""
        moved: list[int] = []
        changed = False
        if self.slave.distributed:
            c = self.c
            cand = self.slave_privileged()
            moved = self.slave_daemon.select_nodes(cand)
            if moved:
                slave = dict(c.slave)
                for v in moved:
                    slave[v] = slave_target(c.graph, c.slave, v)
                self.runner.c = Configuration(c.graph, c.states, slave)
                changed = self._sync()
        fired = self.runner.step()
        return moved, fired, changed


def run_composed(
    c0: Configuration,
    slave: SlaveProtocol,
    daemon: Daemon,
    *,
    slave_daemon: Daemon | None = None,
    max_steps: int = 200_000,
    keep_configs: bool = False,
    composer: Composer | None = None,
) -> ComposedTrace:
    """Run both layers until the composed system is stable or the budget runs out.

    Loop-freedom of the master is checked on the filtered network at every
    configuration along the way; ``first_loop`` is the step after which the
    first cycle was seen.
    """
    comp = composer or Composer(c0, slave, daemon, slave_daemon)
    trace = ComposedTrace(comp.c, configs=[comp.c] if keep_configs else None)
    tracker = _RoundTracker()
    if not comp.loop_free():
        trace.loop_free_throughout = False
        trace.first_loop = -1
    k = 0
    while True:
        if comp.stable():
            trace.outcome = "stopped"
            break
        priv = [("m", v) for v in comp.runner.priv] + [("s", v) for v in comp.slave_privileged()]
        if not priv:
            trace.outcome = "terminal"
            break
        if k >= max_steps:
            trace.outcome = "budget"
            break
        tracker.open(priv)
        moved, fired, changed = comp.step()
        trace.output_changes += changed
        trace.slave_moves += len(moved)
        trace.master_moves += len(fired)
        after = [("m", v) for v in comp.runner.priv] + [("s", v) for v in comp.slave_privileged()]
        tracker.after_step(k, [("s", v) for v in moved] + [("m", v) for v in fired], after)
        if trace.loop_free_throughout and not comp.loop_free():
            trace.loop_free_throughout = False
            trace.first_loop = k
        if keep_configs:
            trace.configs.append(comp.c)
        k += 1
    trace.steps = k
    trace.round_ends = tracker.ends
    trace.final = comp.c
    return trace


def composed_step(
    c: Configuration, daemon: Daemon, slave: SlaveProtocol, slave_daemon: Daemon | None = None
) -> Configuration:
    """One composed step from ``c``: a slave step (or oracle refresh), then a master step.

    The daemons keep their fairness ages across calls, so pass the same
    instances when stepping repeatedly.
    """
    comp = Composer(c, slave, daemon, slave_daemon)
    comp.step()
    return comp.c


def composition_verdicts(trace: ComposedTrace, slave: SlaveProtocol) -> list[Verdict]:
    """M on the master tree, legitimacy on the filtered graph and loop-freedom along the run."""
    c = trace.final
    edges = master_tree(c)
    out = [slave.check_M(c.graph, edges)]
    allowed = slave_output(c, slave)
    fc = filtered_configuration(c, allowed)
    out.append(
        Verdict(True, None, "legitimate_filtered")
        if is_legitimate(fc)
        else Verdict(False, f"outcome={trace.outcome}", "legitimate_filtered")
    )
    out.append(
        Verdict(True, None, "loop_free_all_steps")
        if trace.loop_free_throughout
        else Verdict(False, f"step={trace.first_loop}", "loop_free_all_steps")
    )
    out.append(
        Verdict(True, None, "master_equals_slave")
        if edges == allowed
        else Verdict(False, f"differ={len(edges ^ allowed)}", "master_equals_slave")
    )
    return out
