"""Daemon-driven execution of the BFS protocol over a dynamic graph."""

from __future__ import annotations

import random
import zlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .graph import DynamicGraph, TopologyEvent, apply_event
from .protocol import (
    LocalView,
    Neighbor,
    NodeState,
    Rule,
    Status,
    _act,
    choose_rule,
    enabled_rules,
)

EdgeFilter = frozenset  # frozenset[frozenset[int]] of allowed undirected edges


@dataclass(frozen=True)
class Configuration:
    graph: DynamicGraph
    states: Mapping[int, NodeState]
    slave: Mapping[int, object] | None = None

    def __post_init__(self) -> None:
        if set(self.states) != set(self.graph.ports):
            raise ValueError("configuration must hold exactly one state per graph node")

    def view(self, v: int, allowed: EdgeFilter | None = None) -> LocalView:
        return local_view(self.graph, self.states, v, allowed)

    def parent_of(self, v: int) -> int | None:
        """Node designated by v's parent port, or None if it names no current neighbor."""
        return self.graph.neighbor_at(v, self.states[v].parent)

    def digest(self) -> str:
        body = repr(sorted((v, tuple(s)) for v, s in self.states.items()))
        return f"{zlib.crc32(body.encode()):08x}"


def local_view(
    g: DynamicGraph,
    states: Mapping[int, NodeState],
    v: int,
    allowed: EdgeFilter | None = None,
) -> LocalView:
    back = g.back_ports
    nbrs = {}
    for label, port in g.ports[v].items():
        u = port.neighbor
        if allowed is not None and frozenset((v, u)) not in allowed:
            continue
        su = states[u]
        nbrs[label] = Neighbor(su, su.parent == back[v, label], port.weight)
    return LocalView(v == g.root, states[v], nbrs)


class Daemon:
    """Scheduler choosing which privileged nodes move at each step.

    ``synchronous`` moves every privileged node. ``central`` moves a single
    privileged node drawn with a seeded generator. ``round_robin`` moves the
    next privileged node after the last one served, with no randomness at all.
    ``adversarial`` moves a seeded random nonempty subset and picks a random
    enabled rule at each chosen node.

    Fairness for ``central`` and ``adversarial``: a node's age counts the steps
    in which it was privileged but not chosen since it last moved, and is not
    reset when the node is briefly disabled. A privileged node whose age has
    reached ``fairness_bound`` is overdue. The adversarial daemon always
    includes every overdue node, so no node stays continuously enabled for
    more than ``fairness_bound`` steps without moving. The central daemon moves
    one node per step and cannot promise that when many nodes are enabled at
    once; it draws among the overdue nodes, and its larger default bound keeps
    the random draw in charge most of the time.
    """

    KINDS = ("synchronous", "central", "round_robin", "adversarial")
    DEFAULT_BOUND = {"central": 256, "adversarial": 8}

    def __init__(self, kind: str = "central", seed: int = 0, fairness_bound: int | None = None):
        if kind not in self.KINDS:
            raise ValueError(f"unknown daemon kind {kind!r}")
        if fairness_bound is None:
            fairness_bound = self.DEFAULT_BOUND.get(kind, 8)
        if fairness_bound < 1:
            raise ValueError("fairness_bound must be positive")
        self.kind = kind
        self.seed = seed
        self.fairness_bound = fairness_bound
        self.reset()

    @classmethod
    def synchronous(cls) -> Daemon:
        return cls("synchronous")

    @classmethod
    def central(cls, seed: int = 0, fairness_bound: int | None = None) -> Daemon:
        return cls("central", seed, fairness_bound)

    @classmethod
    def round_robin(cls) -> Daemon:
        return cls("round_robin")

    @classmethod
    def adversarial(cls, seed: int, fairness_bound: int | None = None) -> Daemon:
        return cls("adversarial", seed, fairness_bound)

    def reset(self) -> None:
        self._rng = random.Random(self.seed)
        self._cursor = None
        self.ages: dict = {}

    def fresh(self, seed: int | None = None) -> Daemon:
        return Daemon(self.kind, self.seed if seed is None else seed, self.fairness_bound)

    def __repr__(self) -> str:
        if self.kind in ("central", "adversarial"):
            return f"Daemon({self.kind}, seed={self.seed}, fairness_bound={self.fairness_bound})"
        return f"Daemon({self.kind})"

    def select_nodes(self, candidates: Iterable) -> list:
        """Choose which of the (sortable) candidates move this step."""
        nodes = sorted(candidates)
        if not nodes:
            return []
        if self.kind == "synchronous":
            picked = nodes
        elif self.kind == "round_robin":
            after = [x for x in nodes if self._cursor is not None and x > self._cursor]
            v = after[0] if after else nodes[0]
            self._cursor = v
            picked = [v]
        else:
            overdue = [v for v in nodes if self.ages.get(v, 0) >= self.fairness_bound]
            if self.kind == "central":
                # Serving the oldest first would lock the overdue nodes into a
                # fixed cyclic order, which is exactly the kind of schedule
                # that keeps sibling subtrees out of phase forever.
                picked = [self._rng.choice(overdue or nodes)]
            else:
                chosen = {v for v in nodes if self._rng.random() < 0.5} | set(overdue)
                picked = sorted(chosen) or [self._rng.choice(nodes)]
        moved = set(picked)
        for v in nodes:
            if v in moved:
                self.ages.pop(v, None)
            else:
                self.ages[v] = self.ages.get(v, 0) + 1
        return picked

    def select(self, privileged: Mapping[int, set[Rule]]) -> dict[int, Rule]:
        picked = self.select_nodes(privileged)
        if self.kind == "adversarial":
            return {
                v: self._rng.choice(sorted(privileged[v], key=lambda r: r.value)) for v in picked
            }
        return {v: choose_rule(privileged[v]) for v in picked}


@dataclass(frozen=True)
class StepRecord:
    index: int
    fired: tuple[tuple[int, Rule], ...]
    events: tuple[TopologyEvent, ...] = ()
    digest: str = ""
    # nodes privileged in the pre-step configuration
    privileged: frozenset[int] = frozenset()


@dataclass
class ExecutionTrace:
    initial: Configuration
    steps: list[StepRecord] = field(default_factory=list)
    round_ends: list[int] = field(default_factory=list)
    final: Configuration | None = None
    outcome: str = "running"  # "stopped", "terminal" or "budget"
    configs: list[Configuration] | None = None
    # (step index the event fired before, event)
    events: list[tuple[int, TopologyEvent]] = field(default_factory=list)

    @property
    def budget_exceeded(self) -> bool:
        return self.outcome == "budget"

    def lines(self, names: Mapping[int, str] | None = None, full: bool = False) -> list[str]:
        """Line-oriented rendering: one ``step`` line per step, one ``round`` line per round end."""
        name = (lambda v: names.get(v, str(v))) if names else str
        ends = {}
        for k, i in enumerate(self.round_ends, 1):
            ends[i] = k
        out = []
        for rec in self.steps:
            parts = [f"step {rec.index}"]
            for e in rec.events:
                parts.append("event " + format_event(e, name))
            parts.append("fired")
            parts.extend(f"{name(v)}:{r.value}" for v, r in rec.fired)
            out.append(" ".join(parts))
            if full and self.configs is not None and rec.index + 1 < len(self.configs):
                c = self.configs[rec.index + 1]
                for v in sorted(c.states):
                    out.append(f"  {name(v)} {c.states[v]}")
            if rec.index in ends:
                out.append(f"round {ends[rec.index]} ends at step {rec.index}")
        return out


def format_event(e: TopologyEvent, name: Callable[[int], str] = str) -> str:
    subjects = " ".join(name(x) for x in e.subjects)
    if e.kind.value == "recov_edge":
        return f"{e.kind.value} {subjects} {e.weight:g}"
    if e.kind.value == "recov_node":
        links = " ".join(f"{name(v)}:{w:g}" for v, w in e.links)
        return f"{e.kind.value} {subjects} {links}"
    return f"{e.kind.value} {subjects}"


def rounds(t: ExecutionTrace) -> int:
    return len(t.round_ends)


def privileged_nodes(
    c: Configuration, allowed: EdgeFilter | None = None
) -> dict[int, set[Rule]]:
    out = {}
    for v in c.graph.ports:
        rules = enabled_rules(c.view(v, allowed))
        if rules:
            out[v] = rules
    return out


def fire(
    c: Configuration, chosen: Mapping[int, Rule], allowed: EdgeFilter | None = None
) -> Configuration:
    """Apply every chosen rule against the same pre-step configuration."""
    states = dict(c.states)
    for v, rule in chosen.items():
        states[v] = _act(rule, c.view(v, allowed))
    return Configuration(c.graph, states, c.slave)


def step(c: Configuration, d: Daemon) -> tuple[Configuration, StepRecord]:
    priv = privileged_nodes(c)
    chosen = d.select(priv)
    if not chosen:
        return c, StepRecord(0, ())
    nxt = fire(c, chosen)
    return nxt, StepRecord(0, tuple(sorted(chosen.items())), (), nxt.digest(), frozenset(priv))


def default_new_node_state(g: DynamicGraph, v: int) -> NodeState:
    # A level no BFS distance can reach, so the newcomer adopts a parent at once.
    return NodeState(None, Status.N, g.n, g.n)


class _Runner:
    """Incremental stepping: only fired nodes and their neighbors are re-evaluated."""

    def __init__(self, c: Configuration, daemon: Daemon, allowed: EdgeFilter | None = None):
        self.c = c
        self.daemon = daemon
        self.allowed = allowed
        self.priv = privileged_nodes(c, allowed)

    def refresh(self, allowed: EdgeFilter | None = None) -> None:
        self.allowed = allowed
        self.priv = privileged_nodes(self.c, allowed)

    def step(self) -> dict[int, Rule]:
        chosen = self.daemon.select(self.priv)
        if not chosen:
            return chosen
        self.c = fire(self.c, chosen, self.allowed)
        g = self.c.graph
        touched = set(chosen)
        for v in chosen:
            touched.update(p.neighbor for p in g.ports[v].values())
        for v in touched:
            rules = enabled_rules(self.c.view(v, self.allowed))
            if rules:
                self.priv[v] = rules
            else:
                self.priv.pop(v, None)
        return chosen


class _RoundTracker:
    def __init__(self) -> None:
        self.pending: set[int] | None = None
        self.ends: list[int] = []

    def open(self, privileged: Iterable[int]) -> None:
        if self.pending is None:
            pending = set(privileged)
            self.pending = pending or None

    def after_step(self, index: int, fired: Iterable[int], privileged: Iterable[int]) -> None:
        if self.pending is None:
            return
        self.pending -= set(fired)
        self.pending &= set(privileged)
        if not self.pending:
            self.ends.append(index)
            self.pending = None

    def after_events(self, privileged: Iterable[int]) -> None:
        if self.pending is not None:
            self.pending &= set(privileged)
            if not self.pending:
                self.pending = None


def run(
    c0: Configuration,
    daemon: Daemon,
    events: Sequence[TopologyEvent] = (),
    stop: Callable[[Configuration], bool] | None = None,
    max_steps: int = 100_000,
    keep_configs: bool = False,
    observer: Callable[[Configuration, StepRecord | None], None] | None = None,
    new_node_state: Callable[[DynamicGraph, int], NodeState] = default_new_node_state,
) -> ExecutionTrace:
    """Run until ``stop`` holds with no event pending, a terminal configuration, or the budget.

    ``stop`` defaults to legitimacy. Events fire between steps: every event
    with ``at_step == k`` is applied before step ``k``; if the system goes
    quiet before that, the clock jumps forward to the next event.
    """
    if stop is None:
        from .verification import is_legitimate

        stop = is_legitimate
    events = sorted(events, key=lambda e: e.at_step)
    if any(a.at_step > b.at_step for a, b in zip(events, events[1:])):  # pragma: no cover
        raise ValueError("events must be sorted by at_step")

    trace = ExecutionTrace(c0, configs=[c0] if keep_configs else None)
    runner = _Runner(c0, daemon)
    tracker = _RoundTracker()
    if observer is not None:
        observer(c0, None)
    ev_i = 0
    k = 0
    while True:
        applied = []
        if ev_i < len(events) and not runner.priv and events[ev_i].at_step > k:
            k = events[ev_i].at_step
        while ev_i < len(events) and events[ev_i].at_step <= k:
            e = events[ev_i]
            g = apply_event(runner.c.graph, e)
            states = {v: s for v, s in runner.c.states.items() if v in g.ports}
            for v in g.ports:
                if v not in states:
                    states[v] = new_node_state(g, v)
            runner.c = Configuration(g, states, runner.c.slave)
            applied.append(e)
            trace.events.append((k, e))
            ev_i += 1
        if applied:
            runner.refresh()
            tracker.after_events(runner.priv)

        if ev_i >= len(events) and stop(runner.c):
            trace.outcome = "stopped"
            break
        if not runner.priv and ev_i >= len(events):
            trace.outcome = "terminal"
            break
        if k >= max_steps:
            trace.outcome = "budget"
            break

        tracker.open(runner.priv)
        pre_priv = frozenset(runner.priv)
        chosen = runner.step()
        rec = StepRecord(k, tuple(sorted(chosen.items())), tuple(applied), runner.c.digest(), pre_priv)
        trace.steps.append(rec)
        tracker.after_step(k, chosen, runner.priv)
        if keep_configs:
            trace.configs.append(runner.c)
        if observer is not None:
            observer(runner.c, rec)
        k += 1

    trace.round_ends = tracker.ends
    trace.final = runner.c
    return trace


def replay(
    trace: ExecutionTrace,
    new_node_state: Callable[[DynamicGraph, int], NodeState] = default_new_node_state,
) -> list[Configuration]:
    """Rebuild the post-step configurations of ``trace`` from its initial one and the firings.

    The result lines up with ``trace.configs``: entry ``i + 1`` follows the
    ``i``-th recorded step. Events left over after the last step are not applied.
    Each recorded rule is re-checked against the pre-step configuration, so a
    successful replay also confirms that every firing was enabled when it ran.
    """
    c = trace.initial
    out = [c]
    pending = list(trace.events)
    for rec in trace.steps:
        while pending and pending[0][0] <= rec.index:
            c = _with_event(c, pending.pop(0)[1], new_node_state)
        states = dict(c.states)
        for v, rule in rec.fired:
            view = c.view(v)
            if rule not in enabled_rules(view):
                raise ValueError(f"step {rec.index}: {rule} not enabled at {v}")
            states[v] = _act(rule, view)
        c = Configuration(c.graph, states, c.slave)
        out.append(c)
    return out


def _with_event(
    c: Configuration, e: TopologyEvent, new_node_state: Callable[[DynamicGraph, int], NodeState]
) -> Configuration:
    g = apply_event(c.graph, e)
    states = {v: s for v, s in c.states.items() if v in g.ports}
    for v in g.ports:
        if v not in states:
            states[v] = new_node_state(g, v)
    return Configuration(g, states, c.slave)


def random_configuration(g: DynamicGraph, seed: int) -> Configuration:
    rng = random.Random(seed)
    top = 2 * g.n
    states = {}
    for v in g.nodes:
        choices = [None, *sorted(g.ports[v])]
        states[v] = NodeState(
            rng.choice(choices),
            rng.choice((Status.N, Status.P)),
            rng.randint(0, top),
            rng.randint(0, top),
        )
    return Configuration(g, states)
