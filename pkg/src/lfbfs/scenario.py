"""Line-oriented scenario files.

::

    # comments and blank lines are ignored
    node r root
    node a
    edge r a 1
    init legitimate                 # or: init random <seed>
    init a parent=1 status=N level=1 newlevel=1
    event 0 crash_edge r a
    event 3 recov_node x r:2 a:1
    daemon central seed=4 bound=256 # synchronous | round_robin | adversarial
    budget 20000

Node names exist only here. Building a scenario hands out integer handles
in declaration order (nodes recovered by events come last), so the engine
only ever sees anonymous handles and port labels. Ports are numbered per
node in the order the edges are listed.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from pathlib import Path

from .engine import Configuration, Daemon, random_configuration
from .graph import DynamicGraph, EventKind, GraphError, TopologyEvent
from .protocol import NodeState, Status
from .verification import legitimate_configuration

DAEMON_KINDS = Daemon.KINDS


class ScenarioError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


@dataclass(frozen=True)
class EventSpec:
    step: int
    kind: str
    subjects: tuple[str, ...]
    weight: float | None = None
    links: tuple[tuple[str, float], ...] = ()

    def text(self) -> str:
        parts = ["event", str(self.step), self.kind, *self.subjects]
        if self.kind == "recov_edge":
            parts.append(_num(self.weight))
        parts += [f"{v}:{_num(w)}" for v, w in self.links]
        return " ".join(parts)


@dataclass(frozen=True)
class Scenario:
    nodes: tuple[str, ...]
    root: str
    edges: tuple[tuple[str, str, float], ...]
    # ("legitimate",), ("random", seed) or ("explicit", ((name, NodeState), ...))
    init: tuple = ("legitimate",)
    events: tuple[EventSpec, ...] = ()
    daemon: tuple[str, int, int | None] = ("central", 0, None)
    budget: int = 100_000
    source: str = field(default="", compare=False)

    # -- building ------------------------------------------------------------

    def handles(self) -> dict[str, int]:
        out = {name: i for i, name in enumerate(self.nodes)}
        for e in self.events:
            if e.kind == "recov_node" and e.subjects[0] not in out:
                out[e.subjects[0]] = len(out)
        return out

    def names(self) -> dict[int, str]:
        return {h: name for name, h in self.handles().items()}

    def graph(self) -> DynamicGraph:
        h = self.handles()
        return DynamicGraph.build(
            [h[v] for v in self.nodes], [(h[u], h[v], w) for u, v, w in self.edges], h[self.root]
        )

    def configuration(self) -> Configuration:
        g = self.graph()
        kind = self.init[0]
        if kind == "legitimate":
            return legitimate_configuration(g)
        if kind == "random":
            return random_configuration(g, self.init[1])
        h = self.handles()
        return Configuration(g, {h[name]: s for name, s in self.init[1]})

    def topology_events(self) -> list[TopologyEvent]:
        h = self.handles()
        out = []
        for e in self.events:
            kind = EventKind(e.kind)
            subjects = tuple(h[x] for x in e.subjects)
            links = tuple((h[v], w) for v, w in e.links)
            out.append(TopologyEvent(kind, subjects, e.step, e.weight, links))
        return out

    def make_daemon(self) -> Daemon:
        kind, seed, bound = self.daemon
        return Daemon(kind, seed, bound)

    # -- text ----------------------------------------------------------------

    def text(self) -> str:
        lines = []
        for name in self.nodes:
            lines.append(f"node {name}" + (" root" if name == self.root else ""))
        for u, v, w in self.edges:
            lines.append(f"edge {u} {v} {_num(w)}")
        if self.init[0] == "legitimate":
            lines.append("init legitimate")
        elif self.init[0] == "random":
            lines.append(f"init random {self.init[1]}")
        else:
            for name, s in self.init[1]:
                p = "none" if s.parent is None else str(s.parent)
                lines.append(
                    f"init {name} parent={p} status={s.status.value} level={s.level} newlevel={s.new_level}"
                )
        lines += [e.text() for e in self.events]
        kind, seed, bound = self.daemon
        d = f"daemon {kind}"
        if kind in ("central", "adversarial"):
            d += f" seed={seed}"
            if bound is not None:
                d += f" bound={bound}"
        lines.append(d)
        lines.append(f"budget {self.budget}")
        return "\n".join(lines) + "\n"


def _num(w: float | None) -> str:
    if w is None:
        return "1"
    return str(int(w)) if float(w).is_integer() else repr(float(w))


def _int(tok: str, line: int, what: str, minimum: int = 0) -> int:
    try:
        val = int(tok)
    except ValueError:
        raise ScenarioError(line, f"{what} must be an integer, got {tok!r}") from None
    if val < minimum:
        raise ScenarioError(line, f"{what} must be at least {minimum}")
    return val


def _weight(tok: str, line: int) -> float:
    try:
        w = float(tok)
    except ValueError:
        raise ScenarioError(line, f"weight must be a number, got {tok!r}") from None
    if not w > 0:
        raise ScenarioError(line, "weights must be positive")
    return w


def _keyvals(tokens: list[str], line: int) -> dict[str, str]:
    out = {}
    for tok in tokens:
        key, sep, val = tok.partition("=")
        if not sep:
            raise ScenarioError(line, f"expected key=value, got {tok!r}")
        out[key] = val
    return out


def parse(text: str, source: str = "") -> Scenario:
    nodes: list[str] = []
    root = None
    edges: list[tuple[str, str, float]] = []
    init_mode = None
    explicit: dict[str, NodeState] = {}
    events: list[EventSpec] = []
    daemon = ("central", 0, None)
    budget = 100_000
    seen_edges = set()
    known = set()

    for no, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        try:
            tok = shlex.split(body)
        except ValueError as exc:
            raise ScenarioError(no, str(exc)) from None
        head, args = tok[0], tok[1:]
        if head == "node":
            if not args or len(args) > 2 or (len(args) == 2 and args[1] != "root"):
                raise ScenarioError(no, "usage: node <name> [root]")
            name = args[0]
            if name in known:
                raise ScenarioError(no, f"node {name} declared twice")
            nodes.append(name)
            known.add(name)
            if len(args) == 2:
                if root is not None:
                    raise ScenarioError(no, "a second root was declared")
                root = name
        elif head == "edge":
            if len(args) != 3:
                raise ScenarioError(no, "usage: edge <u> <v> <weight>")
            u, v = args[0], args[1]
            for x in (u, v):
                if x not in known:
                    raise ScenarioError(no, f"unknown node {x}")
            if u == v:
                raise ScenarioError(no, "self-loops are not allowed")
            key = frozenset((u, v))
            if key in seen_edges:
                raise ScenarioError(no, f"edge {u}-{v} listed twice")
            seen_edges.add(key)
            edges.append((u, v, _weight(args[2], no)))
        elif head == "init":
            if args == ["legitimate"]:
                mode = ("legitimate",)
            elif len(args) == 2 and args[0] == "random":
                mode = ("random", _int(args[1], no, "seed"))
            elif args and args[0] in known:
                mode = ("explicit",)
                kv = _keyvals(args[1:], no)
                missing = {"parent", "status", "level", "newlevel"} - set(kv)
                if missing or len(kv) != 4:
                    raise ScenarioError(no, "init needs parent=, status=, level= and newlevel=")
                parent = None if kv["parent"] == "none" else _int(kv["parent"], no, "parent", 1)
                if kv["status"] not in ("N", "P"):
                    raise ScenarioError(no, "status must be N or P")
                if args[0] in explicit:
                    raise ScenarioError(no, f"node {args[0]} initialised twice")
                explicit[args[0]] = NodeState(
                    parent,
                    Status(kv["status"]),
                    _int(kv["level"], no, "level"),
                    _int(kv["newlevel"], no, "newlevel"),
                )
            else:
                raise ScenarioError(no, "usage: init legitimate | init random <seed> | init <node> key=value...")
            if init_mode is not None and init_mode[0] != mode[0]:
                raise ScenarioError(no, "init modes cannot be mixed")
            if init_mode is not None and mode[0] != "explicit":
                raise ScenarioError(no, "init given twice")
            init_mode = mode
        elif head == "event":
            if len(args) < 3:
                raise ScenarioError(no, "usage: event <step> <kind> <subjects...>")
            step = _int(args[0], no, "event step")
            kind = args[1]
            rest = args[2:]
            if events and step < events[-1].step:
                raise ScenarioError(no, "events must be listed in step order")
            if kind == "crash_edge":
                if len(rest) != 2:
                    raise ScenarioError(no, "usage: event <step> crash_edge <u> <v>")
                spec = EventSpec(step, kind, tuple(rest))
            elif kind == "crash_node":
                if len(rest) != 1:
                    raise ScenarioError(no, "usage: event <step> crash_node <u>")
                spec = EventSpec(step, kind, tuple(rest))
            elif kind == "recov_edge":
                if len(rest) != 3:
                    raise ScenarioError(no, "usage: event <step> recov_edge <u> <v> <weight>")
                spec = EventSpec(step, kind, tuple(rest[:2]), _weight(rest[2], no))
            elif kind == "recov_node":
                if len(rest) < 2:
                    raise ScenarioError(no, "usage: event <step> recov_node <u> <neighbor:weight>...")
                links = []
                for item in rest[1:]:
                    v, sep, w = item.rpartition(":")
                    if not sep:
                        raise ScenarioError(no, f"expected neighbor:weight, got {item!r}")
                    links.append((v, _weight(w, no)))
                spec = EventSpec(step, kind, (rest[0],), None, tuple(links))
            else:
                raise ScenarioError(no, f"unknown event kind {kind!r}")
            names = list(spec.subjects) + [v for v, _ in spec.links]
            if kind == "recov_node":
                if rest[0] in known:
                    raise ScenarioError(no, f"node {rest[0]} already exists")
                names = names[1:]
            for x in names:
                if x not in known:
                    raise ScenarioError(no, f"unknown node {x}")
            if kind == "recov_node":
                known.add(rest[0])
            events.append(spec)
        elif head == "daemon":
            if not args or args[0] not in DAEMON_KINDS:
                raise ScenarioError(no, "daemon kind must be one of " + ", ".join(DAEMON_KINDS))
            kv = _keyvals(args[1:], no)
            if set(kv) - {"seed", "bound"}:
                raise ScenarioError(no, "daemon takes only seed= and bound=")
            seed = _int(kv.get("seed", "0"), no, "seed")
            bound = _int(kv["bound"], no, "bound", 1) if "bound" in kv else None
            if args[0] not in ("central", "adversarial"):
                seed, bound = 0, None
            daemon = (args[0], seed, bound)
        elif head == "budget":
            if len(args) != 1:
                raise ScenarioError(no, "usage: budget <steps>")
            budget = _int(args[0], no, "budget", 1)
        else:
            raise ScenarioError(no, f"unknown directive {head!r}")

    last = len(text.splitlines()) or 1
    if root is None:
        raise ScenarioError(last, "no root declared")
    if init_mode is None:
        init_mode = ("legitimate",)
    if init_mode[0] == "explicit":
        missing = [v for v in nodes if v not in explicit]
        if missing:
            raise ScenarioError(last, "explicit init misses " + ", ".join(missing))
        init = ("explicit", tuple((v, explicit[v]) for v in nodes))
    else:
        init = init_mode
    sc = Scenario(tuple(nodes), root, tuple(edges), init, tuple(events), daemon, budget, source)
    try:
        g = sc.graph()
    except GraphError as exc:
        raise ScenarioError(last, str(exc)) from None
    if not g.is_connected():
        raise ScenarioError(last, "the graph is not connected")
    if init[0] == "explicit":
        for name, s in init[1]:
            if s.parent is not None and s.parent not in g.ports[sc.handles()[name]]:
                raise ScenarioError(last, f"node {name} has no port {s.parent}")
    return sc


def load(path: str | Path) -> Scenario:
    p = Path(path)
    return parse(p.read_text(), str(p))
