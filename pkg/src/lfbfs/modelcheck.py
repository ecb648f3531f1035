"""Exhaustive small-scope checking of the BFS protocol.

Every configuration of a tiny graph with levels in ``0..cap`` is enumerated
and the central daemon's choices are explored. Three properties are decided:

convergence
    no run avoids legitimacy forever: no deadlocked non-legitimate state and
    no cycle of non-legitimate states. When the space is small enough a
    second, weakly fair reading is also decided through strongly connected
    components.
loop-free closure
    no single move turns a loop-free configuration into one with a parent
    cycle. Only R_SafeChangeP rewrites a parent pointer and its guard never
    reads NewLevel, so this scan runs over the space without NewLevel, which
    is exact. The same scan restricted to coherent configurations is
    reported next to the literal one.
legitimacy closure
    every move out of a legitimate configuration stays legitimate.

The root is held at its legitimate state during enumeration. Its only rule
resets it and nothing a neighbor does re-enables it, so under any fair
daemon it is legitimate after its first move; the reduction is stated in
every report.

Moves whose result leaves ``0..cap`` are dropped, and the number of states
having such a move is reported.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Iterable

from ._kernel import KIND, kernel as default_kernel, python_kernel
from .graph import DynamicGraph
from .protocol import RULE_PRIORITY, Rule, Status
from .verification import Verdict, bfs_oracle

DEFAULT_MAX_STATES = 300_000_000
DEFAULT_FAIR_LIMIT = 70_000_000
RULES = list(Rule)


class StateSpaceTooLarge(ValueError):
    pass


def layout(g: DynamicGraph, fixed_root: bool = True) -> dict:
    """Flatten ``g`` into the kernel's index-based description."""
    nodes = g.nodes
    idx = {v: i for i, v in enumerate(nodes)}
    labels = {v: sorted(g.ports[v]) for v in nodes}
    nbr = []
    back = []
    for v in nodes:
        row, brow = [], []
        for label in labels[v]:
            u = g.ports[v][label].neighbor
            row.append(idx[u])
            brow.append(labels[u].index(g.back_ports[v, label]) + 1)
        nbr.append(row)
        back.append(brow)
    dist = bfs_oracle(g)
    if len(dist) != g.n:
        raise ValueError("graph is not connected")
    rank = [RULE_PRIORITY.index(r) for r in RULES]
    return {
        "deg": [g.degree(v) for v in nodes],
        "nbr": nbr,
        "back": back,
        "root": idx[g.root],
        "dist": [dist[v] for v in nodes],
        "fixed": fixed_root,
        "rank": rank,
        "nodes": nodes,
    }


def space_size(g: DynamicGraph, cap: int, fixed_root: bool = True) -> int:
    c1 = cap + 1
    total = 1
    for v in g.nodes:
        if v == g.root and fixed_root:
            continue
        total *= (g.degree(v) + 1) * 2 * c1 * c1
    return total


def render_state(lay: dict, cap: int, code: int, project: bool = False) -> str:
    sp = python_kernel.Space(lay, cap, project=project)
    parts = []
    for i, s in enumerate(sp.decode(code)):
        p = "-" if s.parent is None else str(s.parent)
        parts.append(f"{lay['nodes'][i]}:{p}/{s.status.value}/{s.level}/{s.new_level}")
    return "[" + " ".join(parts) + "]"


@dataclass
class ModelCheckReport:
    graph: DynamicGraph
    cap: int
    kernel: str
    states: int
    legitimate_states: int
    escaping_states: int
    convergence: Verdict
    fair_convergence: Verdict | None
    loop_free_closure: Verdict
    loop_free_closure_coherent: Verdict
    legitimacy_closure: Verdict
    root_fixed: bool = True
    seconds: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def verdicts(self) -> list[Verdict]:
        out = [self.convergence]
        if self.fair_convergence is not None:
            out.append(self.fair_convergence)
        out += [self.loop_free_closure, self.loop_free_closure_coherent, self.legitimacy_closure]
        return out

    @property
    def holds(self) -> bool:
        """The three properties as stated: convergence, loop-free closure, legitimacy closure."""
        return bool(self.convergence and self.loop_free_closure and self.legitimacy_closure)

    def describe_graph(self) -> str:
        edges = " ".join(f"{u}-{v}" for u, v, _ in self.graph.edges())
        return f"n={self.graph.n} root={self.graph.root} edges=[{edges}]"

    def lines(self) -> list[str]:
        out = [
            f"graph {self.describe_graph()} cap={self.cap} states={self.states} "
            f"legitimate={self.legitimate_states} excluded_escaping={self.escaping_states} "
            f"kernel={self.kernel} root_fixed={str(self.root_fixed).lower()} "
            f"seconds={self.seconds:.1f}"
        ]
        out += [v.summary() for v in self.verdicts]
        out += [f"note {n}" for n in self.notes]
        return out


def model_check(
    g: DynamicGraph,
    level_cap: int,
    *,
    any_rule: bool = False,
    max_states: int = DEFAULT_MAX_STATES,
    fair_limit: int = DEFAULT_FAIR_LIMIT,
    kernel=None,
) -> ModelCheckReport:
    """Exhaustively check ``g`` with levels capped at ``level_cap``.

    With ``any_rule`` the daemon may fire any enabled rule at the chosen node;
    otherwise the default priority picks it, as the engine's central daemon does.
    """
    if g.n > 5:
        raise StateSpaceTooLarge(f"{g.n} nodes; the exhaustive check takes at most 5")
    if level_cap < 1:
        raise ValueError("level_cap must be positive")
    size = space_size(g, level_cap)
    if size > max_states:
        raise StateSpaceTooLarge(f"{size} states exceed the limit of {max_states}")
    k = kernel or default_kernel
    lay = layout(g)
    kind_name = getattr(k, "KIND", KIND)
    t0 = time.perf_counter()
    prio = not any_rule
    notes = []

    if g.n == 1:
        res = {"states": 1, "legitimate": 1, "escaping_states": 0, "deadlock": None,
               "cycle": None, "fair_computed": True, "fair_scc": None, "fair_scc_size": 0}
        lf = (1, None, -1)
        lfc = (1, None, -1)
    else:
        res = k.scan_convergence(lay, level_cap, prio, fair_limit)
        lf = k.scan_loop_free(lay, level_cap, False, prio)
        lfc = k.scan_loop_free(lay, level_cap, True, prio)

    def st(code, project=False):
        return render_state(lay, level_cap, code, project)

    if res["deadlock"] is not None:
        conv = Verdict(False, "deadlock=" + st(res["deadlock"]), "convergence")
    elif res["cycle"] is not None:
        cyc = res["cycle"]
        conv = Verdict(False, f"cycle_len={len(cyc)} cycle=" + ">".join(st(c) for c in cyc[:12]),
                       "convergence")
    else:
        conv = Verdict(True, None, "convergence")

    fair = None
    if res["fair_computed"]:
        if res["fair_scc"] is not None:
            fair = Verdict(False, f"scc_size={res['fair_scc_size']} member=" + st(res["fair_scc"]),
                           "convergence_weakly_fair")
        elif res["deadlock"] is not None:
            fair = Verdict(False, "deadlock=" + st(res["deadlock"]), "convergence_weakly_fair")
        else:
            fair = Verdict(True, None, "convergence_weakly_fair")
    else:
        notes.append(f"weakly fair pass skipped above {fair_limit} states")

    def lf_verdict(found, name):
        _, code, mover = found
        if code is None:
            return Verdict(True, None, name)
        return Verdict(False, f"mover={lay['nodes'][mover]} state=" + st(code, True), name)

    report = ModelCheckReport(
        graph=g,
        cap=level_cap,
        kernel=kind_name,
        states=res["states"],
        legitimate_states=res["legitimate"],
        escaping_states=res["escaping_states"],
        convergence=conv,
        fair_convergence=fair,
        loop_free_closure=lf_verdict(lf, "loop_free_closure"),
        loop_free_closure_coherent=lf_verdict(lfc, "loop_free_closure_coherent"),
        legitimacy_closure=legitimacy_closure(g, lay, level_cap, k, prio),
        root_fixed=True,
        notes=notes,
    )
    report.seconds = time.perf_counter() - t0
    return report


def legitimate_codes(g: DynamicGraph, lay: dict, cap: int) -> Iterable[int]:
    """Codes of every legitimate configuration: BFS levels, any valid parent, any NewLevel."""
    sp = python_kernel.Space(lay, cap)
    dist = lay["dist"]
    per_node = []
    for i in range(len(lay["deg"])):
        if i == lay["root"]:
            per_node.append([None])
            continue
        if dist[i] > cap:
            return
        ports = [j + 1 for j, u in enumerate(lay["nbr"][i]) if dist[u] == dist[i] - 1]
        per_node.append([(p, nl) for p in ports for nl in range(cap + 1)])
    from .protocol import NodeState

    for combo in itertools.product(*per_node):
        states = []
        for i, choice in enumerate(combo):
            if choice is None:
                states.append(NodeState(None, Status.N, 0, 0))
            else:
                p, nl = choice
                states.append(NodeState(p, Status.N, dist[i], nl))
        code = sp.encode(states)
        if code is not None:
            yield code


def legitimacy_closure(g: DynamicGraph, lay: dict, cap: int, k, prio: bool = True) -> Verdict:
    sp = python_kernel.Space(lay, cap)
    for code in legitimate_codes(g, lay, cap):
        out, esc = k.successors(lay, cap, code, prio)
        if esc:
            return Verdict(False, "escaping_move_from=" + render_state(lay, cap, code),
                           "legitimacy_closure")
        for _, rule, nxt in out:
            if not sp.legitimate(sp.decode(nxt)):
                return Verdict(
                    False,
                    f"rule={RULES[rule].value} from=" + render_state(lay, cap, code)
                    + " to=" + render_state(lay, cap, nxt),
                    "legitimacy_closure",
                )
    return Verdict(True, None, "legitimacy_closure")


# --- graph enumeration ------------------------------------------------------


def _connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    adj = {v: set() for v in range(n)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    seen = {0}
    stack = [0]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n


def connected_graphs(n: int) -> list[DynamicGraph]:
    """One representative per isomorphism class of connected graphs on n nodes rooted at node 0.

    Isomorphisms must fix the root. The representative is the class member
    with the lexicographically smallest sorted edge list; ports are numbered
    in that edge order, so every graph has one canonical port labeling.
    """
    if n < 1:
        raise ValueError("n must be positive")
    pairs = list(itertools.combinations(range(n), 2))
    perms = [(0, *p) for p in itertools.permutations(range(1, n))]
    seen = set()
    out = []
    for mask in range(1 << len(pairs)):
        edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
        if len(edges) < n - 1 or not _connected(n, edges):
            continue
        forms = []
        for perm in perms:
            forms.append(tuple(sorted(tuple(sorted((perm[u], perm[v]))) for u, v in edges)))
        canon = min(forms)
        if canon in seen:
            continue
        seen.add(canon)
        out.append(canon)
    out.sort(key=lambda es: (len(es), es))
    return [DynamicGraph.build(range(n), [(u, v, 1.0) for u, v in es], 0) for es in out]


def model_check_all(
    max_n: int,
    level_cap: int,
    *,
    any_rule: bool = False,
    fair_limit: int = DEFAULT_FAIR_LIMIT,
    kernel=None,
    sizes: Iterable[int] | None = None,
    progress=None,
) -> list[ModelCheckReport]:
    """Check every rooted connected graph with 2..max_n nodes (or the given sizes)."""
    if max_n > 4:
        raise StateSpaceTooLarge("the all-graphs sweep stops at 4 nodes")
    reports = []
    for n in sizes or range(2, max_n + 1):
        for g in connected_graphs(n):
            rep = model_check(g, level_cap, any_rule=any_rule, fair_limit=fair_limit, kernel=kernel)
            if progress is not None:
                progress(rep)
            reports.append(rep)
    return reports
