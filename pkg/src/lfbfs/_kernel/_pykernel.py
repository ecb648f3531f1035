"""Reference state-space kernel written against the protocol module.

Slow but obviously faithful: every code is decoded into a real configuration
and every transition goes through ``enabled_rules`` / ``_act``. The compiled
kernel implements the same interface and is cross-checked against this one.

A *layout* describes the frozen graph:

``deg``      degree of each node, nodes numbered 0..k-1
``nbr``      ``nbr[v][i]`` is the node behind the (i+1)-th smallest port of v
``back``     ``back[v][i]`` is the port index (1-based) at that neighbor leading back to v
``root``     index of the root
``dist``     BFS distance of every node
``fixed``    whether the root is frozen at its legitimate state

Per-node digits pack ``(p, status, level, newlevel)`` with ``p`` in
``0..deg`` (0 meaning no parent) and both levels in ``0..cap``.
"""

from __future__ import annotations

from ..protocol import (
    LocalView,
    Rule,
    Neighbor,
    NodeState,
    Status,
    _act,
    choose_rule,
    enabled_rules,
)

# rule codes follow the declaration order of Rule
RULE_CODES = {rule: i for i, rule in enumerate(Rule)}

KIND = "python"


class Space:
    def __init__(self, layout, cap: int, priority_only: bool = True, project: bool = False):
        self.deg = list(layout["deg"])
        self.nbr = [list(x) for x in layout["nbr"]]
        self.back = [list(x) for x in layout["back"]]
        self.root = layout["root"]
        self.dist = list(layout["dist"])
        self.fixed = bool(layout["fixed"])
        self.cap = cap
        self.priority_only = priority_only
        # the projected space drops newlevel, which is then taken equal to level
        self.project = project
        self.k = len(self.deg)
        c1 = cap + 1
        self.radix = []
        for v in range(self.k):
            if v == self.root and self.fixed:
                self.radix.append(1)
            elif project:
                self.radix.append((self.deg[v] + 1) * 2 * c1)
            else:
                self.radix.append((self.deg[v] + 1) * 2 * c1 * c1)
        self.size = 1
        for r in self.radix:
            self.size *= r

    # -- encoding ----------------------------------------------------------

    def decode(self, code: int) -> list[NodeState]:
        c1 = self.cap + 1
        out = []
        for v in range(self.k):
            r = self.radix[v]
            d = code % r
            code //= r
            if r == 1:
                out.append(NodeState(None, Status.N, 0, 0))
                continue
            if self.project:
                d, lvl = divmod(d, c1)
                nl = lvl
            else:
                d, nl = divmod(d, c1)
                d, lvl = divmod(d, c1)
            p, s = divmod(d, 2)
            out.append(NodeState(p or None, Status.P if s else Status.N, lvl, nl))
        return out

    def encode(self, states) -> int | None:
        """Code of ``states``, or None when some level leaves ``0..cap``."""
        c1 = self.cap + 1
        code = 0
        mult = 1
        for v in range(self.k):
            r = self.radix[v]
            s = states[v]
            if r == 1:
                if s != (None, Status.N, 0, 0):
                    return None
                continue
            if s.level > self.cap or s.new_level > self.cap:
                return None
            d = (s.parent or 0) * 2 + (1 if s.status is Status.P else 0)
            if self.project:
                d = d * c1 + s.level
            else:
                d = (d * c1 + s.level) * c1 + s.new_level
            code += d * mult
            mult *= r
        return code

    # -- semantics ---------------------------------------------------------

    def view(self, states, v: int) -> LocalView:
        nbrs = {}
        for i, u in enumerate(self.nbr[v]):
            su = states[u]
            nbrs[i + 1] = Neighbor(su, su.parent == self.back[v][i])
        return LocalView(v == self.root, states[v], nbrs)

    def moves(self, states):
        """(node, rule code, successor states) for every daemon choice."""
        out = []
        for v in range(self.k):
            if v == self.root and self.fixed:
                continue
            view = self.view(states, v)
            rules = enabled_rules(view)
            if not rules:
                continue
            if self.priority_only:
                rules = [choose_rule(rules)]
            else:
                rules = sorted(rules, key=RULE_CODES.__getitem__)
            for rule in rules:
                nxt = list(states)
                nxt[v] = _act(rule, view)
                out.append((v, RULE_CODES[rule], nxt))
        return out

    def enabled_nodes(self, states) -> list[int]:
        return [
            v
            for v in range(self.k)
            if not (v == self.root and self.fixed) and enabled_rules(self.view(states, v))
        ]

    def legitimate(self, states) -> bool:
        for v in range(self.k):
            s = states[v]
            if v == self.root:
                if s != (None, Status.N, 0, 0):
                    return False
                continue
            if s.status is not Status.N or s.level != self.dist[v] or not s.parent:
                return False
            if s.level != states[self.nbr[v][s.parent - 1]].level + 1:
                return False
        return True

    def loop_free(self, states) -> bool:
        for start in range(self.k):
            seen = set()
            v = start
            while v != self.root and states[v].parent:
                if v in seen:
                    return False
                seen.add(v)
                v = self.nbr[v][states[v].parent - 1]
        return True

    def coherent(self, states) -> bool:
        for v in range(self.k):
            s = states[v]
            if v == self.root:
                if s.level != 0 or s.status is not Status.N:
                    return False
                continue
            if s.parent:
                u = self.nbr[v][s.parent - 1]
                if not (states[u].level + 1 <= s.level and s.new_level >= s.level):
                    return False
        return True

    def successors(self, code: int) -> tuple[list[tuple[int, int, int]], int]:
        """In-cap successors as (node, rule code, code) plus the number of escaping moves."""
        states = self.decode(code)
        out = []
        escapes = 0
        for v, r, nxt in self.moves(states):
            c = self.encode(nxt)
            if c is None:
                escapes += 1
            else:
                out.append((v, r, c))
        return out, escapes


def successors(layout, cap: int, code: int, priority_only: bool = True):
    return Space(layout, cap, priority_only).successors(code)


def scan_convergence(layout, cap: int, priority_only: bool = True, fair_limit: int = 0) -> dict:
    """Search the capped space for non-converging behavior.

    Legitimate states are sinks. The result reports a deadlock (non-legitimate
    state with no move at all), a cycle of non-legitimate states (any daemon),
    and, when the space has at most ``fair_limit`` states, a strongly connected
    component that a weakly fair daemon can stay in forever.
    """
    sp = Space(layout, cap, priority_only)
    n = sp.size
    res = {
        "states": n,
        "legitimate": 0,
        "escaping_states": 0,
        "escaping_moves": 0,
        "deadlock": None,
        "cycle": None,
        "fair_computed": n <= fair_limit,
        "fair_scc": None,
        "fair_scc_size": 0,
    }
    succ_cache: dict[int, list[tuple[int, int, int]]] = {}

    def succ(code):
        got = succ_cache.get(code)
        if got is None:
            states = sp.decode(code)
            if sp.legitimate(states):
                got = []
            else:
                got, _ = sp.successors(code)
            succ_cache[code] = got
        return got

    # bookkeeping pass
    for code in range(n):
        states = sp.decode(code)
        if sp.legitimate(states):
            res["legitimate"] += 1
            continue
        out, esc = sp.successors(code)
        if esc:
            res["escaping_states"] += 1
            res["escaping_moves"] += esc
        if not out and not esc and res["deadlock"] is None:
            res["deadlock"] = code

    if not res["fair_computed"]:
        res["cycle"] = _find_cycle(n, succ)
        return res

    # Tarjan, iterative
    index = [0] * n
    low = [0] * n
    on = [False] * n
    stack: list[int] = []
    counter = 1
    for start in range(n):
        if index[start]:
            continue
        work = [(start, 0)]
        path = {start}
        index[start] = low[start] = counter
        counter += 1
        stack.append(start)
        on[start] = True
        while work:
            v, i = work[-1]
            nxt = succ(v)
            if i < len(nxt):
                work[-1] = (v, i + 1)
                w = nxt[i][2]
                if not index[w]:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on[w] = True
                    work.append((w, 0))
                    path.add(w)
                elif on[w]:
                    low[v] = min(low[v], index[w])
                    if res["cycle"] is None and w in path:
                        res["cycle"] = _stack_cycle(work, w)
                continue
            work.pop()
            path.discard(v)
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on[w] = False
                    comp.append(w)
                    if w == v:
                        break
                if len(comp) > 1 and res["fair_scc"] is None:
                    members = set(comp)
                    if _weakly_fair(sp, comp, members, succ):
                        res["fair_scc"] = min(comp)
                        res["fair_scc_size"] = len(comp)
    return res


def _stack_cycle(work, w):
    codes = [v for v, _ in work]
    return codes[codes.index(w):]


def _find_cycle(n, succ):
    color = bytearray(n)
    for start in range(n):
        if color[start]:
            continue
        color[start] = 1
        work = [(start, 0)]
        while work:
            v, i = work[-1]
            nxt = succ(v)
            if i < len(nxt):
                work[-1] = (v, i + 1)
                w = nxt[i][2]
                if color[w] == 1:
                    return _stack_cycle(work, w)
                if color[w] == 0:
                    color[w] = 1
                    work.append((w, 0))
                continue
            color[v] = 2
            work.pop()
    return None


def _weakly_fair(sp: Space, comp, members, succ) -> bool:
    """An infinite weakly fair run can stay in this component.

    That is the case iff every node is either disabled somewhere in the
    component or moves along some edge internal to it.
    """
    k = sp.k
    disabled = [False] * k
    moves = [False] * k
    for code in comp:
        states = sp.decode(code)
        en = set(sp.enabled_nodes(states))
        for v in range(k):
            if v not in en:
                disabled[v] = True
        for v, _, w in succ(code):
            if w in members:
                moves[v] = True
    return all(disabled[v] or moves[v] for v in range(k))


def scan_loop_free(layout, cap: int, coherent_only: bool = False, priority_only: bool = True):
    """Look for a loop-free state with a move that closes a parent cycle.

    Runs over the space without newlevel (taken equal to level). Returns
    (states checked, witness code or None, moving node or -1). The witness
    code is in the projected encoding.
    """
    sp = Space(layout, cap, priority_only, project=True)
    checked = 0
    for code in range(sp.size):
        states = sp.decode(code)
        if not sp.loop_free(states):
            continue
        if coherent_only and not sp.coherent(states):
            continue
        checked += 1
        for v, _, nxt in sp.moves(states):
            if not sp.loop_free(nxt):
                return checked, code, v
    return checked, None, -1
