"""Node program of the loop-free, super-stabilizing BFS protocol.

Everything here is a pure function of a :class:`LocalView`: the node's own
registers, the root flag, and the registers of its neighbors keyed by local
port label. A neighbor is never identified other than by its port.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Mapping, NamedTuple


class Status(str, Enum):
    N = "N"
    P = "P"

    def __str__(self) -> str:
        return self.value


class Rule(str, Enum):
    INIT_ROOT = "R_InitRoot"
    SAFE_CHANGE_P = "R_SafeChangeP"
    LEVEL_PLUS_PLUS = "R_LevelPlusPlus"
    END_PROPAG = "R_EndPropag"
    LEVEL_CORRECT = "R_LevelCorrect"
    DYNAMIC = "R_Dynamic"

    def __str__(self) -> str:
        return self.value


# Default per-node choice when several guards hold at once.
RULE_PRIORITY: tuple[Rule, ...] = (
    Rule.INIT_ROOT,
    Rule.END_PROPAG,
    Rule.LEVEL_CORRECT,
    Rule.SAFE_CHANGE_P,
    Rule.LEVEL_PLUS_PLUS,
    Rule.DYNAMIC,
)

INF = math.inf


class NodeState(NamedTuple):
    parent: int | None  # port label, None for no parent
    status: Status
    level: int
    new_level: int

    def __str__(self) -> str:
        p = "none" if self.parent is None else str(self.parent)
        return f"parent={p} status={self.status.value} level={self.level} newlevel={self.new_level}"


ROOT_STATE = NodeState(None, Status.N, 0, 0)


class Neighbor(NamedTuple):
    state: NodeState
    points_here: bool  # the neighbor's parent port designates this node
    weight: float = 1.0


class LocalView(NamedTuple):
    is_root: bool
    state: NodeState
    nbrs: Mapping[int, Neighbor]  # port label -> neighbor registers


class ProtocolError(Exception):
    pass


class NonRootIsolated(ProtocolError):
    pass


class RuleNotEnabled(ProtocolError):
    pass


def level_hat(view: LocalView) -> int:
    if view.is_root:
        return 0
    if not view.nbrs:
        raise NonRootIsolated("non-root node has no neighbor")
    return min(nb.state.level for nb in view.nbrs.values()) + 1


def parent_hat(view: LocalView) -> int | None:
    """Smallest port whose neighbor sits one level above the best level and is neutral."""
    target = level_hat(view) - 1
    best = None
    for port, nb in view.nbrs.items():
        if nb.state.level == target and nb.state.status is Status.N:
            if best is None or port < best:
                best = port
    return best


def children(view: LocalView) -> set[int]:
    lvl = view.state.level
    return {
        port
        for port, nb in view.nbrs.items()
        if nb.points_here and nb.state.level > lvl
    }


def ubl(view: LocalView) -> float:
    """Upper bound on the level this node may take without passing a child."""
    kids = children(view)
    if not kids:
        return INF
    return min(view.nbrs[port].state.level - 1 for port in kids)


def has_parent(view: LocalView) -> bool:
    return view.state.parent is not None and view.state.parent in view.nbrs


def p_change(view: LocalView) -> bool:
    lh = level_hat(view)
    ph = parent_hat(view)
    s = view.state
    return (lh < s.level or (s.level == lh and s.parent != ph)) and ph is not None


def level_up(view: LocalView) -> bool:
    s = view.state
    par = view.nbrs[s.parent].state
    return s.level != par.level + 1 or (
        par.status is Status.P and s.level != par.new_level + 1
    )


def propag_end(view: LocalView) -> bool:
    return all(view.nbrs[port].state.status is Status.N for port in children(view))


def enabled_rules(view: LocalView) -> set[Rule]:
    s = view.state
    if view.is_root:
        if s.parent is not None or s.level != 0 or s.new_level != 0 or s.status is not Status.N:
            return {Rule.INIT_ROOT}
        return set()

    out: set[Rule] = set()
    if s.new_level < s.level:
        out.add(Rule.LEVEL_CORRECT)
    if s.status is Status.P and propag_end(view) and ubl(view) >= s.new_level:
        out.add(Rule.END_PROPAG)
    if s.status is Status.N and view.nbrs:
        change = p_change(view)
        if change:
            out.add(Rule.SAFE_CHANGE_P)
        elif has_parent(view):
            if level_up(view):
                out.add(Rule.LEVEL_PLUS_PLUS)
        else:
            out.add(Rule.DYNAMIC)
    return out


def choose_rule(enabled: set[Rule]) -> Rule:
    for rule in RULE_PRIORITY:
        if rule in enabled:
            return rule
    raise RuleNotEnabled("no rule enabled")


def apply(rule: Rule, view: LocalView) -> NodeState:
    """Successor state of the node after executing ``rule``; assignments run in listed order."""
    if rule not in enabled_rules(view):
        raise RuleNotEnabled(f"{rule} is not enabled")
    return _act(rule, view)


def _act(rule: Rule, view: LocalView) -> NodeState:
    p, status, level, new_level = view.state
    if rule is Rule.INIT_ROOT:
        return ROOT_STATE
    if rule is Rule.SAFE_CHANGE_P:
        level = level_hat(view)
        new_level = level
        p = parent_hat(view)
    elif rule is Rule.LEVEL_PLUS_PLUS:
        status = Status.P
        new_level = view.nbrs[p].state.new_level + 1
    elif rule is Rule.END_PROPAG:
        status = Status.N
        level = new_level
    elif rule is Rule.LEVEL_CORRECT:
        new_level = level
    elif rule is Rule.DYNAMIC:
        status = Status.P
        new_level = level_hat(view)
    return NodeState(p, status, level, new_level)
