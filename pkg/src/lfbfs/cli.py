"""Command-line front end.

Exit status is 0 when every verdict printed holds, 1 when one fails, and 2
for usage or scenario errors.
"""

from __future__ import annotations

import argparse
import random
import sys
from collections import Counter
from typing import Sequence

from . import __version__
from .composition import (
    SLAVE_KINDS,
    SlaveProtocol,
    composition_verdicts,
    random_slave_state,
    run_composed,
)
from .engine import Configuration, run
from .graph import GraphError
from .modelcheck import StateSpaceTooLarge, connected_graphs, model_check
from .protocol import Rule
from .scenario import ScenarioError, load
from .sweep import DAEMONS, ROUND_CONSTANT, sweep, table
from .verification import (
    PreconditionViolated,
    TooLarge,
    Verdict,
    is_loop_free,
    legitimate,
    loop_free,
    passage_holds,
    outside_untouched,
)


def _emit(verdicts: Sequence[Verdict]) -> int:
    for v in verdicts:
        print(v.summary())
    return 0 if all(verdicts) else 1


def _execute(sc, keep: bool):
    c0 = sc.configuration()
    events = sc.topology_events()
    first_loop: list[int] = []
    lf0 = is_loop_free(c0)

    def watch(c, rec):
        if lf0 and not first_loop and not is_loop_free(c):
            first_loop.append(rec.index if rec is not None else -1)

    t = run(c0, sc.make_daemon(), events, max_steps=sc.budget, keep_configs=keep, observer=watch)
    return t, events, lf0, first_loop


def _verdicts(sc, t, events, lf0, first_loop) -> tuple[list[Verdict], list[str]]:
    out: list[Verdict] = []
    notes: list[str] = []
    if lf0:
        out.append(
            Verdict(True, None, "loop_free_all_steps")
            if not first_loop
            else Verdict(False, f"step={first_loop[0]}", "loop_free_all_steps")
        )
    else:
        notes.append("initial configuration has a parent cycle; loop_free_all_steps not claimed")
        out.append(loop_free(t.final))
    v = legitimate(t.final)
    if not v and t.outcome == "budget":
        v = Verdict(False, f"{v.witness},budget={sc.budget}", "legitimate")
    out.append(v)
    if len(events) == 1 and events[0].kind.in_lambda and sc.init[0] == "legitimate":
        out.append(passage_holds(t, events[0]))
        out.append(outside_untouched(t, events[0]))
    return out, notes


def cmd_run(args) -> int:
    sc = load(args.scenario)
    names = sc.names()
    t, events, lf0, first_loop = _execute(sc, keep=True)
    if args.trace_level == "full":
        for line in t.lines(names, full=True):
            print(line)
    counts = Counter(r for rec in t.steps for _, r in rec.fired)
    print(f"summary outcome={t.outcome} steps={len(t.steps)} rounds={len(t.round_ends)}")
    for rule in Rule:
        if counts[rule]:
            print(f"summary fired {rule.value} {counts[rule]}")
    for i, rec in enumerate(t.steps):
        for v, rule in rec.fired:
            if rule is Rule.DYNAMIC:
                s = t.configs[i + 1].states[v]
                print(f"summary step {rec.index} {names[v]}:{rule.value} newlevel={s.new_level}")
    verdicts, notes = _verdicts(sc, t, events, lf0, first_loop)
    for note in notes:
        print("note " + note)
    return _emit(verdicts)


def cmd_check(args) -> int:
    sc = load(args.scenario)
    t, events, lf0, first_loop = _execute(sc, keep=False)
    verdicts, _ = _verdicts(sc, t, events, lf0, first_loop)
    return _emit(verdicts)


def cmd_modelcheck(args) -> int:
    if args.graph:
        graphs = [load(args.graph).graph()]
    else:
        graphs = connected_graphs(args.n)
    ok = True
    for g in graphs:
        rep = model_check(g, args.cap, any_rule=args.any_rule)
        for line in rep.lines():
            print(line)
        ok &= rep.holds
    print(f"VERDICT modelcheck {str(ok).lower()}")
    return 0 if ok else 1


def cmd_compose(args) -> int:
    sc = load(args.scenario)
    if sc.events:
        raise ScenarioError(1, "compose takes a scenario without events")
    slave = SlaveProtocol(args.slave)
    c0 = sc.configuration()
    if slave.distributed:
        rng = random.Random(args.slave_seed)
        c0 = Configuration(c0.graph, c0.states, random_slave_state(c0.graph, rng))
    t = run_composed(c0, slave, sc.make_daemon(), max_steps=sc.budget)
    print(
        f"summary slave={slave.kind} outcome={t.outcome} steps={t.steps} rounds={t.rounds} "
        f"slave_moves={t.slave_moves} master_moves={t.master_moves}"
    )
    verdicts = composition_verdicts(t, slave)
    if not is_loop_free(c0):
        verdicts = [v for v in verdicts if v.name != "loop_free_all_steps"]
        print("note initial configuration has a parent cycle; loop_free_all_steps not claimed")
    return _emit(verdicts)


def cmd_sweep(args) -> int:
    daemons = args.daemon.split(",")
    recs = sweep([args.n], args.seeds, args.per_graph, daemons, dynamic=args.dynamic,
                 max_steps=args.max_steps)
    phases = ("static", "dynamic") if args.dynamic else ("static",)
    for ph in phases:
        print(f"phase {ph}")
        for line in table(recs, ph):
            print(line)
    bound = args.constant * args.n**2
    worst = max(r.rounds for r in recs)
    verdicts = [
        Verdict(True, None, "all_converged")
        if all(r.converged for r in recs)
        else Verdict(False, f"runs={sum(not r.converged for r in recs)}", "all_converged"),
        Verdict(True, None, "rounds_within_bound")
        if worst <= bound
        else Verdict(False, f"max_rounds={worst},bound={bound:g}", "rounds_within_bound"),
    ]
    return _emit(verdicts)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lfbfs", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"lfbfs {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a scenario and print its trace and verdicts")
    p.add_argument("scenario")
    p.add_argument("--trace-level", choices=("full", "summary"), default="summary")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="verdicts only")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("modelcheck", help="exhaustive check over small graphs")
    p.add_argument("--n", type=int, default=3, help="graph size, at most 4")
    p.add_argument("--cap", type=int, default=8, help="level cap")
    p.add_argument("--graph", help="check the graph of this scenario instead")
    p.add_argument("--any-rule", action="store_true", help="let the daemon pick any enabled rule")
    p.set_defaults(func=cmd_modelcheck)

    p = sub.add_parser("compose", help="run the master on a slave's output")
    p.add_argument("scenario")
    p.add_argument("--slave", choices=SLAVE_KINDS, required=True)
    p.add_argument("--slave-seed", type=int, default=0, help="seed for arbitrary slave registers")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("sweep", help="round statistics over random instances")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seeds", type=int, default=10, help="number of random graphs")
    p.add_argument("--per-graph", type=int, default=1, help="runs per graph and daemon")
    p.add_argument("--daemon", default=",".join(DAEMONS))
    p.add_argument("--dynamic", action="store_true", help="add crash events after legitimacy")
    p.add_argument("--constant", type=float, default=ROUND_CONSTANT,
                   help="round bound is constant * n^2")
    p.add_argument("--max-steps", type=int, default=200_000)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {getattr(args, 'scenario', '')}:{exc.line}: {exc.message}", file=sys.stderr)
        return 2
    except (GraphError, StateSpaceTooLarge, TooLarge, PreconditionViolated, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
