"""Acceptance checks, one per criterion, each printing a single PASS/FAIL line.

Run under pytest (the lines are repeated in the terminal summary) or as a
script: ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import functools
import random
import sys
import time
from pathlib import Path

import pytest

from lfbfs.composition import (
    SlaveProtocol,
    composition_verdicts,
    random_slave_state,
    run_composed,
)
from lfbfs.engine import Configuration, Daemon, random_configuration, run
from lfbfs.generators import random_connected_graph, random_crash
from lfbfs.modelcheck import model_check_all
from lfbfs.protocol import NodeState, Rule, Status
from lfbfs.scenario import load
from lfbfs.sweep import ROUND_CONSTANT, sweep
from lfbfs.verification import (
    detached_subtree,
    legitimate,
    legitimate_configuration,
    parent_graph,
    passage_holds,
    subtree,
    widest_path_oracle,
)

SIZES = (5, 10, 20, 50)
GRAPHS_PER_SIZE = 25
SEEDS = 5
CALIBRATION_MARGIN = 2.0
PASSAGE_SCENARIOS = 200
COMPOSITION_GRAPHS = 50
RANDOM_CONFIGS = 1000
MODELCHECK_MAX_N = 4
MODELCHECK_CAP = 8
DETOUR = Path(__file__).resolve().parent.parent / "scenarios" / "detour.scn"

RESULTS: list[str] = []


def report(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k} {'PASS' if ok else 'FAIL'} {detail}"
    RESULTS.append(line)
    print(line)


@functools.cache
def sweep_records():
    t0 = time.perf_counter()
    recs = sweep(SIZES, GRAPHS_PER_SIZE, SEEDS, dynamic=True)
    return recs, time.perf_counter() - t0


def _ratios(recs, phase):
    out = {}
    for r in recs:
        if r.phase == phase:
            out[r.n] = max(out.get(r.n, 0.0), r.ratio)
    return out


def test_criterion_1_static_convergence():
    recs, secs = sweep_records()
    static = [r for r in recs if r.phase == "static"]
    ratios = _ratios(recs, "static")
    calibrated = CALIBRATION_MARGIN * ratios[5]
    bound_ok = all(r.rounds <= ROUND_CONSTANT * r.n**2 for r in static)
    converged = sum(r.converged for r in static)
    ok = converged == len(static) and bound_ok and calibrated <= ROUND_CONSTANT + 1e-12
    ratio_txt = " ".join(f"n{n}={v:.3f}" for n, v in sorted(ratios.items()))
    report(1, ok, f"runs={len(static)} converged={converged} C={ROUND_CONSTANT} "
                  f"(n5 x{CALIBRATION_MARGIN:g}={calibrated:.3f}) max_rounds/n^2: {ratio_txt} sweep_s={secs:.0f}")
    assert ok


def test_criterion_2_dynamic_convergence():
    recs, _ = sweep_records()
    dyn = [r for r in recs if r.phase == "dynamic"]
    converged = sum(r.converged for r in dyn)
    bound_ok = all(r.rounds <= ROUND_CONSTANT * r.n**2 for r in dyn)
    events = sum(r.events for r in dyn)
    ratios = _ratios(recs, "dynamic")
    ratio_txt = " ".join(f"n{n}={v:.3f}" for n, v in sorted(ratios.items()))
    ok = len(dyn) == len(SIZES) * GRAPHS_PER_SIZE * 2 * SEEDS and converged == len(dyn) and bound_ok
    report(2, ok, f"runs={len(dyn)} crash_events={events} converged={converged} C={ROUND_CONSTANT} "
                  f"max_rounds/n^2: {ratio_txt}")
    assert ok


def test_criterion_3_loop_freedom_closure():
    recs, _ = sweep_records()
    starts = [r for r in recs if r.loop_free_start]
    bad = [r for r in starts if not r.loop_free_all]
    legit = [r for r in starts if r.phase == "dynamic"]
    coherent = [r for r in starts if r.coherent_start]
    bad_coherent = [r for r in bad if r.coherent_start]
    bad_legit = [r for r in bad if r.phase == "dynamic"]
    witness = ""
    if bad:
        w = bad[0]
        witness = f" first=n{w.n}/graph{w.graph}/{w.daemon}/seed{w.seed}@step{w.first_loop_step}"
    ok = not bad
    report(3, ok, f"loop_free_starts={len(starts)} violated={len(bad)} "
                  f"legitimate_starts={len(legit)} violated={len(bad_legit)} "
                  f"coherent_starts={len(coherent)} violated={len(bad_coherent)}{witness}")
    assert ok


def test_criterion_4_passage():
    failures = []
    strict_failures = []
    detached_sizes = []
    for i in range(PASSAGE_SCENARIOS):
        rng = random.Random(4000 + i)
        n = rng.randint(4, 20)
        g = random_connected_graph(n, 4000 + i, extra=rng.choice([0.1, 0.3]))
        c0 = legitimate_configuration(g)
        e = random_crash(g, rng, at_step=0, tree=c0)
        daemon = Daemon.central(i) if i % 2 == 0 else Daemon.adversarial(i)
        t = run(c0, daemon, [e], keep_configs=True)
        if t.outcome != "stopped" or not passage_holds(t, e):
            failures.append(i)
        # strict diff: outside the detached subtree no parent field ever changes
        allowed = detached_subtree(c0, e)
        detached_sizes.append(len(allowed))
        for c in t.configs:
            if any(c.states[v].parent != c0.states[v].parent for v in c.states if v not in allowed and v in c0.states):
                strict_failures.append(i)
                break
    ok = not failures and not strict_failures
    report(4, ok, f"scenarios={PASSAGE_SCENARIOS} passage_failed={len(failures)} "
                  f"strict_parent_diff_failed={len(strict_failures)} "
                  f"nonempty_detached={sum(s > 0 for s in detached_sizes)}")
    assert ok


@pytest.mark.slow
def test_criterion_5_exhaustive():
    t0 = time.perf_counter()
    reports = model_check_all(MODELCHECK_MAX_N, MODELCHECK_CAP)
    secs = time.perf_counter() - t0
    failing = {"convergence": [], "loop_free_closure": [], "legitimacy_closure": []}
    fair_fail = []
    coherent_fail = []
    for rep in reports:
        for name in failing:
            if not getattr(rep, name):
                failing[name].append(rep.describe_graph())
        if rep.fair_convergence is not None and not rep.fair_convergence:
            fair_fail.append(rep)
        if not rep.loop_free_closure_coherent:
            coherent_fail.append(rep)
    ok = all(rep.holds for rep in reports)
    counts = " ".join(f"{k}_failed={len(v)}" for k, v in failing.items())
    report(5, ok, f"graphs={len(reports)} cap={MODELCHECK_CAP} {counts} "
                  f"weakly_fair_convergence_failed={len(fair_fail)} "
                  f"coherent_loop_free_closure_failed={len(coherent_fail)} seconds={secs:.0f}")
    for rep in reports:
        if not rep.holds:
            print("  " + " | ".join(rep.lines()[:4]))
    assert ok


def optimal_levels(g):
    """Fixed point of level(v) = min over neighbors of level(u) + 1, root at 0."""
    inf = float("inf")
    lvl = {v: (0 if v == g.root else inf) for v in g.nodes}
    changed = True
    while changed:
        changed = False
        for v in g.nodes:
            if v == g.root:
                continue
            best = min((lvl[u] + 1 for u in g.neighbors(v)), default=inf)
            if best < lvl[v]:
                lvl[v] = best
                changed = True
    return lvl


def hand_pr_lp(c, literal_root=False):
    g = c.graph
    opt = optimal_levels(g)
    for v in g.nodes:
        s = c.states[v]
        if v == g.root:
            if not (s.level == 0 and s.status is Status.N):
                return False
            if not literal_root and not (s.parent is None and s.new_level == 0):
                return False
            continue
        if s.parent not in g.ports[v]:
            return False
        u = g.ports[v][s.parent].neighbor
        if not (s.level == opt[v] and s.status is Status.N and s.level == c.states[u].level + 1):
            return False
    return True


def sample_configuration(i):
    rng = random.Random(6000 + i)
    g = random_connected_graph(rng.randint(2, 12), 6000 + i, extra=rng.random() * 0.5)
    kind = i % 3
    if kind == 0:
        return random_configuration(g, i)
    c = legitimate_configuration(g)
    if kind == 1:
        # any parent on a shortest path is legitimate, not only the smallest port
        states = dict(c.states)
        for v in g.nodes:
            if v != g.root:
                ups = [p for p, q in g.ports[v].items() if c.states[q.neighbor].level == c.states[v].level - 1]
                states[v] = states[v]._replace(parent=rng.choice(ups), new_level=rng.randint(0, 2 * g.n))
        return Configuration(g, states)
    states = dict(c.states)
    v = rng.choice(g.nodes)
    field = rng.choice(["parent", "status", "level", "new_level"])
    s = states[v]
    if field == "parent":
        s = s._replace(parent=rng.choice([None, *g.ports[v]]))
    elif field == "status":
        s = s._replace(status=rng.choice(list(Status)))
    elif field == "level":
        s = s._replace(level=rng.randint(0, g.n))
    else:
        s = s._replace(new_level=rng.randint(0, g.n))
    states[v] = s
    return Configuration(g, states)


def test_criterion_6_legitimacy_equals_bfs():
    recs, _ = sweep_records()
    converged = [r for r in recs if r.converged]
    mismatched = [r for r in converged if not r.levels_match_bfs]
    disagree = 0
    positives = 0
    literal_root_differs = 0
    for i in range(RANDOM_CONFIGS):
        c = sample_configuration(i)
        got = bool(legitimate(c))
        want = hand_pr_lp(c)
        positives += want
        disagree += got != want
        literal_root_differs += hand_pr_lp(c, literal_root=True) != want
    ok = not mismatched and disagree == 0
    report(6, ok, f"converged_traces={len(converged)} level_mismatch={len(mismatched)} "
                  f"configs={RANDOM_CONFIGS} legitimate={positives} disagreements={disagree} "
                  f"root_clause_only_differs={literal_root_differs}")
    assert ok


def test_criterion_7_composition():
    lines = []
    ok = True
    for kind, nmax in (("oracle-maxflow", 20), ("oracle-mindegree", 10)):
        sp = SlaveProtocol(kind)
        bad_M = bad_loop = not_stopped = 0
        for i in range(COMPOSITION_GRAPHS):
            rng = random.Random(7000 + i)
            g = random_connected_graph(rng.randint(3, nmax), 7000 + i, extra=0.3, weights=(1, 9))
            daemon = Daemon.central(i) if i % 2 == 0 else Daemon.adversarial(i)
            t = run_composed(legitimate_configuration(g), sp, daemon)
            v = {x.name: bool(x) for x in composition_verdicts(t, sp)}
            not_stopped += t.outcome != "stopped"
            bad_M += not v["M_maxflow" if kind == "oracle-maxflow" else "M_mindeg"]
            bad_loop += not v["loop_free_all_steps"]
        ok &= bad_M == bad_loop == not_stopped == 0
        lines.append(f"{kind}: graphs={COMPOSITION_GRAPHS} M_failed={bad_M} loop_failed={bad_loop} "
                     f"unconverged={not_stopped}")
    sp = SlaveProtocol("distributed-maxflow")
    wrong = not_stopped = 0
    for i in range(COMPOSITION_GRAPHS):
        rng = random.Random(7500 + i)
        g = random_connected_graph(rng.randint(3, 12), 7500 + i, extra=0.3, weights=(1, 9))
        c0 = Configuration(g, legitimate_configuration(g).states, random_slave_state(g, rng))
        t = run_composed(c0, sp, Daemon.central(i))
        not_stopped += t.outcome != "stopped"
        fw = widest_path_oracle(g)
        wrong += any(t.final.slave[v].flow != fw[v] for v in g.nodes)
    ok &= wrong == not_stopped == 0
    lines.append(f"distributed-maxflow: graphs={COMPOSITION_GRAPHS} flow_mismatch={wrong} unconverged={not_stopped}")
    report(7, ok, "; ".join(lines))
    assert ok


def test_criterion_8_detour_replay():
    sc = load(DETOUR)
    h = sc.handles()
    v = h["v"]
    c0 = sc.configuration()
    events = sc.topology_events()
    t = run(c0, sc.make_daemon(), events, max_steps=sc.budget, keep_configs=True)
    first_dynamic_nl = None
    propagations = 0
    v_new_levels = []
    leavers = []
    for i, rec in enumerate(t.steps):
        pre, post = t.configs[i], t.configs[i + 1]
        inside = subtree(parent_graph(pre), v) - {v}
        for x, rule in rec.fired:
            if x == v and rule in (Rule.DYNAMIC, Rule.LEVEL_PLUS_PLUS):
                propagations += 1
                v_new_levels.append(post.states[v].new_level)
                if rule is Rule.DYNAMIC and first_dynamic_nl is None:
                    first_dynamic_nl = post.states[v].new_level
            if rule is Rule.SAFE_CHANGE_P and x in inside and x not in subtree(parent_graph(post), v):
                leavers.append(sc.names()[x])
    ends_legit = t.outcome == "stopped" and bool(legitimate(t.final))
    passes_5_then_7 = 5 in v_new_levels and 7 in v_new_levels[v_new_levels.index(5):]
    passage = bool(passage_holds(t, events[0]))
    ok = first_dynamic_nl == 5 and propagations >= 2 and passes_5_then_7 and leavers and ends_legit and passage
    report(8, ok, f"first_R_Dynamic_newlevel={first_dynamic_nl} propagations_by_v={propagations} "
                  f"v_newlevels={v_new_levels} left_subtree={leavers} ends_legitimate={ends_legit} "
                  f"passage={passage}")
    assert ok


if __name__ == "__main__":
    tests = [obj for name, obj in sorted(globals().items()) if name.startswith("test_criterion_")]
    failed = 0
    for fn in tests:
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
