import itertools
import random

import pytest
from hypothesis import given, settings, strategies as hs

from lfbfs.engine import Configuration, Daemon, random_configuration, run
from lfbfs.generators import random_connected_graph, random_crash
from lfbfs.graph import DynamicGraph, TopologyEvent
from lfbfs.protocol import NodeState, Status
from lfbfs.verification import (
    TOP,
    PreconditionViolated,
    TooLarge,
    bfs_oracle,
    check_M_maxflow,
    check_M_mindeg,
    coherent,
    detached_subtree,
    find_cycle,
    legitimate,
    legitimate_configuration,
    loop_free,
    max_degree,
    min_degree_tree_oracle,
    outside_untouched,
    parent_graph,
    passage_holds,
    spanning_trees,
    tree_edges,
    tree_flows,
    widest_path_oracle,
    widest_path_tree,
    _tree_parents,
)

N, P = Status.N, Status.P


def simple_paths(g, src, dst):
    stack = [(src, [src])]
    while stack:
        v, path = stack.pop()
        if v == dst:
            yield path
            continue
        for u in g.neighbors(v):
            if u not in path:
                stack.append((u, path + [u]))


def brute_widest(g):
    out = {g.root: TOP}
    for v in g.nodes:
        if v != g.root:
            out[v] = max(min(g.weight(a, b) for a, b in zip(p, p[1:])) for p in simple_paths(g, g.root, v))
    return out


def test_verdict_summary_lines(triangle):
    assert legitimate(legitimate_configuration(triangle)).summary() == "VERDICT legitimate true"
    bad = Configuration(triangle, {0: NodeState(None, N, 0, 0), 1: NodeState(2, N, 2, 2), 2: NodeState(2, N, 2, 2)})
    v = legitimate(bad)
    assert not v and v.summary().startswith("VERDICT legitimate false witness=node=")


def test_loop_witness(path3):
    c = Configuration(path3, {0: NodeState(None, N, 0, 0), 1: NodeState(2, N, 3, 3), 2: NodeState(1, N, 2, 2)})
    assert parent_graph(c) == {1: 2, 2: 1}
    assert sorted(find_cycle(parent_graph(c))) == [1, 2]
    assert loop_free(c).witness.startswith("cycle=")
    assert not coherent(c)


def test_orphans_are_not_in_the_parent_graph(path3):
    c = Configuration(path3, {0: NodeState(None, N, 0, 0), 1: NodeState(5, N, 1, 1), 2: NodeState(1, N, 2, 2)})
    assert parent_graph(c) == {2: 1}
    assert coherent(c)


def test_strict_legitimacy(path3):
    c = legitimate_configuration(path3)
    states = dict(c.states)
    states[2] = NodeState(1, N, 2, 7)
    loose = Configuration(path3, states)
    assert legitimate(loose)
    assert not legitimate(loose, strict=True)


def test_bfs_oracle_against_floyd_warshall():
    for seed in range(20):
        g = random_connected_graph(9, seed)
        d = {(u, v): (0 if u == v else 99) for u in g.nodes for v in g.nodes}
        for u, v, _ in g.edges():
            d[u, v] = d[v, u] = 1
        for k, i, j in itertools.product(g.nodes, repeat=3):
            d[i, j] = min(d[i, j], d[i, k] + d[k, j])
        assert bfs_oracle(g) == {v: d[g.root, v] for v in g.nodes}


def test_widest_path_triangle(triangle):
    fw = widest_path_oracle(triangle)
    assert fw[1] == 5 and fw[2] == 4
    assert tree_edges(widest_path_tree(triangle)) == {frozenset((0, 1)), frozenset((1, 2))}


@settings(max_examples=40, deadline=None)
@given(n=hs.integers(2, 7), seed=hs.integers(0, 10**6))
def test_widest_path_oracle_matches_brute_force(n, seed):
    g = random_connected_graph(n, seed, extra=0.5, weights=(1, 6))
    assert widest_path_oracle(g) == brute_widest(g)
    parents = widest_path_tree(g)
    assert tree_flows(g, parents) == brute_widest(g)
    assert check_M_maxflow(g, tree_edges(parents))


def test_check_M_maxflow_rejects_suboptimal(triangle):
    v = check_M_maxflow(triangle, [frozenset((0, 1)), frozenset((0, 2))])
    assert not v and "node=2" in v.witness
    assert not check_M_maxflow(triangle, [frozenset((0, 1))])


def test_min_degree_on_cycle_and_star():
    c4 = DynamicGraph.build(range(4), [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)], 0)
    edges, deg = min_degree_tree_oracle(c4)
    assert deg == 2 and len(edges) == 3
    star = DynamicGraph.build(range(5), [(0, i, 1.0) for i in range(1, 5)], 0)
    assert min_degree_tree_oracle(star)[1] == 4
    assert check_M_mindeg(c4, edges)


def test_min_degree_oracle_matches_enumeration():
    for seed in range(25):
        g = random_connected_graph(random.Random(seed).randint(2, 7), seed, extra=0.4)
        best = min(max_degree(g.nodes, t) for t in spanning_trees(g))
        edges, deg = min_degree_tree_oracle(g)
        assert deg == best
        assert _tree_parents(g, edges) is not None


def test_min_degree_limit():
    g = random_connected_graph(12, 0)
    with pytest.raises(TooLarge):
        min_degree_tree_oracle(g)


def test_detached_subtree(path3):
    c = legitimate_configuration(path3)
    assert detached_subtree(c, TopologyEvent.crash_edge(0, 1)) == {1, 2}
    assert detached_subtree(c, TopologyEvent.crash_node(1)) == {2}
    with pytest.raises(PreconditionViolated):
        detached_subtree(c, TopologyEvent.recov_edge(0, 2, 1.0))


def test_passage_on_random_crashes():
    for seed in range(15):
        g = random_connected_graph(10, seed)
        c0 = legitimate_configuration(g)
        e = random_crash(g, random.Random(seed), 0, tree=c0)
        t = run(c0, Daemon.central(seed), [e], keep_configs=True)
        assert t.outcome == "stopped"
        assert passage_holds(t, e)
        assert outside_untouched(t, e)


def test_passage_preconditions(triangle):
    c0 = random_configuration(triangle, 3)
    e = TopologyEvent.crash_edge(1, 2)
    t = run(c0, Daemon.central(0), [e], keep_configs=True)
    assert not legitimate(c0)
    with pytest.raises(PreconditionViolated):
        passage_holds(t, e)
    t2 = run(legitimate_configuration(triangle), Daemon.central(0), [TopologyEvent.recov_node(3, [(1, 1.0)])])
    with pytest.raises(PreconditionViolated):
        passage_holds(t2, TopologyEvent.recov_node(3, [(1, 1.0)]))
