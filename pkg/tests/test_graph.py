import pytest

from lfbfs.graph import (
    DisconnectingEvent,
    DuplicateEdge,
    DynamicGraph,
    GraphError,
    MissingSubject,
    RootCrash,
    TopologyEvent,
    apply_event,
)


def test_ports_follow_edge_order(triangle):
    assert triangle.port_items(0)[0][1].neighbor == 1
    assert triangle.port_to(0, 2) == 2
    assert triangle.port_to(2, 0) == 1
    assert triangle.port_to(2, 1) == 2
    assert triangle.back_ports[0, 1] == 1


def test_edges_listed_once(triangle):
    assert sorted((u, v) for u, v, _ in triangle.edges()) == [(0, 1), (0, 2), (1, 2)]
    assert triangle.weight(2, 1) == 4.0


def test_crash_edge_in_triangle_keeps_other_labels(triangle):
    g = apply_event(triangle, TopologyEvent.crash_edge(1, 2))
    assert g.is_connected()
    assert not g.has_edge(1, 2)
    assert g.port_to(0, 2) == 2  # surviving edge keeps its label
    assert triangle.has_edge(1, 2)  # input snapshot untouched


def test_recovered_edge_gets_a_fresh_label(triangle):
    g = apply_event(triangle, TopologyEvent.crash_edge(1, 2))
    g = apply_event(g, TopologyEvent.recov_edge(1, 2, 9.0))
    # labels 1, 2 were handed out before; the revived edge gets 3 at both ends
    assert g.port_to(1, 2) == 3
    assert g.port_to(2, 1) == 3
    assert g.weight(1, 2) == 9.0


def test_crash_that_disconnects_is_rejected(path3):
    with pytest.raises(DisconnectingEvent):
        apply_event(path3, TopologyEvent.crash_edge(1, 2))
    with pytest.raises(DisconnectingEvent):
        apply_event(path3, TopologyEvent.crash_node(1))


def test_root_never_crashes(triangle):
    with pytest.raises(RootCrash):
        apply_event(triangle, TopologyEvent.crash_node(0))


def test_missing_subjects(triangle):
    with pytest.raises(MissingSubject):
        apply_event(triangle, TopologyEvent.crash_node(7))
    with pytest.raises(MissingSubject):
        apply_event(triangle, TopologyEvent.recov_edge(0, 9, 1.0))
    with pytest.raises(DuplicateEdge):
        apply_event(triangle, TopologyEvent.recov_edge(0, 1, 1.0))


def test_recov_node_and_crash_node(triangle):
    g = apply_event(triangle, TopologyEvent.recov_node(3, [(2, 1.0), (0, 2.0)]))
    assert g.n == 4
    assert g.port_to(3, 2) == 1 and g.port_to(3, 0) == 2
    assert g.port_to(0, 3) == 3
    g2 = apply_event(g, TopologyEvent.crash_node(2))
    assert 2 not in g2 and g2.neighbors(3) == [0]


def test_build_rejects_bad_input():
    with pytest.raises(GraphError):
        DynamicGraph.build([0, 1], [(0, 0, 1.0)], 0)
    with pytest.raises(GraphError):
        DynamicGraph.build([0, 1], [(0, 1, 0.0)], 0)
    with pytest.raises(MissingSubject):
        DynamicGraph.build([0, 1], [(0, 1, 1.0)], 5)


def test_subgraph_keeps_nodes_and_labels(triangle):
    sub = triangle.subgraph([frozenset((0, 2)), frozenset((1, 2))])
    assert sub.n == 3
    assert sorted(sub.ports[2]) == [1, 2]
    assert sub.ports[0] == {2: triangle.ports[0][2]}
