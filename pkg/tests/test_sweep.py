from lfbfs.sweep import ROUND_CONSTANT, crash_schedule, instance, sweep, table
from lfbfs.generators import random_connected_graph
from lfbfs.graph import apply_event
from lfbfs.verification import legitimate_configuration
import random


def test_instance_static_and_dynamic():
    recs = instance(8, 0, "central", 1, dynamic=True)
    assert [r.phase for r in recs] == ["static", "dynamic"]
    assert all(r.converged and r.levels_match_bfs for r in recs)
    assert recs[1].loop_free_start and recs[1].loop_free_all
    assert 1 <= recs[1].events <= 3


def test_crash_schedule_keeps_graph_connected():
    g = random_connected_graph(12, 4)
    evs = crash_schedule(legitimate_configuration(g), random.Random(2), 3)
    assert [e.at_step for e in evs] == sorted(e.at_step for e in evs)
    for e in evs:
        assert e.kind.in_lambda
        g = apply_event(g, e)
    assert g.is_connected()


def test_sweep_is_ordered_and_tabulated():
    recs = sweep([6, 5], 2, 2)
    assert [r.n for r in recs] == sorted(r.n for r in recs)
    lines = table(recs)
    assert lines[0].startswith("n runs") and len(lines) == 3
    assert all(r.rounds <= ROUND_CONSTANT * r.n**2 for r in recs)
