import itertools
import os
import subprocess
import sys

import pytest

from lfbfs._kernel import KIND, compiled_kernel, python_kernel
from lfbfs.graph import DynamicGraph
from lfbfs.modelcheck import (
    StateSpaceTooLarge,
    connected_graphs,
    layout,
    legitimate_codes,
    model_check,
    render_state,
    space_size,
)

needs_compiled = pytest.mark.skipif(compiled_kernel is None, reason="extension not built")


def burnside_rooted_connected(n):
    """Orbits of connected graphs on n labeled nodes under permutations fixing node 0."""
    pairs = list(itertools.combinations(range(n), 2))
    graphs = []
    for mask in range(1 << len(pairs)):
        es = frozenset(pairs[i] for i in range(len(pairs)) if mask >> i & 1)
        seen, stack = {0}, [0]
        while stack:
            v = stack.pop()
            for a, b in es:
                for x, y in ((a, b), (b, a)):
                    if x == v and y not in seen:
                        seen.add(y)
                        stack.append(y)
        if len(seen) == n:
            graphs.append(es)
    perms = [(0, *p) for p in itertools.permutations(range(1, n))]
    fixed = 0
    for perm in perms:
        for es in graphs:
            if frozenset(tuple(sorted((perm[a], perm[b]))) for a, b in es) == es:
                fixed += 1
    return fixed // len(perms)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_graph_enumeration_counts(n):
    assert len(connected_graphs(n)) == burnside_rooted_connected(n)


def test_enumeration_known_values():
    assert [len(connected_graphs(n)) for n in (2, 3, 4)] == [1, 3, 11]


def test_space_size_and_render(path3):
    lay = layout(path3)
    assert space_size(path3, 2) == (2 * 2 * 9) * (3 * 2 * 9)
    s = render_state(lay, 2, 0)
    assert s == "[0:-/N/0/0 1:-/N/0/0 2:-/N/0/0]"


def test_legitimate_codes_decode_to_legitimate_states(triangle):
    lay = layout(triangle)
    sp = python_kernel.Space(lay, 3)
    codes = list(legitimate_codes(triangle, lay, 3))
    assert len(codes) == 4 * 4  # NewLevel free at both non-roots
    assert all(sp.legitimate(sp.decode(c)) for c in codes)


def test_triangle_cap6_all_properties_hold(triangle):
    rep = model_check(triangle, 6)
    assert rep.holds
    assert all(rep.verdicts)
    # (3 ports x 2 statuses x 49 level pairs)^2 with the root frozen
    assert rep.states == (3 * 2 * 49) ** 2


def test_star_holds_and_path_livelocks(path3):
    star = DynamicGraph.build([0, 1, 2], [(0, 1, 1.0), (0, 2, 1.0)], 0)
    assert model_check(star, 8).holds
    rep = model_check(path3, 8)
    assert not rep.convergence
    assert rep.convergence.witness.startswith("cycle_len=")
    assert not rep.fair_convergence  # a weakly fair daemon can keep the middle node flickering
    assert not rep.loop_free_closure
    assert rep.loop_free_closure_coherent
    assert rep.legitimacy_closure


def test_report_lines(triangle):
    rep = model_check(triangle, 2)
    lines = rep.lines()
    assert lines[0].startswith("graph n=3 root=0 edges=[0-1 0-2 1-2] cap=2")
    assert "VERDICT convergence true" in lines


def test_limits(triangle):
    with pytest.raises(StateSpaceTooLarge):
        model_check(triangle, 8, max_states=100)
    with pytest.raises(ValueError):
        model_check(triangle, 0)


@needs_compiled
@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("cap", [2, 3])
@pytest.mark.parametrize("prio", [True, False])
def test_kernels_agree(n, cap, prio):
    for g in connected_graphs(n):
        lay = layout(g)
        assert python_kernel.scan_convergence(lay, cap, prio, 10**9) == compiled_kernel.scan_convergence(
            lay, cap, prio, 10**9
        )
        for coh in (False, True):
            assert python_kernel.scan_loop_free(lay, cap, coh, prio) == compiled_kernel.scan_loop_free(
                lay, cap, coh, prio
            )
        size = space_size(g, cap)
        for code in range(0, size, max(1, size // 200)):
            a = python_kernel.successors(lay, cap, code, prio)
            b = compiled_kernel.successors(lay, cap, code, prio)
            assert sorted(a[0]) == sorted(b[0]) and a[1] == b[1]


@needs_compiled
def test_default_kernel_is_compiled():
    assert KIND == "compiled"


def test_pure_python_fallback_selected_by_environment():
    env = dict(os.environ, LFBFS_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import lfbfs._kernel as k; print(k.KIND, k.compiled_kernel)"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.split() == ["python", "None"]


def test_python_kernel_model_check_matches(triangle):
    a = model_check(triangle, 2, kernel=python_kernel)
    b = model_check(triangle, 2)
    assert [v.summary() for v in a.verdicts] == [v.summary() for v in b.verdicts]
    assert a.states == b.states and a.escaping_states == b.escaping_states
