"""Compiled versus pure-Python state-space kernel.

Runs the same exhaustive scans with both kernels, checks that they agree,
and prints wall-clock times and the speedup. The extension must be built
(``pip install -e .`` or ``python3 setup.py build_ext --inplace``).

    python3 benchmarks/bench_kernel.py [--cap 3] [--repeat 1]
"""

from __future__ import annotations

import argparse
import time

from lfbfs._kernel import compiled_kernel, python_kernel
from lfbfs.modelcheck import connected_graphs, layout, space_size


def timed(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cap", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=1)
    args = ap.parse_args()
    if compiled_kernel is None:
        raise SystemExit("compiled kernel not built; run: python3 setup.py build_ext --inplace")

    print(f"{'graph':<24}{'states':>9}{'scan':>14}{'python s':>11}{'compiled s':>12}{'speedup':>9}")
    for g in connected_graphs(3):
        lay = layout(g)
        edges = " ".join(f"{u}-{v}" for u, v, _ in g.edges())
        size = space_size(g, args.cap)
        scans = {
            "convergence": lambda k: k.scan_convergence(lay, args.cap, True, 10**9),
            "loop_free": lambda k: k.scan_loop_free(lay, args.cap, False, True),
        }
        for name, scan in scans.items():
            tp, rp = timed(lambda: scan(python_kernel), args.repeat)
            tc, rc = timed(lambda: scan(compiled_kernel), args.repeat)
            if rp != rc:
                raise SystemExit(f"kernels disagree on {edges} {name}: {rp} vs {rc}")
            print(f"{edges:<24}{size:>9}{name:>14}{tp:>11.3f}{tc:>12.4f}{tp / max(tc, 1e-9):>8.0f}x")


if __name__ == "__main__":
    main()
