"""Time the loop-closure kernel: compiled extension vs pure Python.

Runs the full enumeration (2-core, seed search, closure merging) on a few
grid models with each backend and prints per-backend wall times plus the
speedup. Loop sets must agree exactly; the script aborts if they differ.

Usage: python3 bench/bench_enumeration.py [--sizes 4,5] [--s 250] [--repeats 3]
"""

import argparse
import sys
import time

from loopbp.graph import two_core
from loopbp.kernel import compiled_available
from loopbp.loops import SearchBounds, enumerate_loops
from loopbp.models import CouplingSpec, ising_grid


def best_time(core, bounds, backend, repeats):
    best = None
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = enumerate_loops(core, bounds, backend=backend)
        dt = time.perf_counter() - t0
        best = dt if best is None else min(best, dt)
    return best, result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="4,5")
    ap.add_argument("--s", type=int, default=250)
    ap.add_argument("--m", type=int, default=None)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)

    if not compiled_available():
        print("compiled kernel not built; nothing to compare", file=sys.stderr)
        return 1

    spec = CouplingSpec(family="spin_glass", coupling_std=0.5, seed=0)
    bounds = SearchBounds(max_simple_loops=args.s, max_path_edges=args.m)
    header = f"{'model':>10} {'loops':>8} {'pure (s)':>10} {'compiled (s)':>13} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for size in (int(s) for s in args.sizes.split(",")):
        core = two_core(ising_grid(size, spec))
        t_pure, r_pure = best_time(core, bounds, "pure", args.repeats)
        t_comp, r_comp = best_time(core, bounds, "compiled", args.repeats)
        if r_pure.keys() != r_comp.keys():
            print(f"backend mismatch on {size}x{size}", file=sys.stderr)
            return 1
        print(f"{f'{size}x{size} grid':>10} {r_comp.n_loops:>8} "
              f"{t_pure:>10.4f} {t_comp:>13.4f} {t_pure / t_comp:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
