"""Generalized loop enumeration against the brute-force subgraph oracle."""

import itertools

import numpy as np
import pytest

from conftest import cycle_graph, pair, theta_graph, unary
from loopbp.graph import build, two_core
from loopbp.kernel import compiled_available
from loopbp.loops import (
    SearchBounds,
    census_counts,
    classify,
    enumerate_loops,
    length_histogram,
)
from loopbp.models import CouplingSpec, ising_grid, random_regular
from loopbp.oracle import brute_force_loops

BACKENDS = ["pure"] + (["compiled"] if compiled_available() else [])


def exhaustive(core, backend="auto"):
    return enumerate_loops(core, SearchBounds.exhaustive(core), backend=backend)


def test_single_cycle_has_one_loop():
    core = two_core(cycle_graph(4))
    enum = exhaustive(core)
    assert enum.n_loops == 1 and enum.n_simple == 1
    (loop,) = enum.loops
    assert loop.length == 8
    assert loop.edges == tuple(range(8))
    cls = classify(core, loop)
    assert cls.is_simple and not cls.is_disconnected and not cls.is_complex


def test_theta_graph_four_loops():
    core = two_core(theta_graph())
    enum = exhaustive(core)
    assert enum.n_loops == 4
    assert enum.n_simple == 3
    classes = [classify(core, l) for l in enum.loops]
    census = census_counts(classes)
    assert census["simple"] == 3
    # the full theta is a union of overlapping cycles: connected, every
    # edge on a cycle, so neither simple nor complex nor disconnected
    assert census["neither"] == 1
    assert census["complex_connected"] == 0
    assert census["complex_disconnected"] == 0
    assert census["disconnected_only"] == 0


def test_two_disjoint_components_multiply():
    # two theta graphs, no shared nodes: (4+1)(4+1)-1 loop combinations
    tables = []
    for off in (0, 5):
        for mid in (2, 3, 4):
            tables.append(pair(off + 0, off + mid, 0.3))
            tables.append(pair(off + mid, off + 1, 0.3))
    g = build(10, tables)
    core = two_core(g)
    enum = exhaustive(core)
    assert enum.n_loops == 24
    census = census_counts([classify(core, l) for l in enum.loops])
    assert census["total"] == 24
    assert census["simple"] == 6
    # every cross-side union (4 x 4 choices) splits into two components
    assert census["disconnected_only"] == 16
    assert census["neither"] == 2
    assert census["complex_connected"] == 0
    assert census["complex_disconnected"] == 0


@pytest.mark.parametrize("backend", BACKENDS)
def test_matches_brute_force_on_small_cores(backend, rng):
    checked = 0
    attempts = 0
    while checked < 12 and attempts < 400:
        attempts += 1
        n = int(rng.integers(4, 9))
        p = 0.35
        tables = [
            pair(i, j, 0.2)
            for i, j in itertools.combinations(range(n), 2)
            if rng.random() < p
        ]
        if not tables:
            continue
        core = two_core(build(n, tables))
        if core.is_empty or core.n_edges > 18:
            continue
        enum = exhaustive(core, backend=backend)
        reference = brute_force_loops(core)
        assert set(enum.keys()) == {l.key for l, _ in reference}, (
            f"mismatch on a core with {core.n_edges} edges"
        )
        # classification must agree with the subset oracle's, member by member
        for loop, cls in reference:
            ours = classify(core, loop)
            assert ours.is_simple == cls.is_simple
            assert ours.is_disconnected == cls.is_disconnected
            assert ours.is_complex == cls.is_complex
        checked += 1
    assert checked == 12


def test_backends_agree_exactly():
    if not compiled_available():
        pytest.skip("compiled kernel not built")
    g = ising_grid(4, CouplingSpec("spin_glass", 0.5, seed=0))
    core = two_core(g)
    bounds = SearchBounds(max_simple_loops=150)
    a = enumerate_loops(core, bounds, backend="pure")
    b = enumerate_loops(core, bounds, backend="compiled")
    assert a.keys() == b.keys()
    assert a.n_simple == b.n_simple
    assert a.b_used == b.b_used and a.m_used == b.m_used
    assert a.merge_iterations == b.merge_iterations


def test_grid_4x4_exhaustive_census():
    core = two_core(ising_grid(4, CouplingSpec("spin_glass", 0.5, seed=0)))
    enum = exhaustive(core)
    assert enum.n_loops == 16371
    assert enum.n_simple == 213
    assert enum.merge_iterations == 4
    hist = length_histogram(enum.loops)
    assert min(hist) == 8 and max(hist) == 48
    assert sum(hist.values()) == 16371


def test_loops_unique_and_sorted():
    core = two_core(ising_grid(4, CouplingSpec("spin_glass", 0.5, seed=0)))
    enum = enumerate_loops(core, SearchBounds(max_simple_loops=80))
    keys = enum.keys()
    assert len(set(keys)) == len(keys)
    ordering = [(l.length, l.edges) for l in enum.loops]
    assert ordering == sorted(ordering)


def test_truncation_is_monotone():
    core = two_core(ising_grid(4, CouplingSpec("spin_glass", 0.5, seed=1)))
    small = enumerate_loops(core, SearchBounds(max_simple_loops=20))
    large = enumerate_loops(core, SearchBounds(max_simple_loops=60))
    assert set(small.keys()) <= set(large.keys())
    assert small.n_simple == 20 and large.n_simple == 60
    assert small.b_used <= large.b_used


def test_path_budget_zero_keeps_seed_loops_only():
    core = two_core(ising_grid(3, CouplingSpec("spin_glass", 0.5, seed=0)))
    enum = enumerate_loops(
        core, SearchBounds(max_simple_loops=50, max_path_edges=0)
    )
    # without bridging, growth can only come from disjoint unions
    for loop in enum.loops:
        cls = classify(core, loop)
        assert not cls.is_complex


def test_loop_size_bound_respected():
    core = two_core(ising_grid(4, CouplingSpec("spin_glass", 0.5, seed=0)))
    enum = enumerate_loops(
        core, SearchBounds(max_simple_loops=213, max_loop_edges=12)
    )
    assert all(l.length <= 12 for l in enum.loops)


def test_random_regular_core_is_whole_graph():
    g = random_regular(14, 3, CouplingSpec("spin_glass", 0.5, seed=6))
    core = two_core(g)
    pair_count = sum(1 for t in g.factors if len(t.scope) == 2)
    assert len(core.factors) == pair_count
    assert len(core.variables) == 14


def test_bounds_validation():
    with pytest.raises(ValueError):
        SearchBounds(max_simple_loops=0)
    with pytest.raises(ValueError):
        SearchBounds(max_simple_loops=10, max_path_edges=-1)
