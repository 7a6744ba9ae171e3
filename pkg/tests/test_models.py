import itertools
import math

import numpy as np
import pytest

from loopbp.models import (
    CouplingSpec,
    grid_pairs,
    ising_grid,
    noisy_or_decompose,
    noisy_or_table,
    random_regular,
    regular_pairs,
)


def test_grid_pairs_counts_and_adjacency():
    pairs = grid_pairs(3)
    assert len(pairs) == 12
    assert len(set(pairs)) == 12
    for i, j in pairs:
        ri, ci = divmod(i, 3)
        rj, cj = divmod(j, 3)
        assert abs(ri - rj) + abs(ci - cj) == 1


def test_ising_grid_shape():
    g = ising_grid(4, CouplingSpec("spin_glass", 0.5, seed=0))
    assert g.n_vars == 16
    assert g.n_factors == 16 + 24
    unaries = [t for t in g.factors if len(t.scope) == 1]
    pairs = [t for t in g.factors if len(t.scope) == 2]
    assert len(unaries) == 16 and len(pairs) == 24
    for t in pairs:
        # exp(J x_i x_j): equal on agree states, reciprocal on disagree
        assert t.values[0] == pytest.approx(t.values[3])
        assert t.values[1] == pytest.approx(t.values[2])
        assert t.values[0] * t.values[1] == pytest.approx(1.0)


def test_ising_grid_seeded_reproducibility():
    spec = CouplingSpec("spin_glass", 0.7, field_std=0.1, seed=11)
    a = ising_grid(3, spec)
    b = ising_grid(3, spec)
    for ta, tb in zip(a.factors, b.factors):
        assert np.array_equal(ta.values, tb.values)
    c = ising_grid(3, CouplingSpec("spin_glass", 0.7, field_std=0.1, seed=12))
    assert any(
        not np.array_equal(ta.values, tc.values)
        for ta, tc in zip(a.factors, c.factors)
    )


def test_ferromagnetic_couplings_nonnegative():
    g = ising_grid(4, CouplingSpec("ferromagnetic", 0.8, seed=3))
    for t in g.factors:
        if len(t.scope) == 2:
            # J >= 0 means the agree entries dominate
            assert t.values[0] >= t.values[1]


def test_coupling_spec_rejects_unknown_family():
    with pytest.raises(ValueError):
        CouplingSpec("antiferro", 0.5)


def test_regular_pairs_degree():
    pairs = regular_pairs(10, 3, seed=0)
    deg = [0] * 10
    for i, j in pairs:
        assert i != j
        deg[i] += 1
        deg[j] += 1
    assert deg == [3] * 10
    assert len(set(map(tuple, map(sorted, pairs)))) == len(pairs)


def test_regular_pairs_rejects_odd_total():
    with pytest.raises(ValueError):
        regular_pairs(5, 3, seed=0)


def test_random_regular_graph():
    g = random_regular(12, 3, CouplingSpec("spin_glass", 0.5, seed=4))
    assert g.n_vars == 12
    n_pairs = sum(1 for t in g.factors if len(t.scope) == 2)
    assert n_pairs == 18  # n*d/2


def _eliminate_dummies(dec, idx, n_parents):
    """Sum the decomposition product over dummy states at one joint index."""
    assign = {v: (idx >> (n_parents - v)) & 1 for v in range(n_parents + 1)}
    total = 0.0
    for dvals in itertools.product((0, 1), repeat=len(dec.dummies)):
        assign.update(zip(dec.dummies, dvals))
        p = 1.0
        for t in dec.tables:
            j = 0
            for v in t.scope:
                j = (j << 1) | assign[v]
            p *= t.values[j]
        total += p
    return total


def test_noisy_or_two_parents_by_hand():
    leak, p1, p2 = 0.1, 0.3, 0.8
    t = noisy_or_table(2, [leak, p1, p2])
    # child off, both causes active
    off = (1 - leak) * (1 - p1) * (1 - p2)
    assert t.values[t.state_index([-1, +1, +1])] == pytest.approx(off)
    assert t.values[t.state_index([+1, +1, +1])] == pytest.approx(1 - off)
    # no causes active: only the leak can flip the child
    assert t.values[t.state_index([+1, -1, -1])] == pytest.approx(leak)


def test_noisy_or_decomposition_matches_table():
    probs = [0.05, 0.2, 0.5, 0.9, 0.35]
    n = 4
    dec = noisy_or_decompose(n, probs)
    mono = noisy_or_table(n, probs)
    assert all(len(t.scope) <= 3 for t in dec.tables)
    for idx in range(2 ** (n + 1)):
        assert _eliminate_dummies(dec, idx, n) == pytest.approx(
            mono.values[idx], abs=1e-14
        )


def test_noisy_or_validation():
    with pytest.raises(ValueError):
        noisy_or_decompose(0, [0.1])
    with pytest.raises(ValueError):
        noisy_or_decompose(2, [0.1, 0.2])
    with pytest.raises(ValueError):
        noisy_or_decompose(1, [0.1, 1.5])
