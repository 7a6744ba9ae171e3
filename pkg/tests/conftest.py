import math

import numpy as np
import pytest

from loopbp.graph import FactorTable, build


def unary(i, theta):
    return FactorTable((i,), np.array([math.exp(-theta), math.exp(theta)]))


def pair(i, j, coupling):
    e = math.exp(coupling)
    return FactorTable((i, j), np.array([e, 1.0 / e, 1.0 / e, e]))


def cycle_graph(k, coupling=0.5, theta=0.0):
    """Single cycle of k variables joined by pair factors."""
    tables = [pair(i, (i + 1) % k, coupling) for i in range(k)]
    if theta:
        tables += [unary(i, theta) for i in range(k)]
    return build(k, tables)


def theta_graph(coupling=0.4):
    """Two hub variables joined by three 2-edge paths (vars 2, 3, 4)."""
    tables = []
    for mid in (2, 3, 4):
        tables.append(pair(0, mid, coupling))
        tables.append(pair(mid, 1, coupling))
    return build(5, tables)


def chain_graph(n, coupling=0.7, theta=0.3):
    tables = [pair(i, i + 1, coupling) for i in range(n - 1)]
    tables += [unary(i, theta * (-1) ** i) for i in range(n)]
    return build(n, tables)


def random_tree(n, rng):
    """Uniform random attachment tree with random couplings and fields."""
    tables = []
    for i in range(1, n):
        parent = int(rng.integers(0, i))
        tables.append(pair(parent, i, float(rng.normal(0, 0.8))))
    for i in range(n):
        tables.append(unary(i, float(rng.normal(0, 0.4))))
    return build(n, tables)


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)
