"""Test-bed model generators: Ising grids, random regular graphs, noisy-OR.

Randomness is fully reproducible and platform independent: every factor
draws its parameters from its own Philox substream keyed by (seed, factor
id), and normal variates come from the inverse CDF applied to a 53-bit
uniform, so no rejection-sampling state leaks between factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .graph import FactorGraph, FactorTable, build

_TOPOLOGY_STREAM = 2**64 - 1
_REJECTION_BUDGET = 10_000
_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class CouplingSpec:
    """How to draw Ising couplings and fields.

    family: "spin_glass" draws couplings from Normal(0, coupling_std**2),
    "ferromagnetic" takes their absolute value. Fields are always
    Normal(field_mean, field_std**2).
    """

    family: str = "spin_glass"
    coupling_std: float = 0.5
    field_mean: float = 0.0
    field_std: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.family not in ("spin_glass", "ferromagnetic"):
            raise ValueError(f"unknown coupling family {self.family!r}")
        if self.coupling_std < 0 or self.field_std < 0:
            raise ValueError("negative standard deviation")


def _stream(seed: int, stream_id: int) -> np.random.Generator:
    key = np.array([seed & (2**64 - 1), stream_id & (2**64 - 1)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _normal(rng: np.random.Generator, mean: float, std: float) -> float:
    # (i + 0.5) / 2**53 is a uniform strictly inside (0, 1), so inv_cdf
    # stays finite.
    u = (int(rng.integers(0, 1 << 53)) + 0.5) * 2.0**-53
    return mean + std * _STD_NORMAL.inv_cdf(u)


def _pair_table(i: int, j: int, theta: float) -> FactorTable:
    w, iw = math.exp(theta), math.exp(-theta)
    return FactorTable((i, j), np.array([w, iw, iw, w]))


def _unary_table(i: int, theta: float) -> FactorTable:
    return FactorTable((i,), np.array([math.exp(-theta), math.exp(theta)]))


def _coupling(spec: CouplingSpec, factor_id: int) -> float:
    theta = _normal(_stream(spec.seed, factor_id), 0.0, spec.coupling_std)
    return abs(theta) if spec.family == "ferromagnetic" else theta


def _field(spec: CouplingSpec, factor_id: int) -> float:
    return _normal(_stream(spec.seed, factor_id), spec.field_mean, spec.field_std)


def _ising_graph(n_vars: int, pairs: Sequence[tuple[int, int]], spec: CouplingSpec) -> FactorGraph:
    tables = [_pair_table(i, j, _coupling(spec, a)) for a, (i, j) in enumerate(pairs)]
    base = len(pairs)
    tables += [_unary_table(i, _field(spec, base + i)) for i in range(n_vars)]
    return build(n_vars, tables)


def grid_pairs(size: int) -> list[tuple[int, int]]:
    """Nearest-neighbour pairs of a size x size lattice, row-major ids."""
    pairs = []
    for r in range(size):
        for c in range(size - 1):
            v = r * size + c
            pairs.append((v, v + 1))
    for r in range(size - 1):
        for c in range(size):
            v = r * size + c
            pairs.append((v, v + size))
    return pairs


def ising_grid(size: int, spec: CouplingSpec) -> FactorGraph:
    """size x size Ising lattice: pairwise factors first, then unary fields."""
    if size < 2:
        raise ValueError("grid size must be at least 2")
    return _ising_graph(size * size, grid_pairs(size), spec)


def regular_pairs(n: int, degree: int, seed: int) -> list[tuple[int, int]]:
    """A uniform simple d-regular graph via the rejected configuration model."""
    if n * degree % 2:
        raise ValueError("n * degree must be even")
    if degree >= n:
        raise ValueError("degree must be below n")
    rng = _stream(seed, _TOPOLOGY_STREAM)
    stubs = np.repeat(np.arange(n), degree)
    for _ in range(_REJECTION_BUDGET):
        perm = rng.permutation(stubs)
        pairs = sorted(tuple(sorted(p)) for p in perm.reshape(-1, 2))
        if all(i != j for i, j in pairs) and len(set(pairs)) == len(pairs):
            return [(int(i), int(j)) for i, j in pairs]
    raise RuntimeError(
        f"no simple {degree}-regular pairing on {n} nodes after "
        f"{_REJECTION_BUDGET} attempts"
    )


def random_regular(n: int, degree: int, spec: CouplingSpec) -> FactorGraph:
    """Random d-regular Ising model; whole-graph rejection keeps it simple."""
    return _ising_graph(n, regular_pairs(n, degree, spec.seed), spec)


@dataclass(frozen=True)
class NoisyOrFactors:
    """Pairwise/triple-wise decomposition of one noisy-OR conditional.

    Variable ids: 0 is the child, 1..n_parents are the causes, anything
    above that is an auxiliary chain variable to be summed out (kept out of
    marginal reports).
    """

    tables: tuple[FactorTable, ...]
    n_parents: int
    dummies: tuple[int, ...]


def noisy_or_decompose(n_parents: int, probs: Sequence[float]) -> NoisyOrFactors:
    """Split P(child | causes) into a chain of tables over at most 3 variables.

    probs is (leak, p_1, ..., p_n): the child stays off with probability
    (1 - leak) * prod over active causes of (1 - p_j). The chain rewrites
    the OR over n causes as ORs over two inputs, one fresh dummy per link,
    which leaves every factor with scope <= 3 regardless of n.
    """
    probs = [float(p) for p in probs]
    if n_parents < 1:
        raise ValueError("need at least one cause")
    if len(probs) != n_parents + 1:
        raise ValueError(f"need {n_parents + 1} probabilities, got {len(probs)}")
    if any(not 0 <= p <= 1 for p in probs):
        raise ValueError("probabilities must lie in [0, 1]")
    leak, p = probs[0], probs[1:]
    q = [1.0 - pj for pj in p]

    def table(scope, off_prob):
        # off_prob(maps the on/off pattern of scope[1:] to P(scope[0]=off | .))
        k = len(scope)
        values = np.empty(2**k)
        for idx in range(2**k):
            bits = [(idx >> (k - 1 - t)) & 1 for t in range(k)]
            off = off_prob(bits[1:])
            values[idx] = off if bits[0] == 0 else 1.0 - off
        return FactorTable(tuple(scope), values)

    if n_parents == 1:
        tables = [table((0, 1), lambda b: (1 - leak) * q[0] ** b[0])]
        return NoisyOrFactors(tuple(tables), 1, ())
    if n_parents == 2:
        tables = [table((0, 1, 2), lambda b: (1 - leak) * q[0] ** b[0] * q[1] ** b[1])]
        return NoisyOrFactors(tuple(tables), 2, ())

    dummies = tuple(range(n_parents + 1, 2 * n_parents - 1))
    tables = [
        table(
            (0, 1, dummies[0]),
            lambda b: (1 - leak) * q[0] ** b[0] * (0.0 if b[1] else 1.0),
        )
    ]
    for t in range(1, n_parents - 2):
        qt = q[t]
        tables.append(
            table(
                (dummies[t - 1], t + 1, dummies[t]),
                lambda b, qt=qt: qt ** b[0] * (0.0 if b[1] else 1.0),
            )
        )
    tables.append(
        table(
            (dummies[-1], n_parents - 1, n_parents),
            lambda b: q[-2] ** b[0] * q[-1] ** b[1],
        )
    )
    return NoisyOrFactors(tuple(tables), n_parents, dummies)


def noisy_or_table(n_parents: int, probs: Sequence[float]) -> FactorTable:
    """The monolithic 2**(n+1) conditional table, for oracle comparisons."""
    probs = [float(p) for p in probs]
    leak, p = probs[0], probs[1:]
    k = n_parents + 1
    values = np.empty(2**k)
    for idx in range(2**k):
        bits = [(idx >> (k - 1 - t)) & 1 for t in range(k)]
        off = 1.0 - leak
        for j in range(n_parents):
            if bits[1 + j]:
                off *= 1.0 - p[j]
        values[idx] = off if bits[0] == 0 else 1.0 - off
    return FactorTable(tuple(range(k)), values)
