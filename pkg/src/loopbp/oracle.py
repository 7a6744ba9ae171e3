"""Brute-force ground truth at desk scale.

Everything here enumerates: states for partition sums and marginals, edge
subsets for loop censuses. The point is independence from the fast paths,
so none of this shares code with the BP engine or the loop search.
"""

from __future__ import annotations

import numpy as np

from .graph import CoreSubgraph, FactorGraph
from .loops import GeneralizedLoop, LoopClass, classify

ORACLE_MAX_VARS = 25
ORACLE_MAX_EDGES = 20

_CHUNK_BITS = 20


class OracleCeilingError(RuntimeError):
    """The request exceeds the configured brute-force ceiling."""


def _check_vars(g: FactorGraph, max_vars: int):
    if g.n_vars > max_vars:
        raise OracleCeilingError(
            f"{g.n_vars} variables exceed the exact-enumeration ceiling {max_vars}"
        )


def _log_tables(g: FactorGraph) -> list[np.ndarray]:
    with np.errstate(divide="ignore"):
        return [np.log(t.values) for t in g.factors]


def _chunk_logw(g: FactorGraph, log_tables, lo: int, hi: int) -> np.ndarray:
    """Log weight of every joint state in [lo, hi); bit v of the state index
    is variable v (0 means -1)."""
    idx = np.arange(lo, hi, dtype=np.int64)
    touched = {v for t in g.factors for v in t.scope}
    bits = {v: ((idx >> v) & 1).astype(np.int32) for v in touched}
    logw = np.zeros(hi - lo)
    for t, logt in zip(g.factors, log_tables):
        if not t.scope:
            logw += logt[0]
            continue
        ti = bits[t.scope[0]]
        for v in t.scope[1:]:
            ti = (ti << 1) | bits[v]
        logw += logt[ti]
    return logw


def _logsumexp(a: np.ndarray) -> float:
    m = float(np.max(a)) if a.size else -np.inf
    if not np.isfinite(m):
        return m
    return m + float(np.log(np.sum(np.exp(a - m))))


def _chunks(n_states: int):
    step = 1 << _CHUNK_BITS
    for lo in range(0, n_states, step):
        yield lo, min(lo + step, n_states)


def exact_log_z(g: FactorGraph, max_vars: int = ORACLE_MAX_VARS) -> float:
    """log of the partition sum by full state enumeration."""
    _check_vars(g, max_vars)
    log_tables = _log_tables(g)
    parts = [
        _logsumexp(_chunk_logw(g, log_tables, lo, hi))
        for lo, hi in _chunks(2**g.n_vars)
    ]
    return _logsumexp(np.array(parts))


def exact_marginals(g: FactorGraph, max_vars: int = ORACLE_MAX_VARS) -> np.ndarray:
    """(n_vars, 2) array of exact single-variable marginals, columns (-1, +1)."""
    _check_vars(g, max_vars)
    log_tables = _log_tables(g)
    parts = {(v, s): [] for v in range(g.n_vars) for s in (0, 1)}
    for lo, hi in _chunks(2**g.n_vars):
        logw = _chunk_logw(g, log_tables, lo, hi)
        idx = np.arange(lo, hi, dtype=np.int64)
        for v in range(g.n_vars):
            bit = (idx >> v) & 1
            parts[(v, 0)].append(_logsumexp(logw[bit == 0]))
            parts[(v, 1)].append(_logsumexp(logw[bit == 1]))
    out = np.empty((g.n_vars, 2))
    for v in range(g.n_vars):
        lz = [_logsumexp(np.array(parts[(v, s)])) for s in (0, 1)]
        shift = max(lz)
        w = np.exp(np.array(lz) - shift)
        out[v] = w / w.sum()
    return out


def brute_force_loops(
    core: CoreSubgraph, max_edges: int = ORACLE_MAX_EDGES
) -> list[tuple[GeneralizedLoop, LoopClass]]:
    """Every generalized loop of a small 2-core, by testing all edge subsets.

    Returns (loop, classification) pairs sorted by (length, edge tuple).
    """
    ne = core.n_edges
    if ne > max_edges:
        raise OracleCeilingError(f"{ne} core edges exceed the subset ceiling {max_edges}")
    if ne == 0:
        return []

    nodes = core.nodes()
    node_pos = {v: k for k, v in enumerate(nodes)}
    incidence = np.zeros(len(nodes), dtype=np.uint64)
    for e_local, e in enumerate(core.edge_ids):
        i, a = core.edge_endpoints(e)
        incidence[node_pos[i]] |= np.uint64(1 << e_local)
        incidence[node_pos[a]] |= np.uint64(1 << e_local)

    masks = np.arange(1, 2**ne, dtype=np.uint64)
    valid = np.ones(masks.size, dtype=bool)
    for inc in incidence:
        deg = np.bitwise_count(masks & inc)
        valid &= deg != 1

    out = []
    for mask in masks[valid]:
        mask = int(mask)
        edges = tuple(core.edge_ids[b] for b in range(ne) if mask >> b & 1)
        loop = GeneralizedLoop(edges)
        out.append((loop, classify(core, loop)))
    out.sort(key=lambda pair: (len(pair[0].edges), pair[0].edges))
    return out
