"""Backend selection for the union-closure kernel.

The compiled Cython kernel is used when its extension imported cleanly and
the LOOPBP_PURE environment variable is not set; the pure-Python kernel is
the always-available fallback. Both implement the same algorithm and are
required (and tested) to return identical results.
"""

from __future__ import annotations

import os

from . import _purecore

try:
    from . import _loopcore
except ImportError:
    _loopcore = None


def compiled_available() -> bool:
    return _loopcore is not None


def resolve_backend(name: str = "auto") -> str:
    if name == "auto":
        if os.environ.get("LOOPBP_PURE") == "1" or _loopcore is None:
            return "pure"
        return "compiled"
    if name == "compiled" and _loopcore is None:
        raise RuntimeError("compiled kernel is not available in this install")
    if name not in ("pure", "compiled"):
        raise ValueError(f"unknown backend {name!r}")
    return name


def run_closure(ctx, seeds, m_bound: int, b_bound: int, backend: str):
    name = resolve_backend(backend)
    if name == "pure":
        return _purecore.run_closure(ctx, seeds, m_bound, b_bound)
    indptr, adj_e, adj_w, edge_u, edge_w = ctx.csr()
    return _loopcore.run_closure(
        ctx.n_nodes, ctx.n_edges, indptr, adj_e, adj_w, edge_u, edge_w,
        list(seeds), m_bound, b_bound,
    )
