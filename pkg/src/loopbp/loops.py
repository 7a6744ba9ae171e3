"""Generalized-loop search on the 2-core of a factor graph.

A generalized loop is a nonempty edge subset in which every touched node
(variable or factor) keeps degree at least two. The enumeration follows the
merge strategy: collect the shortest simple loops first, then close the set
under pairwise unions, bridging disconnected unions with short paths found
by depth-first search. Bounds:

* max_simple_loops: how many shortest simple loops seed the search,
* max_loop_edges: hard cap on loop size; by default the length of the
  longest seeded simple loop,
* max_path_edges: cap on one bridging path, reset after every connection.

Edge sets are manipulated as integer bitmasks over the core's edge list;
a compiled kernel does the union closure when available (see kernel.py).
"""

from __future__ import annotations

import heapq
import weakref
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernel
from ._purecore import expand_union as _expand, merge_comp_lists as _merge_comp_lists
from .graph import CoreSubgraph

_INF = float("inf")


@dataclass(frozen=True)
class GeneralizedLoop:
    """An edge subset, stored as the sorted tuple of global edge ids."""

    edges: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(sorted(self.edges)))

    @property
    def length(self) -> int:
        return len(self.edges)

    @property
    def key(self) -> str:
        """Canonical identity string; equal exactly for equal edge sets."""
        return "-".join(str(e) for e in self.edges)

    def vertices(self, core: CoreSubgraph) -> frozenset[int]:
        out = set()
        for e in self.edges:
            out.update(core.edge_endpoints(e))
        return frozenset(out)


@dataclass(frozen=True)
class LoopClass:
    is_simple: bool
    is_disconnected: bool
    is_complex: bool


@dataclass(frozen=True)
class SearchBounds:
    """Truncation knobs; None means unbounded / derive from the search."""

    max_simple_loops: int | None = None
    max_path_edges: int | None = None
    max_loop_edges: int | None = None

    def __post_init__(self):
        if self.max_simple_loops is not None and self.max_simple_loops < 1:
            raise ValueError("max_simple_loops must be at least 1")
        if self.max_path_edges is not None and self.max_path_edges < 0:
            raise ValueError("max_path_edges must not be negative")
        if self.max_loop_edges is not None and self.max_loop_edges < 1:
            raise ValueError("max_loop_edges must be at least 1")

    @classmethod
    def exhaustive(cls, core: CoreSubgraph) -> "SearchBounds":
        n = core.n_edges
        return cls(max_simple_loops=None, max_path_edges=n, max_loop_edges=n)


@dataclass(frozen=True)
class EnumerationResult:
    loops: tuple[GeneralizedLoop, ...]
    discovery_iterations: tuple[int, ...]
    merge_iterations: int
    n_simple: int
    b_used: int
    m_used: int
    backend: str

    @property
    def n_loops(self) -> int:
        return len(self.loops)

    def keys(self) -> frozenset[str]:
        return frozenset(l.key for l in self.loops)


class _SearchContext:
    """Core adjacency in local, dense indices; shared by all loop routines."""

    def __init__(self, core: CoreSubgraph):
        self.core = core
        self.edge_ids = core.edge_ids
        self.edge_pos = {e: p for p, e in enumerate(core.edge_ids)}
        self.nodes = core.nodes()
        self.node_pos = {v: p for p, v in enumerate(self.nodes)}
        self.n_edges = len(self.edge_ids)
        self.n_nodes = len(self.nodes)

        adj: list[list[tuple[int, int]]] = [[] for _ in self.nodes]
        edge_nodes = []
        edge_vmask = []
        for p, e in enumerate(self.edge_ids):
            i, a = core.edge_endpoints(e)
            u, w = self.node_pos[i], self.node_pos[a]
            adj[u].append((p, w))
            adj[w].append((p, u))
            edge_nodes.append((u, w))
            edge_vmask.append((1 << u) | (1 << w))
        self.adj = tuple(tuple(sorted(nbrs)) for nbrs in adj)
        self.edge_nodes = tuple(edge_nodes)
        self.edge_vmask = tuple(edge_vmask)
        self._csr = None

    def csr(self):
        """Flat int32 arrays of the adjacency, for the compiled kernel."""
        if self._csr is None:
            indptr = np.zeros(self.n_nodes + 1, dtype=np.int32)
            for v, nbrs in enumerate(self.adj):
                indptr[v + 1] = indptr[v] + len(nbrs)
            adj_e = np.empty(indptr[-1], dtype=np.int32)
            adj_w = np.empty(indptr[-1], dtype=np.int32)
            k = 0
            for nbrs in self.adj:
                for e, w in nbrs:
                    adj_e[k], adj_w[k] = e, w
                    k += 1
            eu = np.array([uw[0] for uw in self.edge_nodes], dtype=np.int32)
            ew = np.array([uw[1] for uw in self.edge_nodes], dtype=np.int32)
            self._csr = (indptr, adj_e, adj_w, eu, ew)
        return self._csr

    def mask_of(self, edges: Iterable[int]) -> int:
        mask = 0
        for e in edges:
            try:
                mask |= 1 << self.edge_pos[e]
            except KeyError:
                raise ValueError(f"edge {e} is not in the 2-core") from None
        return mask

    def loop_of(self, mask: int) -> GeneralizedLoop:
        edges = []
        while mask:
            low = mask & -mask
            edges.append(self.edge_ids[low.bit_length() - 1])
            mask ^= low
        return GeneralizedLoop(tuple(edges))

    def vertices_of(self, mask: int) -> int:
        vm = 0
        evm = self.edge_vmask
        while mask:
            low = mask & -mask
            vm |= evm[low.bit_length() - 1]
            mask ^= low
        return vm


_CTX_CACHE: "weakref.WeakKeyDictionary[CoreSubgraph, _SearchContext]"
_CTX_CACHE = weakref.WeakKeyDictionary()


def _context(core: CoreSubgraph) -> _SearchContext:
    ctx = _CTX_CACHE.get(core)
    if ctx is None:
        ctx = _SearchContext(core)
        _CTX_CACHE[core] = ctx
    return ctx


def is_generalized_loop(core: CoreSubgraph, edges: Iterable[int]) -> bool:
    """True when the edge subset is nonempty and every touched node has
    degree at least 2 inside it. Edges outside the core are an error."""
    ctx = _context(core)
    mask = ctx.mask_of(edges)
    if mask == 0:
        return False
    deg = {}
    m = mask
    while m:
        low = m & -m
        u, w = ctx.edge_nodes[low.bit_length() - 1]
        deg[u] = deg.get(u, 0) + 1
        deg[w] = deg.get(w, 0) + 1
        m ^= low
    return all(d >= 2 for d in deg.values())


def _subgraph_adj(ctx: _SearchContext, mask: int) -> dict[int, list[tuple[int, int]]]:
    adj: dict[int, list[tuple[int, int]]] = {}
    m = mask
    while m:
        low = m & -m
        p = low.bit_length() - 1
        u, w = ctx.edge_nodes[p]
        adj.setdefault(u, []).append((p, w))
        adj.setdefault(w, []).append((p, u))
        m ^= low
    return adj


def _count_components(adj: dict[int, list[tuple[int, int]]]) -> int:
    seen: set[int] = set()
    n = 0
    for root in adj:
        if root in seen:
            continue
        n += 1
        queue = deque([root])
        seen.add(root)
        while queue:
            v = queue.popleft()
            for _, w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
    return n


def _has_bridge(adj: dict[int, list[tuple[int, int]]]) -> bool:
    """Iterative lowlink scan; a bridge edge is one on no cycle."""
    disc: dict[int, int] = {}
    low: dict[int, int] = {}
    timer = 0
    for root in adj:
        if root in disc:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            node, pedge, nbrs = stack[-1]
            advanced = False
            for e, w in nbrs:
                if e == pedge:
                    continue
                if w in disc:
                    low[node] = min(low[node], disc[w])
                else:
                    disc[w] = low[w] = timer
                    timer += 1
                    stack.append((w, e, iter(adj[w])))
                    advanced = True
                    break
            if not advanced:
                stack.pop()
                if stack:
                    parent = stack[-1][0]
                    low[parent] = min(low[parent], low[node])
                    if low[node] > disc[parent]:
                        return True
    return False


def classify(core: CoreSubgraph, loop: GeneralizedLoop) -> LoopClass:
    """Simple / disconnected / complex flags.

    Complex means not expressible as a union of simple loops, which holds
    exactly when some edge lies on no cycle of the subset, i.e. when the
    subset contains a bridge.
    """
    ctx = _context(core)
    mask = ctx.mask_of(loop.edges)
    adj = _subgraph_adj(ctx, mask)
    n_comp = _count_components(adj)
    all_deg2 = all(len(nbrs) == 2 for nbrs in adj.values())
    is_complex = _has_bridge(adj)
    return LoopClass(
        is_simple=n_comp == 1 and all_deg2,
        is_disconnected=n_comp > 1,
        is_complex=is_complex,
    )


def census_counts(classes: Sequence[LoopClass]) -> dict[str, int]:
    counts = {
        "total": len(classes),
        "simple": 0,
        "complex_disconnected": 0,
        "complex_connected": 0,
        "disconnected_only": 0,
        "neither": 0,
    }
    for c in classes:
        if c.is_simple:
            counts["simple"] += 1
        elif c.is_complex and c.is_disconnected:
            counts["complex_disconnected"] += 1
        elif c.is_complex:
            counts["complex_connected"] += 1
        elif c.is_disconnected:
            counts["disconnected_only"] += 1
        else:
            counts["neither"] += 1
    return counts


def length_histogram(loops: Sequence[GeneralizedLoop]) -> dict[int, int]:
    hist: dict[int, int] = {}
    for l in loops:
        hist[l.length] = hist.get(l.length, 0) + 1
    return dict(sorted(hist.items()))


def _bfs_dist(ctx: _SearchContext, start: int) -> list[float]:
    dist = [_INF] * ctx.n_nodes
    dist[start] = 0
    queue = deque([start])
    while queue:
        v = queue.popleft()
        d = dist[v] + 1
        for _, w in ctx.adj[v]:
            if dist[w] > d:
                dist[w] = d
                queue.append(w)
    return dist


def simple_loops(
    core: CoreSubgraph,
    max_count: int | None = None,
    length_cap: int | None = None,
) -> tuple[list[GeneralizedLoop], int]:
    """The max_count shortest simple loops, ordered by (length, edge tuple).

    Ties at the cutoff are resolved by that same total order, so the result
    is exactly max_count loops whenever the core has that many. Also
    returns the length of the longest loop kept, the derived size bound for
    the merge stage.

    Every cycle is generated exactly once: paths are anchored at the
    cycle's smallest edge, walked from its variable endpoint, and may only
    use edges with larger ids.
    """
    ctx = _context(core)
    cap = length_cap if length_cap is not None else _INF
    found: list[tuple[int, tuple[int, ...]]] = []
    # max-heap (negated) of the best max_count lengths seen, to shrink cap
    worst: list[int] = []

    heap = []
    for anchor in range(ctx.n_edges):
        u0, u1 = ctx.edge_nodes[anchor]
        dist = _bfs_dist(ctx, u0)
        # (length, edge sequence, last node, visited mask); lexicographic
        # pop order makes the expansion shortest-first
        start = (1, (anchor,), u1, (1 << u0) | (1 << u1), dist)
        heapq.heappush(heap, start)

    while heap:
        length, seq, last, visited, dist = heapq.heappop(heap)
        if length + 1 > cap:
            continue
        anchor = seq[0]
        u0 = ctx.edge_nodes[anchor][0]
        for e, w in ctx.adj[last]:
            if e <= anchor:
                continue
            if w == u0:
                found.append((length + 1, tuple(sorted(seq + (e,)))))
                if max_count is not None:
                    heapq.heappush(worst, -(length + 1))
                    if len(worst) > max_count:
                        heapq.heappop(worst)
                    if len(worst) == max_count:
                        cap = min(cap, -worst[0])
            elif not visited >> w & 1:
                nl = length + 1
                if nl + dist[w] <= cap:
                    heapq.heappush(
                        heap, (nl, seq + (e,), w, visited | (1 << w), dist)
                    )

    found = sorted(set(found))
    if max_count is not None:
        found = found[:max_count]
    loops = [GeneralizedLoop(tuple(ctx.edge_ids[p] for p in edges)) for _, edges in found]
    b_used = found[-1][0] if found else 0
    return loops, b_used


def merge_loops(
    l1: GeneralizedLoop,
    l2: GeneralizedLoop,
    bounds: SearchBounds,
    core: CoreSubgraph,
) -> list[GeneralizedLoop]:
    """Union of two loops plus every connected loop reachable by bridging
    the union's components with paths of at most max_path_edges edges,
    all capped at max_loop_edges. Empty when the union alone is too big.
    """
    if bounds.max_loop_edges is None:
        raise ValueError("merge_loops needs an explicit max_loop_edges bound")
    b = bounds.max_loop_edges
    m = bounds.max_path_edges if bounds.max_path_edges is not None else b
    ctx = _context(core)
    union = ctx.mask_of(l1.edges) | ctx.mask_of(l2.edges)
    if union.bit_count() > b:
        return []
    comps = _components_of(ctx, union)
    results = _expand(ctx, union, comps, m, b)
    return sorted((ctx.loop_of(mask) for mask, _ in results), key=lambda l: (l.length, l.edges))


def complex_loops_dfs(
    v: int,
    component: Iterable[int],
    components: Sequence[Iterable[int]],
    max_path_edges: int,
    max_loop_edges: int,
    core: CoreSubgraph,
) -> list[GeneralizedLoop]:
    """Connected loops built by bridging out of one vertex of one component.

    v is a global node id inside `component`; `components` are the edge
    sets of all pieces of the (disconnected) loop being grown. Paths start
    at v, avoid every current loop vertex, and must first touch a vertex
    of a different component; each connection is followed up recursively
    from the merged piece until everything is connected or bounds block.
    """
    ctx = _context(core)
    comp_masks = [ctx.mask_of(c) for c in components]
    mask = 0
    for cm in comp_masks:
        mask |= cm
    want = ctx.mask_of(component)
    idx = next((k for k, cm in enumerate(comp_masks) if cm == want), None)
    if idx is None:
        raise ValueError("component is not one of components")
    vcomps = [ctx.vertices_of(cm) for cm in comp_masks]
    vl = ctx.node_pos.get(v)
    if vl is None or not vcomps[idx] >> vl & 1:
        raise ValueError(f"node {v} is not a vertex of the component")
    results = _expand(
        ctx, mask, vcomps, max_path_edges, max_loop_edges, roots=[(idx, vl)]
    )
    out = [ctx.loop_of(m) for m, cs in results[1:]]
    return sorted(out, key=lambda l: (l.length, l.edges))


def _components_of(ctx: _SearchContext, mask: int) -> list[int]:
    """Vertex masks of the connected components of an edge subset."""
    adj = _subgraph_adj(ctx, mask)
    comps = []
    seen: set[int] = set()
    for root in adj:
        if root in seen:
            continue
        vm = 0
        queue = deque([root])
        seen.add(root)
        while queue:
            x = queue.popleft()
            vm |= 1 << x
            for _, w in adj[x]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        comps.append(vm)
    return comps


def enumerate_loops(
    core: CoreSubgraph,
    bounds: SearchBounds = SearchBounds(),
    backend: str = "auto",
) -> EnumerationResult:
    """Simple-loop seeding plus merge closure (the TLSBP loop collection).

    An iteration merges every seed loop with every loop discovered in the
    previous iteration; anything whose edge-set key is not yet stored
    counts as new. Stops when an iteration discovers nothing.
    """
    name = kernel.resolve_backend(backend)
    if core.is_empty:
        return EnumerationResult((), (), 0, 0, 0, 0, name)
    ctx = _context(core)

    seeds, derived_b = simple_loops(
        core, bounds.max_simple_loops, bounds.max_loop_edges
    )
    b = bounds.max_loop_edges if bounds.max_loop_edges is not None else derived_b
    m = bounds.max_path_edges if bounds.max_path_edges is not None else b
    if not seeds:
        return EnumerationResult((), (), 0, 0, b, m, name)

    seed_masks = [ctx.mask_of(l.edges) for l in seeds]
    masks, iters, productive = kernel.run_closure(ctx, seed_masks, m, b, name)

    by_len = sorted(
        ((ctx.loop_of(mk), it) for mk, it in zip(masks, iters)),
        key=lambda pair: (pair[0].length, pair[0].edges),
    )
    loops = tuple(l for l, _ in by_len)
    disc = tuple(i for _, i in by_len)
    return EnumerationResult(loops, disc, productive, len(seeds), b, m, name)
