"""Pure-Python union-closure kernel over integer edge masks.

Mirrors the compiled kernel in _loopcore.pyx; both must produce identical
mask sets, discovery iterations and iteration counts. Contexts are the
_SearchContext objects built in loops.py (adjacency in local indices).
"""

from __future__ import annotations

from typing import Sequence


def _mask_bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def merge_comp_lists(ca: Sequence[int], cb: Sequence[int]) -> list[int]:
    """Union two lists of vertex masks, joining any that share a vertex."""
    out = list(ca)
    for c in cb:
        acc = c
        keep = []
        for o in out:
            if o & acc:
                acc |= o
            else:
                keep.append(o)
        keep.append(acc)
        out = keep
    return out


def expand_union(
    ctx,
    union: int,
    comps: Sequence[int],
    m_bound: int,
    b_bound: int,
    roots: Sequence[tuple[int, int]] | None = None,
) -> list[tuple[int, list[int]]]:
    """The union itself plus every connected loop reachable by bridging.

    comps are vertex masks of the union's pieces. A bridging path starts
    at a vertex of one piece, runs through nodes outside the current loop,
    and ends on the first touched loop vertex, which must belong to a
    different piece; the path budget is per connection. roots restricts
    the first connection's start points; recursion always fans out from
    every vertex of the merged piece.
    """
    results = [(union, list(comps))]
    if len(comps) <= 1:
        return results
    seen = {union}
    stack: list[tuple[int, list[int], Sequence[tuple[int, int]] | None]] = [
        (union, list(comps), roots)
    ]
    adj = ctx.adj
    while stack:
        mask, cs, starts = stack.pop()
        budget = min(m_bound, b_bound - mask.bit_count())
        if budget < 1:
            continue
        all_v = 0
        for c in cs:
            all_v |= c
        if starts is None:
            starts = [(ci, v) for ci in range(len(cs)) for v in _mask_bits(cs[ci])]
        for ci, v0 in starts:
            home = cs[ci]
            frames = [iter(adj[v0])]
            node_stack = [v0]
            edge_stack: list[int] = []
            visited = 1 << v0
            path_edges = 0
            while frames:
                frame = frames[-1]
                descended = False
                for e, w in frame:
                    wb = 1 << w
                    if wb & visited:
                        continue
                    if wb & all_v:
                        if wb & home:
                            continue
                        new_mask = mask | path_edges | (1 << e)
                        if new_mask in seen:
                            continue
                        seen.add(new_mask)
                        cj = next(k for k in range(len(cs)) if cs[k] >> w & 1)
                        merged = home | visited | cs[cj]
                        new_cs = [cs[k] for k in range(len(cs)) if k not in (ci, cj)]
                        new_cs.append(merged)
                        if len(new_cs) == 1:
                            results.append((new_mask, new_cs))
                        else:
                            stack.append((new_mask, new_cs, None))
                    elif len(edge_stack) + 2 <= budget:
                        frames.append(iter(adj[w]))
                        node_stack.append(w)
                        edge_stack.append(e)
                        visited |= wb
                        path_edges |= 1 << e
                        descended = True
                        break
                if not descended:
                    frames.pop()
                    w = node_stack.pop()
                    if edge_stack:
                        e = edge_stack.pop()
                        visited ^= 1 << w
                        path_edges ^= 1 << e
    return results


def has_bridge(ctx, mask: int) -> bool:
    """True when some edge of the subgraph lies on none of its cycles."""
    adj = ctx.adj
    disc: dict[int, int] = {}
    low: dict[int, int] = {}
    timer = 0
    for root in _mask_bits(ctx.vertices_of(mask)):
        if root in disc:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            node, pedge, nbrs = stack[-1]
            descended = False
            for e, w in nbrs:
                if not mask >> e & 1 or e == pedge:
                    continue
                if w in disc:
                    low[node] = min(low[node], disc[w])
                else:
                    disc[w] = low[w] = timer
                    timer += 1
                    stack.append((w, e, iter(adj[w])))
                    descended = True
                    break
            if not descended:
                stack.pop()
                if stack:
                    parent = stack[-1][0]
                    low[parent] = min(low[parent], low[node])
                    if low[node] > disc[parent]:
                        return True
    return False


def run_closure(
    ctx, seeds: Sequence[int], m_bound: int, b_bound: int
) -> tuple[list[int], list[int], int]:
    """Close the seed set under pairwise merges.

    Each iteration merges every seed with the previous iteration's
    discoveries, and additionally merges newly found bridge-carrying loops
    with every bridge-carrying loop known so far. The second stage is what
    reaches disjoint unions whose every component carries a bridge: such a
    union is never (seed | loop) because no cycle can cover a bridge, and
    bridging paths only ever produce connected results.

    Returns (masks in discovery order, discovery iteration per mask with 0
    for seeds, number of iterations that discovered anything). A union is
    expanded at most once no matter how many loop pairs produce it; the
    discovered set is unaffected because repeats can only re-derive stored
    loops.
    """
    store: dict[int, int] = {}
    comps: dict[int, list[int]] = {}
    order: list[int] = []
    for s in seeds:
        if s not in store:
            store[s] = 0
            comps[s] = [ctx.vertices_of(s)]
            order.append(s)
    sloops = list(order)
    old = list(order)
    expanded: set[int] = set()
    bridged_all: list[tuple[int, int]] = []
    bridged_old: list[tuple[int, int]] = []
    productive = 0
    iteration = 0
    while old:
        iteration += 1
        new: list[int] = []

        def take(mask: int, cs: list[int]) -> None:
            if mask not in store:
                store[mask] = iteration
                comps[mask] = cs
                order.append(mask)
                new.append(mask)

        for m1 in sloops:
            c1 = comps[m1]
            for m2 in old:
                union = m1 | m2
                if union.bit_count() > b_bound:
                    continue
                if union in expanded:
                    continue
                expanded.add(union)
                ucomps = merge_comp_lists(c1, comps[m2])
                for mask, cs in expand_union(ctx, union, ucomps, m_bound, b_bound):
                    take(mask, cs)
        # vertex-disjoint pairs suffice: the target unions split into
        # components, and each prefix of the component chain carries a bridge
        for q1, v1 in bridged_old:
            c1 = comps[q1]
            for q2, v2 in bridged_all:
                if v1 & v2:
                    continue
                union = q1 | q2
                if union.bit_count() > b_bound:
                    continue
                if union in expanded:
                    continue
                expanded.add(union)
                ucomps = merge_comp_lists(c1, comps[q2])
                for mask, cs in expand_union(ctx, union, ucomps, m_bound, b_bound):
                    take(mask, cs)
        bridged_new = []
        for mk in new:
            if has_bridge(ctx, mk):
                all_v = 0
                for c in comps[mk]:
                    all_v |= c
                bridged_new.append((mk, all_v))
        bridged_all.extend(bridged_new)
        bridged_old = bridged_new
        old = new
        if new:
            productive += 1
    return order, [store[m] for m in order], productive
