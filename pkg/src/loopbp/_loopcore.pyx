# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled union-closure kernel.

Mirrors _purecore.run_closure: identical mask sets, per-mask discovery
iterations and productive-iteration count, for any adjacency. Edge and
vertex sets are fixed-width arrays of 64-bit words; the store and the
union memo are open-addressing tables over flat arenas.
"""

from libcpp.vector cimport vector
from libc.stdint cimport uint64_t, int64_t, int32_t

import numpy as np

cdef extern from *:
    """
    static inline int popcll(unsigned long long x) {
        return __builtin_popcountll(x);
    }
    """
    int popcll(unsigned long long x) nogil


cdef inline uint64_t hash_words(const uint64_t* w, int nw) nogil:
    cdef uint64_t h = <uint64_t>14695981039346656037u
    cdef int i
    for i in range(nw):
        h ^= w[i]
        h *= <uint64_t>1099511628211u
    h ^= h >> 33
    h *= <uint64_t>0xff51afd7ed558ccdu
    h ^= h >> 33
    return h


cdef inline int words_eq(const uint64_t* a, const uint64_t* b, int nw) nogil:
    cdef int i
    for i in range(nw):
        if a[i] != b[i]:
            return 0
    return 1


cdef inline int words_popcount(const uint64_t* a, int nw) nogil:
    cdef int i, t = 0
    for i in range(nw):
        t += popcll(a[i])
    return t


cdef inline int words_intersect(const uint64_t* a, const uint64_t* b, int nw) nogil:
    cdef int i
    for i in range(nw):
        if a[i] & b[i]:
            return 1
    return 0


# Open-addressing table of mask ids keyed by the masks stored in an arena.
cdef struct Table:
    vector[int64_t] slots
    int64_t capmask
    int64_t count


cdef void table_init(Table* t, int64_t cap) :
    cdef int64_t c = 16
    while c < cap:
        c <<= 1
    t.slots.assign(c, -1)
    t.capmask = c - 1
    t.count = 0


cdef void table_grow(Table* t, vector[uint64_t]* arena, int nw):
    cdef vector[int64_t] old = t.slots
    cdef int64_t newcap = (t.capmask + 1) << 1
    t.slots.assign(newcap, -1)
    t.capmask = newcap - 1
    cdef int64_t i, sid, pos
    cdef const uint64_t* base = arena.data()
    for i in range(old.size()):
        sid = old[i]
        if sid < 0:
            continue
        pos = hash_words(base + sid * nw, nw) & t.capmask
        while t.slots[pos] >= 0:
            pos = (pos + 1) & t.capmask
        t.slots[pos] = sid


cdef int64_t table_find_or_add(Table* t, vector[uint64_t]* arena, int nw,
                               const uint64_t* key, bint* added):
    """Id of key in arena, appending it when absent."""
    cdef int64_t pos = hash_words(key, nw) & t.capmask
    cdef int64_t sid
    cdef int i
    while True:
        sid = t.slots[pos]
        if sid < 0:
            break
        if words_eq(arena.data() + sid * nw, key, nw):
            added[0] = 0
            return sid
        pos = (pos + 1) & t.capmask
    sid = <int64_t>(arena.size() // nw)
    for i in range(nw):
        arena.push_back(key[i])
    t.slots[pos] = sid
    t.count += 1
    added[0] = 1
    if t.count * 10 >= (t.capmask + 1) * 7:
        table_grow(t, arena, nw)
    return sid


cdef struct State:
    int n_nodes
    int n_edges
    int nw      # words per edge mask
    int nvw     # words per vertex mask
    int m_bound
    int b_bound
    # adjacency (CSR over nodes) and edge endpoints
    const int32_t* indptr
    const int32_t* adj_e
    const int32_t* adj_w
    const int32_t* edge_u
    const int32_t* edge_w
    # discovered loops
    Table store
    vector[uint64_t] masks        # id * nw
    vector[int32_t] iter_of
    vector[int64_t] comp_off      # into comp_data, id -> offset
    vector[int32_t] comp_cnt      # id -> number of components
    vector[uint64_t] comp_data    # vertex masks, nvw each
    vector[int64_t] order
    vector[int64_t] new_ids
    int32_t iteration
    # union memo
    Table expanded
    vector[uint64_t] exp_arena


cdef void vertices_of(State* st, const uint64_t* mask, uint64_t* out) nogil:
    cdef int w, b, e
    for w in range(st.nvw):
        out[w] = 0
    for w in range(st.nw):
        if mask[w] == 0:
            continue
        for b in range(64):
            if mask[w] >> b & 1:
                e = w * 64 + b
                out[st.edge_u[e] >> 6] |= <uint64_t>1 << (st.edge_u[e] & 63)
                out[st.edge_w[e] >> 6] |= <uint64_t>1 << (st.edge_w[e] & 63)


cdef bint has_bridge(State* st, const uint64_t* mask,
                     vector[int32_t]& disc, vector[int32_t]& low,
                     vector[int32_t]& stk_node, vector[int32_t]& stk_pedge,
                     vector[int32_t]& stk_pos) nogil:
    """Lowlink scan of the subgraph selected by mask."""
    cdef int n = st.n_nodes
    cdef int i, root, node, pedge, pos, e, w, parent, depth
    cdef int32_t timer = 0
    for i in range(n):
        disc[i] = -1
    for root in range(n):
        if disc[root] >= 0:
            continue
        # skip vertices outside the subgraph
        pos = st.indptr[root]
        e = -1
        while pos < st.indptr[root + 1]:
            if mask[st.adj_e[pos] >> 6] >> (st.adj_e[pos] & 63) & 1:
                e = 0
                break
            pos += 1
        if e < 0:
            continue
        disc[root] = timer
        low[root] = timer
        timer += 1
        stk_node[0] = root
        stk_pedge[0] = -1
        stk_pos[0] = st.indptr[root]
        depth = 1
        while depth > 0:
            node = stk_node[depth - 1]
            pedge = stk_pedge[depth - 1]
            pos = stk_pos[depth - 1]
            while pos < st.indptr[node + 1]:
                e = st.adj_e[pos]
                w = st.adj_w[pos]
                pos += 1
                if not mask[e >> 6] >> (e & 63) & 1 or e == pedge:
                    continue
                if disc[w] >= 0:
                    if disc[w] < low[node]:
                        low[node] = disc[w]
                else:
                    disc[w] = timer
                    low[w] = timer
                    timer += 1
                    stk_pos[depth - 1] = pos
                    stk_node[depth] = w
                    stk_pedge[depth] = e
                    stk_pos[depth] = st.indptr[w]
                    depth += 1
                    break
            else:
                stk_pos[depth - 1] = pos
                depth -= 1
                if depth > 0:
                    parent = stk_node[depth - 1]
                    if low[node] < low[parent]:
                        low[parent] = low[node]
                    if low[node] > disc[parent]:
                        return 1
                continue
    return 0


cdef void merge_comp_lists(int nvw,
                           const uint64_t* ca, int na,
                           const uint64_t* cb, int nb,
                           vector[uint64_t]& out, int* n_out):
    """Union two component lists, joining any that share a vertex."""
    cdef vector[uint64_t] acc
    cdef int i, j, k, n, hit
    out.clear()
    for i in range(na * nvw):
        out.push_back(ca[i])
    n = na
    acc.resize(nvw)
    for j in range(nb):
        for k in range(nvw):
            acc[k] = cb[j * nvw + k]
        i = 0
        while i < n:
            hit = words_intersect(out.data() + i * nvw, acc.data(), nvw)
            if hit:
                for k in range(nvw):
                    acc[k] |= out[i * nvw + k]
                # remove slot i by swapping in the last component
                n -= 1
                for k in range(nvw):
                    out[i * nvw + k] = out[n * nvw + k]
                out.resize(n * nvw)
            else:
                i += 1
        for k in range(nvw):
            out.push_back(acc[k])
        n += 1
    n_out[0] = n


cdef void take(State* st, const uint64_t* mask, const uint64_t* comps, int ncomps):
    cdef bint added = 0
    cdef int64_t sid = table_find_or_add(&st.store, &st.masks, st.nw, mask, &added)
    cdef int i
    if not added:
        return
    st.iter_of.push_back(st.iteration)
    st.comp_off.push_back(<int64_t>st.comp_data.size())
    st.comp_cnt.push_back(ncomps)
    for i in range(ncomps * st.nvw):
        st.comp_data.push_back(comps[i])
    st.order.push_back(sid)
    st.new_ids.push_back(sid)


cdef void expand_union(State* st, const uint64_t* union_mask,
                       const uint64_t* comps0, int ncomps0):
    """The union itself plus every connected loop reachable by bridging."""
    take(st, union_mask, comps0, ncomps0)
    if ncomps0 <= 1:
        return

    cdef int nw = st.nw, nvw = st.nvw
    cdef Table seen
    cdef vector[uint64_t] seen_arena
    table_init(&seen, 64)
    cdef bint added = 0
    table_find_or_add(&seen, &seen_arena, nw, union_mask, &added)

    # explicit recursion stack of (mask, comps) states
    cdef vector[uint64_t] pend_mask
    cdef vector[uint64_t] pend_comps
    cdef vector[int64_t] pend_coff
    cdef vector[int32_t] pend_cnt
    cdef int i, k
    for i in range(nw):
        pend_mask.push_back(union_mask[i])
    pend_coff.push_back(0)
    pend_cnt.push_back(ncomps0)
    for i in range(ncomps0 * nvw):
        pend_comps.push_back(comps0[i])

    cdef vector[uint64_t] mask_buf, allv, visited, path_edges, new_mask, merged
    cdef vector[uint64_t] cs, new_cs
    mask_buf.resize(nw); new_mask.resize(nw); path_edges.resize(nw)
    allv.resize(nvw); visited.resize(nvw); merged.resize(nvw)
    cdef vector[int32_t] node_stack, edge_stack, pos_stack
    node_stack.resize(st.n_edges + 2)
    edge_stack.resize(st.n_edges + 2)
    pos_stack.resize(st.n_edges + 2)

    cdef int ncs, budget, ci, cj, v0, depth, node, pos, e, w, nlen, newn
    cdef int64_t coff
    while pend_cnt.size() > 0:
        # pop the last state
        ncs = pend_cnt.back(); pend_cnt.pop_back()
        coff = pend_coff.back(); pend_coff.pop_back()
        for i in range(nw):
            mask_buf[i] = pend_mask[pend_mask.size() - nw + i]
        pend_mask.resize(pend_mask.size() - nw)
        cs.assign(pend_comps.begin() + coff, pend_comps.begin() + coff + ncs * nvw)
        pend_comps.resize(coff)

        budget = st.m_bound
        k = st.b_bound - words_popcount(mask_buf.data(), nw)
        if k < budget:
            budget = k
        if budget < 1:
            continue
        for k in range(nvw):
            allv[k] = 0
        for i in range(ncs):
            for k in range(nvw):
                allv[k] |= cs[i * nvw + k]

        for ci in range(ncs):
            for v0 in range(st.n_nodes):
                if not cs[ci * nvw + (v0 >> 6)] >> (v0 & 63) & 1:
                    continue
                # depth-first over simple paths out of v0
                for k in range(nvw):
                    visited[k] = 0
                visited[v0 >> 6] = <uint64_t>1 << (v0 & 63)
                for k in range(nw):
                    path_edges[k] = 0
                node_stack[0] = v0
                pos_stack[0] = st.indptr[v0]
                depth = 1
                nlen = 0   # edges on the current path
                while depth > 0:
                    node = node_stack[depth - 1]
                    pos = pos_stack[depth - 1]
                    while pos < st.indptr[node + 1]:
                        e = st.adj_e[pos]
                        w = st.adj_w[pos]
                        pos += 1
                        if visited[w >> 6] >> (w & 63) & 1:
                            continue
                        if allv[w >> 6] >> (w & 63) & 1:
                            if cs[ci * nvw + (w >> 6)] >> (w & 63) & 1:
                                continue
                            # contact with a different component
                            for k in range(nw):
                                new_mask[k] = mask_buf[k] | path_edges[k]
                            new_mask[e >> 6] |= <uint64_t>1 << (e & 63)
                            added = 0
                            table_find_or_add(&seen, &seen_arena, nw,
                                              new_mask.data(), &added)
                            if not added:
                                continue
                            cj = 0
                            while not cs[cj * nvw + (w >> 6)] >> (w & 63) & 1:
                                cj += 1
                            for k in range(nvw):
                                merged[k] = (cs[ci * nvw + k] | visited[k]
                                             | cs[cj * nvw + k])
                            new_cs.clear()
                            for i in range(ncs):
                                if i != ci and i != cj:
                                    for k in range(nvw):
                                        new_cs.push_back(cs[i * nvw + k])
                            for k in range(nvw):
                                new_cs.push_back(merged[k])
                            newn = ncs - 1
                            if newn == 1:
                                take(st, new_mask.data(), new_cs.data(), 1)
                            else:
                                for k in range(nw):
                                    pend_mask.push_back(new_mask[k])
                                pend_coff.push_back(<int64_t>pend_comps.size())
                                pend_cnt.push_back(newn)
                                for k in range(newn * nvw):
                                    pend_comps.push_back(new_cs[k])
                        elif nlen + 2 <= budget:
                            pos_stack[depth - 1] = pos
                            node_stack[depth] = w
                            edge_stack[depth] = e
                            pos_stack[depth] = st.indptr[w]
                            visited[w >> 6] |= <uint64_t>1 << (w & 63)
                            path_edges[e >> 6] |= <uint64_t>1 << (e & 63)
                            nlen += 1
                            depth += 1
                            break
                    else:
                        depth -= 1
                        if depth > 0:
                            w = node_stack[depth]
                            e = edge_stack[depth]
                            visited[w >> 6] ^= <uint64_t>1 << (w & 63)
                            path_edges[e >> 6] ^= <uint64_t>1 << (e & 63)
                            nlen -= 1
                        continue


def run_closure(int n_nodes, int n_edges,
                int32_t[::1] indptr, int32_t[::1] adj_e, int32_t[::1] adj_w,
                int32_t[::1] edge_u, int32_t[::1] edge_w,
                list seeds, int m_bound, int b_bound):
    """Close the seed masks under pairwise merges.

    Iterations pair every seed with the previous iteration's discoveries,
    plus newly found bridge-carrying loops against all bridge-carrying
    loops so far (vertex-disjoint pairs only); see the pure kernel.
    Returns (masks in discovery order, per-mask discovery iteration,
    number of productive iterations).
    """
    cdef State st
    st.n_nodes = n_nodes
    st.n_edges = n_edges
    st.nw = (n_edges + 63) >> 6
    st.nvw = (n_nodes + 63) >> 6
    st.m_bound = m_bound
    st.b_bound = b_bound
    st.indptr = &indptr[0]
    st.adj_e = &adj_e[0] if adj_e.shape[0] else NULL
    st.adj_w = &adj_w[0] if adj_w.shape[0] else NULL
    st.edge_u = &edge_u[0]
    st.edge_w = &edge_w[0]
    st.iteration = 0
    table_init(&st.store, 1024)
    table_init(&st.expanded, 4096)

    cdef int nw = st.nw, nvw = st.nvw
    cdef vector[uint64_t] key, vbuf, ubuf, mcomps
    key.resize(nw)
    vbuf.resize(nvw)
    ubuf.resize(nw)
    cdef bint added = 0
    cdef int i, k, n_seeds
    cdef object s
    cdef int64_t sid

    for s in seeds:
        for k in range(nw):
            key[k] = <uint64_t>((s >> (64 * k)) & 0xFFFFFFFFFFFFFFFF)
        sid = table_find_or_add(&st.store, &st.masks, nw, key.data(), &added)
        if added:
            st.iter_of.push_back(0)
            vertices_of(&st, key.data(), vbuf.data())
            st.comp_off.push_back(<int64_t>st.comp_data.size())
            st.comp_cnt.push_back(1)
            for k in range(nvw):
                st.comp_data.push_back(vbuf[k])
            st.order.push_back(sid)
    n_seeds = <int>st.order.size()

    cdef vector[int64_t] old_ids
    for i in range(n_seeds):
        old_ids.push_back(st.order[i])

    # scratch for the bridge scan
    cdef vector[int32_t] disc, low, stk_node, stk_pedge, stk_pos
    disc.resize(n_nodes); low.resize(n_nodes)
    stk_node.resize(n_nodes + 1); stk_pedge.resize(n_nodes + 1)
    stk_pos.resize(n_nodes + 1)

    # bridged loops found so far: (id, vertex mask) with all vertices flattened
    cdef vector[int64_t] bridged_all_ids
    cdef vector[uint64_t] bridged_all_v
    cdef vector[int64_t] bridged_old_ids
    cdef vector[uint64_t] bridged_old_v

    cdef int productive = 0
    cdef int64_t i1, i2, id1, id2
    cdef int nc1, n_un
    cdef vector[uint64_t] c1buf, uvbuf
    cdef int pc

    while old_ids.size() > 0:
        st.iteration += 1
        st.new_ids.clear()
        for i1 in range(n_seeds):
            id1 = st.order[i1]
            for i2 in range(<int64_t>old_ids.size()):
                id2 = old_ids[i2]
                for k in range(nw):
                    ubuf[k] = st.masks[id1 * nw + k] | st.masks[id2 * nw + k]
                if words_popcount(ubuf.data(), nw) > b_bound:
                    continue
                added = 0
                table_find_or_add(&st.expanded, &st.exp_arena, nw, ubuf.data(), &added)
                if not added:
                    continue
                nc1 = st.comp_cnt[id1]
                c1buf.assign(
                    st.comp_data.begin() + st.comp_off[id1],
                    st.comp_data.begin() + st.comp_off[id1] + nc1 * nvw)
                merge_comp_lists(nvw, c1buf.data(), nc1,
                                 st.comp_data.data() + st.comp_off[id2],
                                 st.comp_cnt[id2], mcomps, &n_un)
                expand_union(&st, ubuf.data(), mcomps.data(), n_un)
        # vertex-disjoint pairs of bridge-carrying loops
        for i1 in range(<int64_t>bridged_old_ids.size()):
            id1 = bridged_old_ids[i1]
            for i2 in range(<int64_t>bridged_all_ids.size()):
                id2 = bridged_all_ids[i2]
                if words_intersect(bridged_old_v.data() + i1 * nvw,
                                   bridged_all_v.data() + i2 * nvw, nvw):
                    continue
                for k in range(nw):
                    ubuf[k] = st.masks[id1 * nw + k] | st.masks[id2 * nw + k]
                if words_popcount(ubuf.data(), nw) > b_bound:
                    continue
                added = 0
                table_find_or_add(&st.expanded, &st.exp_arena, nw, ubuf.data(), &added)
                if not added:
                    continue
                nc1 = st.comp_cnt[id1]
                c1buf.assign(
                    st.comp_data.begin() + st.comp_off[id1],
                    st.comp_data.begin() + st.comp_off[id1] + nc1 * nvw)
                merge_comp_lists(nvw, c1buf.data(), nc1,
                                 st.comp_data.data() + st.comp_off[id2],
                                 st.comp_cnt[id2], mcomps, &n_un)
                expand_union(&st, ubuf.data(), mcomps.data(), n_un)

        bridged_old_ids.clear()
        bridged_old_v.clear()
        for i1 in range(<int64_t>st.new_ids.size()):
            id1 = st.new_ids[i1]
            if has_bridge(&st, st.masks.data() + id1 * nw,
                          disc, low, stk_node, stk_pedge, stk_pos):
                for k in range(nvw):
                    vbuf[k] = 0
                for pc in range(st.comp_cnt[id1]):
                    for k in range(nvw):
                        vbuf[k] |= st.comp_data[st.comp_off[id1] + pc * nvw + k]
                bridged_old_ids.push_back(id1)
                for k in range(nvw):
                    bridged_old_v.push_back(vbuf[k])
        for i1 in range(<int64_t>bridged_old_ids.size()):
            bridged_all_ids.push_back(bridged_old_ids[i1])
        for k in range(<int>bridged_old_v.size()):
            bridged_all_v.push_back(bridged_old_v[k])

        old_ids.assign(st.new_ids.begin(), st.new_ids.end())
        if st.new_ids.size() > 0:
            productive += 1

    # rebuild Python ints from the word arenas, in discovery order
    out_masks = []
    out_iters = []
    cdef int64_t oid
    cdef object acc
    for i1 in range(<int64_t>st.order.size()):
        oid = st.order[i1]
        acc = 0
        for k in range(nw):
            acc |= int(st.masks[oid * nw + k]) << (64 * k)
        out_masks.append(acc)
        out_iters.append(int(st.iter_of[oid]))
    return out_masks, out_iters, productive
