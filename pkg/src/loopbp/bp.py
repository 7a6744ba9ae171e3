"""Loopy belief propagation with four update schedules.

Messages live in linear space and are renormalized after every update; log
space is reserved for the free-energy accumulation at the end. All four
schedules share one convergence rule. A sweep touches every directed message
once (for the residual schedule a sweep is the same number of queue pops),
and the run stops as soon as the largest message change within a sweep falls
below the tolerance.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass

import numpy as np

from .graph import FactorGraph

log = logging.getLogger(__name__)

SCHEDULE_KINDS = ("fixed_sequential", "random_sequential", "parallel", "residual")

_SHUFFLE_STREAM = 2**64 - 2


class MessageNumericsError(ArithmeticError):
    """A message update produced a non-finite or all-zero message."""


@dataclass(frozen=True)
class Schedule:
    """Update order for message passing; seed only affects random_sequential."""

    kind: str = "fixed_sequential"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(
                f"unknown schedule kind {self.kind!r}, expected one of "
                f"{SCHEDULE_KINDS}"
            )


@dataclass(frozen=True)
class BetheEnergy:
    """Free-energy breakdown of a belief assignment.

    infinite_energy is set when some factor belief puts mass on a zero table
    entry; energy and free_energy are +inf and log_z is -inf in that case.
    """

    energy: float
    entropy: float
    free_energy: float
    log_z: float
    infinite_energy: bool


@dataclass(frozen=True)
class BPResult:
    converged: bool
    iterations: int
    final_max_update: float
    beliefs_var: np.ndarray
    beliefs_fac: tuple[np.ndarray, ...]
    magnetizations: np.ndarray
    bethe_F: float
    log_z_bp: float


class _State:
    """Mutable message state plus the flattened graph views the updates need.

    Messages are stored as (p_minus, p_plus) tuples indexed by edge id, one
    list per direction. Tables are flattened to plain float lists: the inner
    update loops run millions of times and small-array numpy overhead
    dominates otherwise.
    """

    __slots__ = (
        "g", "n_edges", "ev", "ea", "var_edge_list", "fac_terms",
        "eshift", "fvals", "v2f", "f2v",
    )

    def __init__(self, g: FactorGraph):
        self.g = g
        self.n_edges = g.n_edges
        self.ev = [i for i, _ in g.edges]
        self.ea = [a for _, a in g.edges]
        self.var_edge_list = [list(es) for es in g.var_edges]
        self.fvals = [t.values.tolist() for t in g.factors]
        # bit position of each edge's variable inside its factor's state
        # index (scope[0] is the most significant bit)
        self.fac_terms: list[list[tuple[int, int]]] = []
        self.eshift = [0] * g.n_edges
        for a, t in enumerate(g.factors):
            k = len(t.scope)
            terms = []
            for e in g.fac_edges[a]:
                shift = k - 1 - t.scope.index(self.ev[e])
                self.eshift[e] = shift
                terms.append((e, shift))
            self.fac_terms.append(terms)
        self.v2f = [(0.5, 0.5)] * g.n_edges
        self.f2v = [(0.5, 0.5)] * g.n_edges

    def _norm(self, p0: float, p1: float, e: int, to_factor: bool):
        s = p0 + p1
        if not (math.isfinite(s) and s > 0.0):
            i, a = self.ev[e], self.ea[e]
            arrow = (
                f"variable {i} to factor {a}" if to_factor
                else f"factor {a} to variable {i}"
            )
            raise MessageNumericsError(
                f"message from {arrow} (edge {e}) is not normalizable: "
                f"({p0!r}, {p1!r})"
            )
        # storing the exact complement leaves one rounding degree of freedom
        # per message, which lets the iteration reach a bitwise fixed point;
        # dividing both entries wobbles at the last ulp and stalls just
        # above very tight tolerances
        q = p0 / s
        return (q, 1.0 - q)

    def fresh_v2f(self, e: int):
        p0 = 1.0
        p1 = 1.0
        for e2 in self.var_edge_list[self.ev[e]]:
            if e2 == e:
                continue
            m = self.f2v[e2]
            p0 *= m[0]
            p1 *= m[1]
        return self._norm(p0, p1, e, True)

    def fresh_f2v(self, e: int):
        a = self.ea[e]
        vals = self.fvals[a]
        terms = self.fac_terms[a]
        sh_t = self.eshift[e]
        out0 = 0.0
        out1 = 0.0
        for idx in range(len(vals)):
            w = vals[idx]
            if w == 0.0:
                continue
            for e2, sh in terms:
                if e2 != e:
                    w *= self.v2f[e2][(idx >> sh) & 1]
            if (idx >> sh_t) & 1:
                out1 += w
            else:
                out0 += w
        return self._norm(out0, out1, e, False)

    def fresh(self, d: int, e: int):
        return self.fresh_v2f(e) if d == 0 else self.fresh_f2v(e)

    def stored(self, d: int, e: int):
        return self.v2f[e] if d == 0 else self.f2v[e]

    def put(self, d: int, e: int, m):
        if d == 0:
            self.v2f[e] = m
        else:
            self.f2v[e] = m


def _apply_in_order(st: _State, order) -> float:
    worst = 0.0
    for d, e in order:
        old = st.stored(d, e)
        new = st.fresh(d, e)
        c = abs(new[0] - old[0])
        if c > worst:
            worst = c
        c = abs(new[1] - old[1])
        if c > worst:
            worst = c
        st.put(d, e, new)
    return worst


def _sweep_parallel(st: _State) -> float:
    # both directions advance from the pre-sweep state
    new_v2f = [st.fresh_v2f(e) for e in range(st.n_edges)]
    new_f2v = [st.fresh_f2v(e) for e in range(st.n_edges)]
    worst = 0.0
    for old, new in ((st.v2f, new_v2f), (st.f2v, new_f2v)):
        for o, n in zip(old, new):
            c = abs(n[0] - o[0])
            if c > worst:
                worst = c
            c = abs(n[1] - o[1])
            if c > worst:
                worst = c
    st.v2f = new_v2f
    st.f2v = new_f2v
    return worst


def _run_sweeps(st: _State, schedule: Schedule, tol: float, max_iter: int):
    kind = schedule.kind
    order = [(d, e) for e in range(st.n_edges) for d in (0, 1)]
    rng = None
    if kind == "random_sequential":
        key = np.array(
            [schedule.seed & (2**64 - 1), _SHUFFLE_STREAM], dtype=np.uint64
        )
        rng = np.random.Generator(np.random.Philox(key=key))
    worst = 0.0
    for sweep in range(1, max_iter + 1):
        if kind == "parallel":
            worst = _sweep_parallel(st)
        elif kind == "random_sequential":
            perm = rng.permutation(len(order))
            worst = _apply_in_order(st, [order[j] for j in perm])
        else:
            worst = _apply_in_order(st, order)
        if worst < tol:
            return True, sweep, worst
    return False, max_iter, worst


def _run_residual(st: _State, tol: float, max_iter: int):
    """Max-residual updating with exact dependent-only recomputation.

    The residual of a directed message is the L-infinity distance between
    its stored value and what an update would write now. The freshly
    computed value is cached, so a pop applies exactly its residual and
    only the neighbours' residuals need recomputing afterwards. Stale heap
    entries are skipped via per-message version counters; a message whose
    residual drops to zero is simply never re-pushed.
    """
    n = st.n_edges
    total = 2 * n
    version = [[0] * n, [0] * n]
    pending = [[None] * n, [None] * n]
    heap: list[tuple[float, int, int, int]] = []

    def refresh(d: int, e: int):
        new = st.fresh(d, e)
        old = st.stored(d, e)
        r = max(abs(new[0] - old[0]), abs(new[1] - old[1]))
        pending[d][e] = new
        version[d][e] += 1
        if r > 0.0:
            heapq.heappush(heap, (-r, e, d, version[d][e]))

    for e in range(n):
        refresh(0, e)
        refresh(1, e)

    pops = 0
    limit = max_iter * total
    while True:
        while heap and heap[0][3] != version[heap[0][2]][heap[0][1]]:
            heapq.heappop(heap)
        top = -heap[0][0] if heap else 0.0
        if top < tol:
            converged = True
            break
        if pops >= limit:
            converged = False
            break
        _, e, d, _ = heapq.heappop(heap)
        st.put(d, e, pending[d][e])
        version[d][e] += 1
        pops += 1
        if d == 0:
            for e2, _ in st.fac_terms[st.ea[e]]:
                if e2 != e:
                    refresh(1, e2)
        else:
            for e2 in st.var_edge_list[st.ev[e]]:
                if e2 != e:
                    refresh(0, e2)
    # top is the largest change any remaining single update could make
    return converged, -(-pops // total), top


def compute_beliefs(g: FactorGraph, v2f, f2v):
    """Normalized variable and factor beliefs from a message state."""
    bv = np.empty((g.n_vars, 2), dtype=np.float64)
    for i in range(g.n_vars):
        p0 = 1.0
        p1 = 1.0
        for e in g.var_edges[i]:
            m = f2v[e]
            p0 *= m[0]
            p1 *= m[1]
        s = p0 + p1
        if not (math.isfinite(s) and s > 0.0):
            raise MessageNumericsError(
                f"belief of variable {i} is not normalizable: ({p0!r}, {p1!r})"
            )
        q = p0 / s
        bv[i, 0] = q
        bv[i, 1] = 1.0 - q
    bf = []
    for a, t in enumerate(g.factors):
        k = len(t.scope)
        arr = t.values.copy()
        for idx in range(arr.size):
            w = 1.0
            for e in g.fac_edges[a]:
                shift = k - 1 - t.scope.index(g.edges[e][0])
                w *= v2f[e][(idx >> shift) & 1]
            arr[idx] *= w
        s = float(arr.sum())
        if not (math.isfinite(s) and s > 0.0):
            raise MessageNumericsError(
                f"belief of factor {a} is not normalizable (sum {s!r})"
            )
        arr /= s
        arr.setflags(write=False)
        bf.append(arr)
    bv.setflags(write=False)
    return bv, tuple(bf)


def bethe_free_energy(g: FactorGraph, beliefs_var, beliefs_fac) -> BetheEnergy:
    """Average energy, approximate entropy, their difference, and log Z.

    Zero beliefs contribute nothing (0 log 0 is taken as 0). A positive
    belief on a zero table entry means the assignment has infinite energy;
    that is flagged rather than raised, with log_z reported as -inf.
    """
    infinite = False
    u_terms = []
    h_terms = []
    for a, t in enumerate(g.factors):
        b = np.asarray(beliefs_fac[a], dtype=np.float64)
        f = t.values
        pos = b > 0.0
        if np.any(pos & (f == 0.0)):
            infinite = True
        ok = pos & (f > 0.0)
        u_terms.extend((-b[ok] * np.log(f[ok])).tolist())
        h_terms.extend((-b[pos] * np.log(b[pos])).tolist())
    bv = np.asarray(beliefs_var, dtype=np.float64)
    for i in range(g.n_vars):
        d = len(g.var_edges[i])
        row = bv[i]
        pos = row > 0.0
        h_terms.append((d - 1) * float(np.sum(row[pos] * np.log(row[pos]))))
    entropy = math.fsum(h_terms)
    if infinite:
        log.warning("belief mass on a zero table entry, log Z is -inf")
        return BetheEnergy(math.inf, entropy, math.inf, -math.inf, True)
    energy = math.fsum(u_terms)
    free = energy - entropy
    return BetheEnergy(energy, entropy, free, -free, False)


def run_bp(
    g: FactorGraph,
    schedule: Schedule | None = None,
    tol: float = 1e-17,
    max_iter: int = 10_000,
) -> BPResult:
    """Iterate message updates under a schedule until the largest change in
    a sweep drops below tol, or max_iter sweeps elapse.

    Messages start uniform. Non-convergence is reported through the
    converged flag, not raised; a non-finite message raises
    MessageNumericsError naming the edge. For the residual schedule
    final_max_update is the largest remaining residual, which bounds any
    further single-message change.
    """
    if schedule is None:
        schedule = Schedule()
    if not (tol > 0.0):
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    st = _State(g)
    if st.n_edges == 0:
        converged, iterations, worst = True, 0, 0.0
    elif schedule.kind == "residual":
        converged, iterations, worst = _run_residual(st, tol, max_iter)
    else:
        converged, iterations, worst = _run_sweeps(st, schedule, tol, max_iter)
    bv, bf = compute_beliefs(g, st.v2f, st.f2v)
    bethe = bethe_free_energy(g, bv, bf)
    mags = bv[:, 1] - bv[:, 0]
    mags.setflags(write=False)
    return BPResult(
        converged=converged,
        iterations=iterations,
        final_max_update=worst,
        beliefs_var=bv,
        beliefs_fac=bf,
        magnetizations=mags,
        bethe_F=bethe.free_energy,
        log_z_bp=bethe.log_z,
    )
