"""Bipartite factor graphs over binary (+1/-1) variables.

Conventions used across the package:

* variable states are -1 and +1; table index 0 means -1, index 1 means +1,
  and the last variable in a scope varies fastest,
* graph nodes are numbered 0..n-1 for variables and n..n+m-1 for factors,
* an edge is a (variable, factor) incidence; edge ids are dense and ordered
  factor-major (all edges of factor 0 first, by variable id, then factor 1...).
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class GraphFormatError(ValueError):
    """Malformed .fg text, reported with a 1-based line number."""


@dataclass(frozen=True, eq=False)
class FactorTable:
    """Non-negative potential over an ordered scope of binary variables.

    values has exactly 2**len(scope) entries. Entry order follows the state
    index convention above: scope[0] is the most significant bit. An empty
    scope is legal and denotes a constant multiplier (it only appears in
    graphs produced by clamping).
    """

    scope: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        scope = tuple(int(v) for v in self.scope)
        values = np.asarray(self.values, dtype=np.float64).copy()
        values.setflags(write=False)
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "values", values)
        if len(set(scope)) != len(scope):
            raise ValueError(f"duplicate variable in scope {scope}")
        if any(v < 0 for v in scope):
            raise ValueError(f"negative variable id in scope {scope}")
        if values.ndim != 1 or values.size != 2 ** len(scope):
            raise ValueError(
                f"table over {len(scope)} variables needs {2 ** len(scope)} "
                f"values, got {values.size}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite table entry")
        if np.any(values < 0):
            raise ValueError("negative table entry")
        if not np.any(values > 0):
            raise ValueError("table is identically zero")

    def state_index(self, states: Sequence[int]) -> int:
        """Index of a joint state given as -1/+1 values aligned with scope."""
        idx = 0
        for s in states:
            idx = (idx << 1) | (1 if s > 0 else 0)
        return idx


@dataclass(frozen=True, eq=False)
class FactorGraph:
    n_vars: int
    factors: tuple[FactorTable, ...]
    edges: tuple[tuple[int, int], ...] = field(init=False)
    var_edges: tuple[tuple[int, ...], ...] = field(init=False)
    fac_edges: tuple[tuple[int, ...], ...] = field(init=False)

    def __post_init__(self):
        edges = []
        for a, table in enumerate(self.factors):
            for i in sorted(table.scope):
                edges.append((i, a))
        var_edges = [[] for _ in range(self.n_vars)]
        fac_edges = [[] for _ in range(len(self.factors))]
        for e, (i, a) in enumerate(edges):
            var_edges[i].append(e)
            fac_edges[a].append(e)
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "var_edges", tuple(map(tuple, var_edges)))
        object.__setattr__(self, "fac_edges", tuple(map(tuple, fac_edges)))

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def var_factors(self, i: int) -> tuple[int, ...]:
        return tuple(self.edges[e][1] for e in self.var_edges[i])


def build(n_vars: int, tables: Iterable[FactorTable]) -> FactorGraph:
    """Validate tables against the variable count and assemble a graph."""
    tables = tuple(tables)
    if n_vars < 0:
        raise ValueError("negative variable count")
    for a, t in enumerate(tables):
        for v in t.scope:
            if v >= n_vars:
                raise ValueError(
                    f"factor {a} references variable {v}, but n_vars={n_vars}"
                )
    return FactorGraph(n_vars, tables)


@dataclass(frozen=True, eq=False)
class CoreSubgraph:
    """The 2-core of a factor graph, kept as a node/edge marker.

    Original variable, factor and edge ids are preserved so downstream
    reports refer to the same indices as the full graph. The core is empty
    exactly when the graph has no cycle.
    """

    graph: FactorGraph
    variables: tuple[int, ...]
    factors: tuple[int, ...]
    edge_ids: tuple[int, ...]

    @property
    def is_empty(self) -> bool:
        return not self.edge_ids

    @property
    def n_edges(self) -> int:
        return len(self.edge_ids)

    def nodes(self) -> tuple[int, ...]:
        """Core nodes in global numbering (variables, then factors)."""
        n = self.graph.n_vars
        return self.variables + tuple(n + a for a in self.factors)

    def edge_endpoints(self, e: int) -> tuple[int, int]:
        """(variable node, factor node) of a global edge id, global numbering."""
        i, a = self.graph.edges[e]
        return i, self.graph.n_vars + a


def two_core(g: FactorGraph) -> CoreSubgraph:
    """Iteratively strip degree<=1 nodes (variables and factors alike)."""
    alive_edge = [True] * g.n_edges
    var_deg = [len(es) for es in g.var_edges]
    fac_deg = [len(es) for es in g.fac_edges]
    var_alive = [d > 0 for d in var_deg]
    fac_alive = [True] * g.n_factors

    queue = [("v", i) for i in range(g.n_vars) if 0 < var_deg[i] <= 1]
    queue += [("f", a) for a in range(g.n_factors) if fac_deg[a] <= 1]
    while queue:
        kind, x = queue.pop()
        if kind == "v":
            if not var_alive[x]:
                continue
            var_alive[x] = False
            for e in g.var_edges[x]:
                if alive_edge[e]:
                    alive_edge[e] = False
                    a = g.edges[e][1]
                    fac_deg[a] -= 1
                    if fac_alive[a] and fac_deg[a] <= 1:
                        queue.append(("f", a))
        else:
            if not fac_alive[x]:
                continue
            fac_alive[x] = False
            for e in g.fac_edges[x]:
                if alive_edge[e]:
                    alive_edge[e] = False
                    i = g.edges[e][0]
                    var_deg[i] -= 1
                    if var_alive[i] and var_deg[i] <= 1:
                        queue.append(("v", i))

    edge_ids = tuple(e for e in range(g.n_edges) if alive_edge[e])
    variables = tuple(sorted({g.edges[e][0] for e in edge_ids}))
    factors = tuple(sorted({g.edges[e][1] for e in edge_ids}))
    return CoreSubgraph(g, variables, factors, edge_ids)


def clamp_variable(g: FactorGraph, var: int, state: int) -> tuple[FactorGraph, dict[int, int]]:
    """Fix one variable to -1 or +1 and slice it out of every incident table.

    Returns the reduced graph (factor count and order unchanged, remaining
    variables renumbered contiguously) and the old->new variable id map.
    A unary factor on the clamped variable degenerates to an empty-scope
    constant so its weight still multiplies into the partition sum.
    """
    if state not in (-1, 1):
        raise ValueError("clamp state must be -1 or +1")
    if not 0 <= var < g.n_vars:
        raise ValueError(f"no variable {var}")
    bit = 1 if state > 0 else 0
    var_map = {}
    for v in range(g.n_vars):
        if v != var:
            var_map[v] = len(var_map)

    tables = []
    for t in g.factors:
        if var not in t.scope:
            tables.append(FactorTable(tuple(var_map[v] for v in t.scope), t.values))
            continue
        k = len(t.scope)
        pos = t.scope.index(var)
        new_scope = tuple(var_map[v] for v in t.scope if v != var)
        kept = []
        for r in range(2 ** (k - 1)):
            hi = r >> (k - 1 - pos)
            lo = r & ((1 << (k - 1 - pos)) - 1)
            full = (hi << (k - pos)) | (bit << (k - 1 - pos)) | lo
            kept.append(t.values[full])
        tables.append(FactorTable(new_scope, np.array(kept)))
    return build(g.n_vars - 1, tables), var_map


def _format_value(v: float) -> str:
    return format(float(v), ".17g")


def save(g: FactorGraph, path, comments: Sequence[str] = ()) -> None:
    """Write the text .fg format; comments go in as leading '#' lines."""
    own = isinstance(path, (str, bytes, os.PathLike))
    f = open(path, "w", encoding="utf-8") if own else path
    try:
        for c in comments:
            f.write(f"# {c}\n")
        f.write(f"{g.n_vars} {g.n_factors}\n")
        for t in g.factors:
            f.write(f"{len(t.scope)}\n")
            if t.scope:
                f.write(" ".join(str(v) for v in t.scope) + "\n")
            f.write(" ".join(_format_value(v) for v in t.values) + "\n")
    finally:
        if own:
            f.close()


def _data_lines(f) -> Iterable[tuple[int, list[str]]]:
    for ln, raw in enumerate(f, start=1):
        text = raw.split("#", 1)[0].strip()
        if text:
            yield ln, text.split()


def load(path) -> FactorGraph:
    """Parse the text .fg format written by save()."""
    own = isinstance(path, (str, bytes, os.PathLike))
    f = open(path, "r", encoding="utf-8") if own else path
    try:
        lines = _data_lines(f)

        def next_line(what):
            try:
                return next(lines)
            except StopIteration:
                raise GraphFormatError(f"unexpected end of file, expected {what}") from None

        def ints(tokens, ln, what):
            try:
                return [int(tok) for tok in tokens]
            except ValueError:
                raise GraphFormatError(f"line {ln}: bad {what}: {tokens}") from None

        ln, head = next_line("header 'n m'")
        if len(head) != 2:
            raise GraphFormatError(f"line {ln}: header must be 'n_vars n_factors'")
        n_vars, n_factors = ints(head, ln, "header")
        tables = []
        for a in range(n_factors):
            ln, ktok = next_line(f"scope size of factor {a}")
            if len(ktok) != 1:
                raise GraphFormatError(f"line {ln}: expected a lone scope size")
            (k,) = ints(ktok, ln, "scope size")
            if k < 0:
                raise GraphFormatError(f"line {ln}: negative scope size")
            scope: list[int] = []
            if k > 0:
                ln, vtok = next_line(f"scope of factor {a}")
                if len(vtok) != k:
                    raise GraphFormatError(
                        f"line {ln}: factor {a} declares {k} variables, got {len(vtok)}"
                    )
                scope = ints(vtok, ln, "variable ids")
            ln, wtok = next_line(f"values of factor {a}")
            if len(wtok) != 2**k:
                raise GraphFormatError(
                    f"line {ln}: factor {a} needs {2 ** k} values, got {len(wtok)}"
                )
            try:
                values = np.array([float(w) for w in wtok])
            except ValueError:
                raise GraphFormatError(f"line {ln}: bad value in factor {a}") from None
            try:
                tables.append(FactorTable(tuple(scope), values))
            except ValueError as exc:
                raise GraphFormatError(f"line {ln}: {exc}") from None
        try:
            ln, extra = next(lines)
        except StopIteration:
            pass
        else:
            raise GraphFormatError(f"line {ln}: trailing content after last factor")
        try:
            return build(n_vars, tables)
        except ValueError as exc:
            raise GraphFormatError(str(exc)) from None
    finally:
        if own:
            f.close()


def load_comments(path) -> tuple[str, ...]:
    """Leading '#' comment lines of a .fg file, stripped of the marker."""
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for raw in f:
            s = raw.strip()
            if not s:
                continue
            if not s.startswith("#"):
                break
            out.append(s[1:].strip())
    return tuple(out)


def loads(text: str) -> FactorGraph:
    return load(io.StringIO(text))


def dumps(g: FactorGraph, comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    save(g, buf, comments)
    return buf.getvalue()
