"""Loop corrections to the BP partition sum.

Every enumerated loop contributes a multiplicative term built from the BP
beliefs; one plus their sum rescales Z_BP toward the exact partition sum,
and is exactly the ratio Z / Z_BP when the loop collection is complete.
Corrected marginals come from rerunning BP on clamped copies of the model
and reusing the same loop collection on each copy.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bp import BPResult, Schedule, run_bp
from .graph import FactorGraph, clamp_variable, two_core
from .loops import GeneralizedLoop, SearchBounds, enumerate_loops

log = logging.getLogger(__name__)

MAGNETIZATION_CEILING = 1.0 - 1e-12


class DegenerateMagnetizationError(ArithmeticError):
    """A magnetization is non-finite, or at +-1 even after clipping."""


def mu_var(m: float, q: int, variable: int | None = None) -> float:
    """Weight a variable node contributes to a loop term.

    m is the variable's magnetization and q the number of loop factors it
    touches. Computed as ((1+m)^(1-q) + (-1)^q (1-m)^(1-q)) / 2, which is
    the textbook ratio form with numerator and denominator already divided
    through; the grouped form never squares the half-widths 1-m and 1+m, so
    it keeps precision near the +-1 boundary.
    """
    if q < 2:
        raise ValueError(f"variable touches {q} loop factors, need at least 2")
    if not (-1.0 < m < 1.0):
        who = f"variable {variable}" if variable is not None else "a variable"
        raise DegenerateMagnetizationError(
            f"magnetization {m!r} of {who} leaves the open interval (-1, 1)"
        )
    return 0.5 * ((1.0 + m) ** (1 - q) + (-1) ** q * (1.0 - m) ** (1 - q))


def mu_factor(
    belief: np.ndarray,
    scope: Sequence[int],
    loop_vars: Sequence[int],
    mags: Sequence[float],
) -> float:
    """Weight a factor node contributes: E_b[prod (x_i - m_i)] over loop_vars.

    belief is the factor's normalized joint table, scope its variable order,
    loop_vars the scope subset reached by loop edges, mags the matching
    magnetizations.
    """
    k = len(scope)
    order = {v: p for p, v in enumerate(scope)}
    shifts = [k - 1 - order[v] for v in loop_vars]
    total = 0.0
    for idx in range(len(belief)):
        w = float(belief[idx])
        if w == 0.0:
            continue
        for sh, m in zip(shifts, mags):
            x = 1.0 if (idx >> sh) & 1 else -1.0
            w *= x - m
        total += w
    return total


@dataclass(frozen=True)
class LoopTerm:
    """One loop's multiplicative correction; breakdown maps global node ids
    (variables first, factors offset by n_vars) to their weights."""

    loop: GeneralizedLoop
    value: float
    breakdown: tuple[tuple[int, float], ...] | None = None


def _loop_structure(g: FactorGraph, loop: GeneralizedLoop):
    """Per-variable loop degrees and per-factor loop variable subsets."""
    vdeg: Counter[int] = Counter()
    fvars: defaultdict[int, list[int]] = defaultdict(list)
    for e in loop.edges:
        i, a = g.edges[e]
        vdeg[i] += 1
        fvars[a].append(i)
    return vdeg, fvars


def _guard_magnetizations(result: BPResult) -> np.ndarray:
    m = np.asarray(result.magnetizations, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        bad = np.flatnonzero(~np.isfinite(m))
        raise DegenerateMagnetizationError(
            f"non-finite magnetization for variables {bad.tolist()}"
        )
    over = np.flatnonzero(np.abs(m) > MAGNETIZATION_CEILING)
    if over.size:
        for i in over.tolist():
            log.warning(
                "magnetization %.17g of variable %d clipped to +-%r",
                m[i], i, MAGNETIZATION_CEILING,
            )
        m = np.clip(m, -MAGNETIZATION_CEILING, MAGNETIZATION_CEILING)
    return m


def loop_term(loop: GeneralizedLoop, result: BPResult, g: FactorGraph) -> LoopTerm:
    """Evaluate one loop against a belief state, keeping the node breakdown."""
    mags = _guard_magnetizations(result)
    vdeg, fvars = _loop_structure(g, loop)
    breakdown = []
    value = 1.0
    for i in sorted(vdeg):
        w = mu_var(float(mags[i]), vdeg[i], variable=i)
        breakdown.append((i, w))
        value *= w
    for a in sorted(fvars):
        sub = sorted(fvars[a])
        w = mu_factor(
            result.beliefs_fac[a], g.factors[a].scope, sub,
            [float(mags[i]) for i in sub],
        )
        breakdown.append((g.n_vars + a, w))
        value *= w
    return LoopTerm(loop, value, tuple(breakdown))


class LoopSetEvaluator:
    """Evaluates a fixed loop collection against changing belief states.

    The structure is extracted once: each loop becomes a run of part ids,
    where a part is either (variable, loop degree) or (factor, loop variable
    subset). Only the part values depend on the beliefs, so re-evaluating
    after clamping is a part recomputation plus one segmented product.

    When evaluating against a clamped copy, parts that touch the removed
    variable get value zero, which zeroes exactly the terms of loops
    containing that variable.
    """

    def __init__(self, g: FactorGraph, loops: Sequence[GeneralizedLoop]):
        self.graph = g
        self.loops = tuple(loops)
        index: dict[tuple, int] = {}
        self._parts: list[tuple] = []
        flat: list[int] = []
        offsets = [0]
        for loop in self.loops:
            vdeg, fvars = _loop_structure(g, loop)
            for i in sorted(vdeg):
                key = ("v", i, vdeg[i])
                pid = index.get(key)
                if pid is None:
                    pid = index[key] = len(self._parts)
                    self._parts.append(key)
                flat.append(pid)
            for a in sorted(fvars):
                key = ("f", a, tuple(sorted(fvars[a])))
                pid = index.get(key)
                if pid is None:
                    pid = index[key] = len(self._parts)
                    self._parts.append(key)
                flat.append(pid)
            offsets.append(len(flat))
        self._flat = np.asarray(flat, dtype=np.intp)
        self._starts = np.asarray(offsets[:-1], dtype=np.intp)

    def part_values(
        self,
        result: BPResult,
        graph: FactorGraph | None = None,
        var_map: dict[int, int] | None = None,
    ) -> np.ndarray:
        """Weights of all distinct parts under one belief state.

        graph and var_map translate ids when the beliefs belong to a clamped
        copy; variables absent from var_map were clamped away and zero out
        the parts naming them.
        """
        g = graph if graph is not None else self.graph
        mags = _guard_magnetizations(result)
        out = np.empty(len(self._parts), dtype=np.float64)
        for p, part in enumerate(self._parts):
            if part[0] == "v":
                _, i, q = part
                j = var_map.get(i, -1) if var_map is not None else i
                out[p] = 0.0 if j < 0 else mu_var(float(mags[j]), q, variable=i)
            else:
                _, a, sub = part
                if var_map is not None:
                    mapped = [var_map.get(i, -1) for i in sub]
                    if min(mapped) < 0:
                        out[p] = 0.0
                        continue
                else:
                    mapped = list(sub)
                out[p] = mu_factor(
                    result.beliefs_fac[a], g.factors[a].scope, mapped,
                    [float(mags[j]) for j in mapped],
                )
        return out

    def values(
        self,
        result: BPResult,
        graph: FactorGraph | None = None,
        var_map: dict[int, int] | None = None,
    ) -> np.ndarray:
        """Correction term of every loop, aligned with self.loops."""
        if not self.loops:
            return np.zeros(0, dtype=np.float64)
        parts = self.part_values(result, graph, var_map)
        return np.multiply.reduceat(parts[self._flat], self._starts)

    def terms(self, result: BPResult) -> list[LoopTerm]:
        vals = self.values(result)
        return [LoopTerm(l, float(v)) for l, v in zip(self.loops, vals)]


def _neumaier(values) -> tuple[np.ndarray, float]:
    """Compensated prefix sums of 1 + running total; returns (sums, final)."""
    sums = np.empty(len(values), dtype=np.float64)
    total = 1.0
    comp = 0.0
    for pos, x in enumerate(values):
        t = total + x
        if abs(total) >= abs(x):
            comp += (total - t) + x
        else:
            comp += (x - t) + total
        total = t
        sums[pos] = total + comp
    return sums, (total + comp if len(values) else 1.0)


def cumulative_series(terms: Sequence[LoopTerm]):
    """Terms by descending |value| (canonical key breaks ties) with the
    compensated partial sums 1 + sum of the first l values."""
    ordered = sorted(terms, key=lambda t: (-abs(t.value), t.loop.key))
    sums, _ = _neumaier([t.value for t in ordered])
    sums.setflags(write=False)
    return ordered, sums


@dataclass(frozen=True)
class SeriesReport:
    """Corrected partition sum and the per-rank truncation trace."""

    log_z_bp: float
    terms: tuple[LoopTerm, ...]
    partial_sums: np.ndarray
    log_z_tlsbp: float
    negative_partial_flag: bool

    @property
    def corrected(self) -> float:
        """Final correction factor 1 + sum of all included terms."""
        return float(self.partial_sums[-1]) if len(self.partial_sums) else 1.0

    def rows(self) -> list[dict]:
        out = []
        for rank, (t, ps) in enumerate(zip(self.terms, self.partial_sums), 1):
            ps = float(ps)
            out.append({
                "rank": rank,
                "key": t.loop.key,
                "length": t.loop.length,
                "r": t.value,
                "partial_sum": ps,
                "log_z_partial": self.log_z_bp + math.log(ps) if ps > 0 else None,
            })
        return out


def truncated_z(result: BPResult, terms: Sequence[LoopTerm]):
    """Correct log Z_BP by the given terms; returns (log_z_tlsbp, report).

    A nonpositive corrected sum has no logarithm: the report keeps the raw
    factor, log_z_tlsbp is nan, and the flag is set (it also flags any
    nonpositive intermediate partial sum).
    """
    ordered, sums = cumulative_series(terms)
    corrected = float(sums[-1]) if len(sums) else 1.0
    negative = bool(len(sums) and np.min(sums) <= 0.0)
    if corrected > 0.0:
        log_z = result.log_z_bp + math.log(corrected)
    else:
        log_z = math.nan
        log.warning("corrected partition sum is nonpositive: 1 + sum r = %r",
                    corrected)
    report = SeriesReport(result.log_z_bp, tuple(ordered), sums, log_z, negative)
    return log_z, report


@dataclass(frozen=True)
class ClampedMarginals:
    """Corrected per-variable beliefs from clamping.

    fallback marks variables whose corrected ratio was unusable (a clamped
    run failed to converge, or a corrected sum came out nonpositive); those
    rows carry the plain BP marginal instead. log_z_clamped holds
    log Z_TLSBP of each clamped model, nan where undefined; column 0 is
    state -1.
    """

    beliefs: np.ndarray
    fallback: np.ndarray
    log_z_clamped: np.ndarray
    base: BPResult


def marginals_by_clamping(
    g: FactorGraph,
    loops: Sequence[GeneralizedLoop] | SearchBounds,
    schedule: Schedule | None = None,
    tol: float = 1e-17,
    max_iter: int = 10_000,
) -> ClampedMarginals:
    """Marginals from ratios of loop-corrected clamped partition sums.

    Each variable is fixed to each value by table slicing, BP reruns on the
    reduced graph, and the original loop collection is re-evaluated there
    (terms naming the clamped variable vanish). Accepts either a prepared
    loop sequence or bounds to enumerate with.
    """
    if isinstance(loops, SearchBounds):
        loops = enumerate_loops(two_core(g), loops).loops
    ev = LoopSetEvaluator(g, loops)
    base = run_bp(g, schedule, tol=tol, max_iter=max_iter)

    n = g.n_vars
    beliefs = np.empty((n, 2), dtype=np.float64)
    fallback = np.zeros(n, dtype=bool)
    log_zc = np.full((n, 2), math.nan)
    for i in range(n):
        side_log = [math.nan, math.nan]
        side_corr = [math.nan, math.nan]
        usable = True
        for col, s in enumerate((-1, 1)):
            try:
                gc, vmap = clamp_variable(g, i, s)
            except ValueError as exc:
                if "identically zero" not in str(exc):
                    raise
                # the slice forbids this value outright, so its Z is 0
                side_log[col] = -math.inf
                side_corr[col] = 1.0
                log_zc[i, col] = -math.inf
                continue
            rc = run_bp(gc, schedule, tol=tol, max_iter=max_iter)
            if not rc.converged:
                log.warning("BP did not converge with variable %d at %+d", i, s)
                usable = False
                break
            vals = ev.values(rc, graph=gc, var_map=vmap)
            terms = [LoopTerm(l, float(v)) for l, v in zip(ev.loops, vals)]
            _, rep = truncated_z(rc, terms)
            side_log[col] = rc.log_z_bp
            side_corr[col] = rep.corrected
            if rep.corrected > 0.0:
                log_zc[i, col] = rep.log_z_tlsbp
        if usable and (scale := max(side_log)) > -math.inf:
            w0 = math.exp(side_log[0] - scale) * side_corr[0]
            w1 = math.exp(side_log[1] - scale) * side_corr[1]
            denom = w0 + w1
            if w0 >= 0.0 and w1 >= 0.0 and denom > 0.0 and math.isfinite(denom):
                beliefs[i, 0] = w0 / denom
                beliefs[i, 1] = 1.0 - w0 / denom
                continue
            log.warning(
                "corrected clamp weights for variable %d are unusable "
                "(%r, %r)", i, w0, w1,
            )
        fallback[i] = True
        beliefs[i] = base.beliefs_var[i]

    beliefs.setflags(write=False)
    fallback.setflags(write=False)
    log_zc.setflags(write=False)
    return ClampedMarginals(beliefs, fallback, log_zc, base)
