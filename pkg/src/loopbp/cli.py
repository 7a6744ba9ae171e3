"""Command-line experiment runner.

Subcommands: gen (model files), run (BP plus loop-corrected Z and
marginals), exact (brute-force reference), loops (census), sweep (seed
ensembles aggregated per grid size and coupling strength). Reports are
deterministic for fixed flags and seeds; wall-clock timings only appear
behind --timings since they never reproduce byte for byte.

Exit codes: 0 success, 2 usage, 3 non-convergence under --strict, 4 brute
force ceiling exceeded.
"""

from __future__ import annotations

import argparse
import math
import sys
import time

import numpy as np

from . import report as rpt
from .bp import Schedule, run_bp
from .graph import dumps, load, load_comments, save, two_core
from .loops import (
    SearchBounds,
    census_counts,
    classify,
    enumerate_loops,
    length_histogram,
)
from .models import CouplingSpec, ising_grid, random_regular
from .oracle import OracleCeilingError, exact_log_z, exact_marginals
from .series import LoopSetEvaluator, marginals_by_clamping, truncated_z

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_CEILING = 4


class _UsageError(Exception):
    pass

_SCHEDULES = {
    "fixed": "fixed_sequential",
    "random": "random_sequential",
    "parallel": "parallel",
    "residual": "residual",
}
_FAMILIES = {"spinglass": "spin_glass", "ferromagnetic": "ferromagnetic"}


def _writeout(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)


def _emit(reportdict: dict, fmt: str, path: str | None):
    _writeout(rpt.to_json(reportdict) if fmt == "json" else rpt.to_csv(reportdict), path)


def _model_section(path: str, g) -> dict:
    return {
        "path": path,
        "comments": list(load_comments(path)),
        "n_vars": g.n_vars,
        "n_factors": g.n_factors,
    }


def _spec_from_args(args, seed: int) -> CouplingSpec:
    return CouplingSpec(
        family=_FAMILIES[args.family],
        coupling_std=args.sigma,
        field_mean=args.field_mean,
        field_std=args.field_std,
        seed=seed,
    )


def _add_model_params(p, with_seed=True):
    p.add_argument("--family", choices=sorted(_FAMILIES), default="spinglass")
    p.add_argument("--sigma", type=float, default=0.5,
                   help="coupling scale (std of the Gaussian draw)")
    p.add_argument("--field-mean", type=float, default=0.0)
    p.add_argument("--field-std", type=float, default=0.05)
    if with_seed:
        p.add_argument("--seed", type=int, default=0)


def _add_bounds(p):
    p.add_argument("--s", type=int, default=100,
                   help="number of shortest simple loops to seed with")
    p.add_argument("--m", type=int, default=None,
                   help="bridging path budget in edges (default: loop size bound)")
    p.add_argument("--b-override", type=int, default=None,
                   help="loop size bound in edges (default: length of the S-th simple loop)")


def _add_bp_flags(p):
    p.add_argument("--schedule", choices=sorted(_SCHEDULES), default="fixed")
    p.add_argument("--tol", type=float, default=1e-17)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0,
                   help="shuffle seed for the random schedule")


def _add_output(p, formats=("json", "csv")):
    p.add_argument("--out", choices=formats, default=formats[0])
    p.add_argument("--output", metavar="PATH", default=None,
                   help="write the report here instead of stdout")


def _bounds_from_args(args) -> SearchBounds:
    try:
        return SearchBounds(
            max_simple_loops=args.s,
            max_path_edges=args.m,
            max_loop_edges=args.b_override,
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from None


def _cmd_gen(args) -> int:
    seedspec = _spec_from_args(args, args.seed)
    if args.model_kind == "ising":
        g = ising_grid(args.size, seedspec)
        meta = (f"generated: kind=ising size={args.size} family={seedspec.family} "
                f"sigma={args.sigma!r} field_mean={args.field_mean!r} "
                f"field_std={args.field_std!r} seed={args.seed}")
    else:
        g = random_regular(args.n, args.degree, seedspec)
        meta = (f"generated: kind=regular n={args.n} degree={args.degree} "
                f"family={seedspec.family} sigma={args.sigma!r} "
                f"field_mean={args.field_mean!r} field_std={args.field_std!r} "
                f"seed={args.seed}")
    if args.out_file is None:
        sys.stdout.write(dumps(g, comments=[meta]))
    else:
        save(g, args.out_file, comments=[meta])
    return EXIT_OK


def _cmd_run(args) -> int:
    if args.bp_only and args.marginals:
        raise _UsageError("--marginals needs the loop series, drop --bp-only")
    g = load(args.model)
    schedule = Schedule(_SCHEDULES[args.schedule], seed=args.seed)
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    result = run_bp(g, schedule, tol=args.tol, max_iter=args.max_iter)
    timings["bp"] = time.perf_counter() - t0

    out = {
        "model": _model_section(args.model, g),
        "bp": {
            "schedule": schedule.kind,
            "tol": args.tol,
            "max_iter": args.max_iter,
            "converged": result.converged,
            "iterations": result.iterations,
            "final_max_update": result.final_max_update,
            "log_z_bp": result.log_z_bp,
        },
    }

    log_z_t = None
    clamped = None
    if not args.bp_only:
        t0 = time.perf_counter()
        core = two_core(g)
        timings["two_core"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        enum = enumerate_loops(core, _bounds_from_args(args))
        timings["enumeration"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        terms = LoopSetEvaluator(g, enum.loops).terms(result)
        log_z_t, series_rep = truncated_z(result, terms)
        timings["evaluation"] = time.perf_counter() - t0
        out["tlsbp"] = {
            "bounds": {"s": args.s, "m": enum.m_used, "b": enum.b_used},
            "n_loops": enum.n_loops,
            "n_simple": enum.n_simple,
            "merge_iterations": enum.merge_iterations,
            "backend": enum.backend,
            "log_z_tlsbp": log_z_t,
            "negative_partial_flag": series_rep.negative_partial_flag,
        }
        if args.series:
            rows = series_rep.rows()
            if args.series > 0:
                rows = rows[: args.series]
            out["tlsbp"]["series"] = rows
        if args.marginals:
            t0 = time.perf_counter()
            clamped = marginals_by_clamping(
                g, enum.loops, schedule, tol=args.tol, max_iter=args.max_iter
            )
            timings["marginals"] = time.perf_counter() - t0
            out["marginals"] = {
                "tlsbp": clamped.beliefs,
                "fallback": clamped.fallback,
                "log_z_clamped": clamped.log_z_clamped,
                "bp": result.beliefs_var,
            }

    if args.with_exact:
        try:
            t0 = time.perf_counter()
            log_z = exact_log_z(g)
            exact_m = exact_marginals(g) if args.marginals else None
            timings["exact"] = time.perf_counter() - t0
        except OracleCeilingError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CEILING
        out["exact"] = {"log_z": log_z}
        errors = {"bp": rpt.z_error_section(result.log_z_bp, log_z)}
        if not args.bp_only:
            errors["tlsbp"] = rpt.z_error_section(log_z_t, log_z)
        if exact_m is not None:
            out["exact"]["marginals"] = exact_m
            errors["bp"]["error_marginals"] = rpt.error_marginals(
                result.beliefs_var, exact_m
            )
            if clamped is not None:
                errors["tlsbp"]["error_marginals"] = rpt.error_marginals(
                    clamped.beliefs, exact_m
                )
        out["errors"] = errors

    if args.timings:
        out["timings"] = timings
    _emit(out, args.out, args.output)
    if args.strict and not result.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _cmd_exact(args) -> int:
    g = load(args.model)
    try:
        log_z = exact_log_z(g)
        marg = exact_marginals(g) if args.marginals else None
    except OracleCeilingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CEILING
    out = {"model": _model_section(args.model, g), "exact": {"log_z": log_z}}
    if marg is not None:
        out["exact"]["marginals"] = marg
    _emit(out, args.out, args.output)
    return EXIT_OK


def _cmd_loops(args) -> int:
    g = load(args.model)
    core = two_core(g)
    if args.exhaustive:
        bounds = SearchBounds.exhaustive(core)
    else:
        bounds = _bounds_from_args(args)
    enum = enumerate_loops(core, bounds)
    classes = [classify(core, l) for l in enum.loops]
    census = census_counts(classes)
    hist = length_histogram(enum.loops)
    rows = [
        {
            "key": l.key,
            "length": l.length,
            "simple": int(c.is_simple),
            "disconnected": int(c.is_disconnected),
            "complex": int(c.is_complex),
        }
        for l, c in zip(enum.loops, classes)
    ]
    if args.out == "json":
        _emit({
            "model": _model_section(args.model, g),
            "bounds": {"s": args.s if not args.exhaustive else None,
                       "m": enum.m_used, "b": enum.b_used},
            "merge_iterations": enum.merge_iterations,
            "census": census,
            "histogram": {str(k): v for k, v in hist.items()},
            "loops": rows,
        }, "json", args.output)
    elif args.out == "csv":
        _writeout(rpt.table_csv(
            rows, ["key", "length", "simple", "disconnected", "complex"]
        ), args.output)
    else:
        lines = [f"{r['key']} {r['length']} {r['simple']} "
                 f"{r['disconnected']} {r['complex']}" for r in rows]
        lines.append("")
        lines += [f"length {k} count {v}" for k, v in hist.items()]
        lines.append("")
        lines += [f"{name} {census[name]}" for name in sorted(census)]
        _writeout("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def _parse_sizes(text: str) -> list[int]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if ".." in tok:
            a, b = tok.split("..", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(tok))
    return out


def _quantiles(vals: list[float]) -> dict:
    if not vals:
        return {"q25": None, "median": None, "q75": None}
    q = np.quantile(np.asarray(vals), [0.25, 0.5, 0.75])
    return {"q25": float(q[0]), "median": float(q[1]), "q75": float(q[2])}


def _cmd_sweep(args) -> int:
    sizes = _parse_sizes(args.sizes)
    sigmas = [float(s) for s in args.sigmas.split(",")]
    schedule = Schedule(_SCHEDULES[args.schedule])
    rows = []
    for size in sizes:
        for sigma in sigmas:
            bp_errors, tlsbp_errors = [], []
            n_conv = 0
            n_invalid = 0
            for seed in range(args.seeds):
                spec = CouplingSpec(
                    family=_FAMILIES[args.family],
                    coupling_std=sigma,
                    field_mean=args.field_mean,
                    field_std=args.field_std,
                    seed=seed,
                )
                g = ising_grid(size, spec)
                result = run_bp(g, schedule, tol=args.tol,
                                max_iter=args.max_iter)
                if not result.converged:
                    continue
                n_conv += 1
                core = two_core(g)
                enum = enumerate_loops(core, _bounds_from_args(args))
                terms = LoopSetEvaluator(g, enum.loops).terms(result)
                log_z_t, _ = truncated_z(result, terms)
                try:
                    log_z = exact_log_z(g)
                except OracleCeilingError as exc:
                    print(f"error: {exc}", file=sys.stderr)
                    return EXIT_CEILING
                bp_errors.append(rpt.error_z(result.log_z_bp, log_z))
                if math.isfinite(log_z_t):
                    tlsbp_errors.append(rpt.error_z(log_z_t, log_z))
                else:
                    n_invalid += 1
            row = {"size": size, "sigma": sigma, "seeds": args.seeds,
                   "converged": n_conv, "invalid_tlsbp": n_invalid}
            for name, vals in (("bp", bp_errors), ("tlsbp", tlsbp_errors)):
                for qname, qval in _quantiles(vals).items():
                    row[f"{name}_error_{qname}"] = qval
            rows.append(row)
    columns = ["size", "sigma", "seeds", "converged", "invalid_tlsbp",
               "bp_error_q25", "bp_error_median", "bp_error_q75",
               "tlsbp_error_q25", "tlsbp_error_median", "tlsbp_error_q75"]
    if args.out == "json":
        _emit({"rows": rows}, "json", args.output)
    else:
        _writeout(rpt.table_csv(rows, columns), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="loopbp",
        description="Belief propagation with loop-series corrections.",
    )
    sub = top.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="write a model file")
    gen_sub = p_gen.add_subparsers(dest="model_kind", required=True)
    p_ising = gen_sub.add_parser("ising", help="size x size Ising grid")
    p_ising.add_argument("--size", type=int, required=True)
    _add_model_params(p_ising)
    p_ising.add_argument("--out", dest="out_file", metavar="PATH", default=None,
                         help="model file path (default: stdout)")
    p_reg = gen_sub.add_parser("regular", help="random regular pairwise model")
    p_reg.add_argument("--n", type=int, required=True)
    p_reg.add_argument("--degree", type=int, default=3)
    _add_model_params(p_reg)
    p_reg.add_argument("--out", dest="out_file", metavar="PATH", default=None,
                       help="model file path (default: stdout)")

    p_run = sub.add_parser("run", help="BP and loop-corrected estimates")
    p_run.add_argument("model")
    _add_bounds(p_run)
    _add_bp_flags(p_run)
    p_run.add_argument("--marginals", action="store_true",
                       help="corrected marginals by clamping")
    p_run.add_argument("--bp-only", action="store_true")
    p_run.add_argument("--with-exact", action="store_true",
                       help="brute-force reference and error metrics")
    p_run.add_argument("--series", type=int, default=0, metavar="N",
                       help="include the top N ranked terms (-1 for all)")
    p_run.add_argument("--strict", action="store_true",
                       help="exit 3 if BP does not converge")
    p_run.add_argument("--timings", action="store_true",
                       help="include wall-clock stage timings")
    _add_output(p_run)

    p_exact = sub.add_parser("exact", help="brute-force log Z and marginals")
    p_exact.add_argument("model")
    p_exact.add_argument("--marginals", action="store_true")
    _add_output(p_exact)

    p_loops = sub.add_parser("loops", help="loop census of the 2-core")
    p_loops.add_argument("model")
    _add_bounds(p_loops)
    p_loops.add_argument("--exhaustive", action="store_true",
                         help="all loops (small cores only)")
    _add_output(p_loops, formats=("text", "json", "csv"))

    p_sweep = sub.add_parser("sweep", help="seed ensembles, one row per (size, sigma)")
    p_sweep.add_argument("--sizes", required=True,
                         help="grid sizes, e.g. 4..5 or 3,4,5")
    p_sweep.add_argument("--sigmas", required=True,
                         help="comma-separated coupling scales")
    p_sweep.add_argument("--seeds", type=int, default=20)
    _add_model_params(p_sweep, with_seed=False)
    _add_bounds(p_sweep)
    p_sweep.add_argument("--schedule", choices=sorted(_SCHEDULES),
                         default="fixed")
    p_sweep.add_argument("--tol", type=float, default=1e-17)
    p_sweep.add_argument("--max-iter", type=int, default=10_000)
    _add_output(p_sweep)
    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "gen": _cmd_gen,
        "run": _cmd_run,
        "exact": _cmd_exact,
        "loops": _cmd_loops,
        "sweep": _cmd_sweep,
    }
    try:
        return handlers[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
