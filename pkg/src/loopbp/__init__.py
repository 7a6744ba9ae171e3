"""Belief propagation with truncated loop-series corrections.

The package splits into model construction (graph, models), inference
(bp), loop enumeration over the 2-core (loops, kernel), the series
correction and clamped marginals (series), brute-force references
(oracle), and reporting plus the command line front end (report, cli).
"""

from .bp import (
    BetheEnergy,
    BPResult,
    MessageNumericsError,
    Schedule,
    bethe_free_energy,
    compute_beliefs,
    run_bp,
)
from .graph import (
    CoreSubgraph,
    FactorGraph,
    FactorTable,
    GraphFormatError,
    build,
    clamp_variable,
    two_core,
)
from .loops import (
    EnumerationResult,
    GeneralizedLoop,
    LoopClass,
    SearchBounds,
    census_counts,
    classify,
    enumerate_loops,
    length_histogram,
)
from .models import (
    CouplingSpec,
    ising_grid,
    noisy_or_decompose,
    noisy_or_table,
    random_regular,
)
from .oracle import OracleCeilingError, exact_log_z, exact_marginals
from .series import (
    ClampedMarginals,
    DegenerateMagnetizationError,
    LoopSetEvaluator,
    LoopTerm,
    SeriesReport,
    loop_term,
    marginals_by_clamping,
    mu_factor,
    mu_var,
    truncated_z,
)

__version__ = "0.1.0"

__all__ = [
    "BPResult",
    "BetheEnergy",
    "ClampedMarginals",
    "CoreSubgraph",
    "CouplingSpec",
    "DegenerateMagnetizationError",
    "EnumerationResult",
    "FactorGraph",
    "FactorTable",
    "GeneralizedLoop",
    "GraphFormatError",
    "LoopClass",
    "LoopSetEvaluator",
    "LoopTerm",
    "MessageNumericsError",
    "OracleCeilingError",
    "Schedule",
    "SearchBounds",
    "SeriesReport",
    "bethe_free_energy",
    "build",
    "census_counts",
    "clamp_variable",
    "classify",
    "compute_beliefs",
    "enumerate_loops",
    "exact_log_z",
    "exact_marginals",
    "ising_grid",
    "length_histogram",
    "loop_term",
    "marginals_by_clamping",
    "mu_factor",
    "mu_var",
    "noisy_or_decompose",
    "noisy_or_table",
    "random_regular",
    "run_bp",
    "truncated_z",
    "two_core",
]
