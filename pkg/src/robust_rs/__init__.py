"""Sequential simulation budget allocation for selecting the alternative with
the best worst-case mean."""

from .asymptotics import (
    AllocationRatios,
    NonConvergenceError,
    empirical_ratios,
    g_function,
    optimality_residuals,
    solve_optimal_ratios,
)
from .baselines import FallbackCounter, PolicyKind, SampleVarianceTracker, ea_allocate, ptv_allocate, rocba_allocate
from .config import ExperimentConfig, load_config, parse_config, preset
from .harness import (
    PcsCurve,
    PcsRow,
    emit_csv,
    estimate_posterior_pcs,
    estimate_posterior_pcs_bound,
    run_experiment,
    run_replication,
)
from .problem import (
    UNINFORMATIVE,
    AssumptionViolation,
    DegenerateStateError,
    PairIndex,
    PosteriorState,
    ProblemSpec,
    Ranking,
    compute_ranking,
    sample_observation,
    true_best,
    update_posterior,
)
from .vfa import LookaheadValue, current_vfa, lookahead_value, radius_squared, raoda_allocate

__all__ = [
    "AllocationRatios", "NonConvergenceError", "empirical_ratios", "g_function", "optimality_residuals",
    "solve_optimal_ratios", "FallbackCounter", "PolicyKind", "SampleVarianceTracker", "ea_allocate",
    "ptv_allocate", "rocba_allocate", "ExperimentConfig", "load_config", "parse_config", "preset",
    "PcsCurve", "PcsRow", "emit_csv", "estimate_posterior_pcs", "estimate_posterior_pcs_bound",
    "run_experiment", "run_replication", "UNINFORMATIVE", "AssumptionViolation", "DegenerateStateError",
    "PairIndex", "PosteriorState", "ProblemSpec", "Ranking", "compute_ranking", "sample_observation",
    "true_best", "update_posterior", "LookaheadValue", "current_vfa", "lookahead_value", "radius_squared",
    "raoda_allocate",
]
