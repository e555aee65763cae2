"""Profit-maximizing price optimization under two practical constraints:
at most k prices may change from the baseline, and any change must move by
at least a per-product threshold.
"""

from .errors import (
    CapacityError,
    ContractError,
    NumericError,
    ParseError,
    PriceOptError,
    StructuralError,
    ValidationError,
)
from .generator import GenConfig, generate, generate_profitable, benchmark_suite
from .instance import (
    Instance,
    SpectralBounds,
    ValidationReport,
    gradient_q,
    objective_q,
    profit_z,
    spectral_bounds,
    unconstrained_minimizer,
    validate,
    with_k,
)
from .lpformat import eval_lp_objective, export_mip_lp, parse_lp, validate_lp_file
from .oracle import brute_projection, count_partitions, global_optimum, solve_restricted
from .projection import (
    ProjectionScores,
    certify_in_H,
    distance_sq_1d,
    is_feasible,
    project_1d,
    project_feasible,
    score,
)
from .solver import (
    Partition,
    SolveReport,
    SolverParams,
    certify_stationary,
    gpa_solve,
    multi_start,
    performance_bound,
    refine_on_partition,
)
from .storage import adjusted_gap, read_instance, write_instance, write_report

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ContractError",
    "GenConfig",
    "Instance",
    "NumericError",
    "ParseError",
    "Partition",
    "PriceOptError",
    "ProjectionScores",
    "SolveReport",
    "SolverParams",
    "SpectralBounds",
    "StructuralError",
    "ValidationError",
    "ValidationReport",
    "adjusted_gap",
    "brute_projection",
    "certify_in_H",
    "certify_stationary",
    "count_partitions",
    "distance_sq_1d",
    "eval_lp_objective",
    "export_mip_lp",
    "generate",
    "generate_profitable",
    "global_optimum",
    "gpa_solve",
    "gradient_q",
    "is_feasible",
    "multi_start",
    "objective_q",
    "benchmark_suite",
    "parse_lp",
    "performance_bound",
    "profit_z",
    "project_1d",
    "project_feasible",
    "read_instance",
    "refine_on_partition",
    "score",
    "solve_restricted",
    "spectral_bounds",
    "unconstrained_minimizer",
    "validate",
    "validate_lp_file",
    "with_k",
    "write_instance",
    "write_report",
]
