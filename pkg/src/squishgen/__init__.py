"""squishgen: legal VLSI layout pattern synthesis.

Pipeline: encode layouts as lossless squish patterns, fold topologies into
multi-channel tensors, generate fresh binary topologies with a two-state
denoising diffusion model, legalize them against design rules with a
feasibility solver, and verify with the built-in DRC checker.
"""

from ._solver import BACKEND as SOLVER_BACKEND
from .denoiser import ConvDenoiser, OracleDenoiser, TrainConfig, train
from .diffusion import (
    DiffusionSchedule,
    forward_marginal,
    forward_sample,
    make_schedule,
    posterior,
    reverse_distribution,
    sample_topologies,
    sample_topology,
    transition_matrix,
    vlb_loss,
)
from .drc import DiversityReport, Violation, check_drc, diversity, legality_rate
from .legalize import (
    ConstraintSet,
    RuleSet,
    Solution,
    SolveManyResult,
    extract_constraints,
    prefilter,
    solve,
    solve_many,
    verify_solution,
)
from .squish import (
    Complexity,
    LayoutPattern,
    SquishPattern,
    complexity,
    extract_squish,
    fold,
    pad_to_square,
    reconstruct_layout,
    remove_redundant_lines,
    unfold,
    validate_layout,
)

__version__ = "0.1.0"

__all__ = [
    "SOLVER_BACKEND",
    "ConvDenoiser",
    "OracleDenoiser",
    "TrainConfig",
    "train",
    "DiffusionSchedule",
    "forward_marginal",
    "forward_sample",
    "make_schedule",
    "posterior",
    "reverse_distribution",
    "sample_topologies",
    "sample_topology",
    "transition_matrix",
    "vlb_loss",
    "DiversityReport",
    "Violation",
    "check_drc",
    "diversity",
    "legality_rate",
    "ConstraintSet",
    "RuleSet",
    "Solution",
    "SolveManyResult",
    "extract_constraints",
    "prefilter",
    "solve",
    "solve_many",
    "verify_solution",
    "Complexity",
    "LayoutPattern",
    "SquishPattern",
    "complexity",
    "extract_squish",
    "fold",
    "pad_to_square",
    "reconstruct_layout",
    "remove_redundant_lines",
    "unfold",
    "validate_layout",
    "__version__",
]
