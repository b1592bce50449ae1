"""Higher-order QMC for affine-parametric diffusion: rules, solver, estimators."""

from .cbc import SPODWeightSpec, cbc_construct, cbc_criterion, default_order, spod_set_weight
from .estimators import (
    ErrorBreakdown,
    Estimate,
    Level,
    LevelSchedule,
    Rates,
    SingleLevelConfig,
    build_rule,
    error_breakdown,
    mc_baseline,
    optimize_schedule,
    run_multi_level,
    run_single_level,
    truncation_tail_bound,
)
from .gfpoly import PolyFb, is_irreducible, laurent_digits, poly_mul_mod
from .pde import AffineDiffusionProblem, Mesh, check_admissibility, load_problem, qoi, solve
from .rules import InterlacedRuleSpec, PointSet, generate_points, read_rule_spec, write_rule_spec

__version__ = "0.1.0"
