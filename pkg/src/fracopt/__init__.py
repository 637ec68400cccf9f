"""Solvers and benchmarks for ratio-of-functions minimization.

Minimizes F(x) = (f(x) + h(x)) / g(x) by proximal-gradient steps on the
numerator corrected by a subgradient of the denominator, with fixed steps
(``run_pgsa``) or monotone / nonmonotone line search (``run_pgsa_ls``).
Ships two full problem families, sparse generalized eigenvalue problems and
box-constrained l1/l2 sparse recovery, plus independent verification tools
that re-audit recorded runs.
"""

from .exceptions import (
    ConvergenceError,
    DegenerateInputError,
    DimensionMismatchError,
    DomainError,
    FracoptError,
    InsufficientDataError,
    InvalidConfigError,
    InvalidProblemError,
    LineSearchError,
    NumericsError,
    ParseError,
    SizeGuardError,
)
from .experiments import (
    ExperimentConfig,
    ExperimentOutcome,
    TrialResult,
    apply_env_overrides,
    config_from_dict,
    run_experiment,
    run_trial,
    solve_with,
    solver_run_config,
)
from .l1l2 import (
    L1L2PenaltyProblem,
    RecoveryReport,
    gen_dct_matrix,
    gen_ground_truth,
    l1_box_initializer,
    l1l2_critical_residual,
    penalty_start_point,
    prox_l1_box,
    recovery_report,
)
from .linesearch import LineSearchConfig, bb_initial_step, line_search_step, run_pgsa_ls
from .oracle import (
    AuditReport,
    AuditViolation,
    RateFit,
    audit_trace,
    fd_gradient_check,
    fit_linear_rate,
    fit_rate_from_errors,
)
from .pgsa import PgsaConfig, SolverTrace, pgsa_step, run_pgsa
from .problem import (
    Certificate,
    ExtendedObjective,
    FractionalProblem,
    critical_point_check,
    domain_eps,
    eval_objective,
    quotient_frechet_residual,
)
from .rand import as_generator, philox_generator
from .sgep import (
    SfdaRecipe,
    SgepProblem,
    gen_sfda,
    gen_sfda_dataset,
    project_sparse_sphere,
    scatter_matrices,
    sgep_brute_force_optimum,
    sgep_critical_residual,
    sgep_default_init,
)

__version__ = "0.1.0"

__all__ = [
    "AuditReport",
    "AuditViolation",
    "Certificate",
    "ConvergenceError",
    "DegenerateInputError",
    "DimensionMismatchError",
    "DomainError",
    "ExperimentConfig",
    "ExperimentOutcome",
    "ExtendedObjective",
    "FracoptError",
    "FractionalProblem",
    "InsufficientDataError",
    "InvalidConfigError",
    "InvalidProblemError",
    "L1L2PenaltyProblem",
    "LineSearchConfig",
    "LineSearchError",
    "NumericsError",
    "ParseError",
    "PgsaConfig",
    "RateFit",
    "RecoveryReport",
    "SfdaRecipe",
    "SgepProblem",
    "SizeGuardError",
    "SolverTrace",
    "TrialResult",
    "apply_env_overrides",
    "as_generator",
    "audit_trace",
    "bb_initial_step",
    "config_from_dict",
    "critical_point_check",
    "domain_eps",
    "eval_objective",
    "fd_gradient_check",
    "fit_linear_rate",
    "fit_rate_from_errors",
    "gen_dct_matrix",
    "gen_ground_truth",
    "gen_sfda",
    "gen_sfda_dataset",
    "l1_box_initializer",
    "l1l2_critical_residual",
    "line_search_step",
    "penalty_start_point",
    "pgsa_step",
    "philox_generator",
    "project_sparse_sphere",
    "prox_l1_box",
    "quotient_frechet_residual",
    "recovery_report",
    "run_experiment",
    "run_pgsa",
    "run_pgsa_ls",
    "run_trial",
    "scatter_matrices",
    "sgep_brute_force_optimum",
    "sgep_critical_residual",
    "sgep_default_init",
    "solve_with",
    "solver_run_config",
]
