"""Benchmark protocols: configuration, per-trial runs, aggregation.

A benchmark is a pure function of (configuration, master seed): every trial
draws from its own Philox stream keyed by (master_seed, trial_index), trials
are aggregated in index order whatever the thread count, and the per-run
records contain no timing fields, so identical inputs give byte-identical
records.  Wall-clock times appear only in the aggregate table and cover the
solver call alone (problem construction, including the Lipschitz-constant
estimation, and the sparse-recovery initializer run outside the clock).
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields as dataclass_fields
from typing import Any

import numpy as np

from .exceptions import FracoptError, InvalidConfigError
from .io import load_matrix_csv
from .l1l2 import (
    L1L2PenaltyProblem,
    RecoveryReport,
    gen_dct_matrix,
    gen_ground_truth,
    penalty_start_point,
    recovery_report,
)
from .linesearch import LineSearchConfig, run_pgsa_ls
from .pgsa import PgsaConfig, SolverTrace, run_pgsa
from .problem import FractionalProblem
from .rand import philox_generator
from .sgep import SfdaRecipe, SgepProblem, gen_sfda, sgep_default_init

EXPERIMENTS = ("sfda", "l1l2", "custom_sgep")
SOLVERS = ("pgsa", "pgsa_ml", "pgsa_nl")
ENV_PREFIX = "FRACOPT_"


@dataclass
class ExperimentConfig:
    """Everything a benchmark run depends on.

    JSON configuration files use exactly these field names as keys, and each
    key can be overridden through an environment variable named
    FRACOPT_<KEY-IN-UPPERCASE> (values parsed as JSON, bare strings allowed).
    ``solver`` may be one of the solver names or "all".  Fields left at None
    fall back to per-experiment defaults documented on the field.
    """

    experiment: str = "sfda"
    solver: str = "all"
    trials: int = 20
    master_seed: int = 0
    threads: int = 1
    write_traces: bool = False
    # dimensions; n defaults to 1000 (sfda) or 1024 (l1l2)
    n: int | None = None
    p1: int = 500
    p2: int = 500
    r: int = 50
    m: int = 64
    k: int = 12
    dct_f: float = 1.0
    lam: float = 8e-5
    box_lower: float = -1.0
    box_upper: float = 1.0
    # solver knobs; None keeps the solver's own defaults
    alpha: float | None = None
    a: float = 1e-3
    eta: float = 0.5
    window: int = 4
    alpha_lower: float | None = None
    alpha_upper: float = 1e8
    alpha0: float | None = None
    step_tol: float | None = None
    max_iter: int | None = None
    relative_tol: bool | None = None
    # file-backed eigenvalue problem
    matrix_a: str | None = None
    matrix_b: str | None = None

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise InvalidConfigError(
                f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}"
            )
        if self.solver != "all" and self.solver not in SOLVERS:
            raise InvalidConfigError(
                f"unknown solver {self.solver!r}; expected 'all' or one of {SOLVERS}"
            )
        if self.trials < 0:
            raise InvalidConfigError("trials must be nonnegative")
        if self.threads < 1:
            raise InvalidConfigError("threads must be at least 1")
        if self.experiment == "custom_sgep" and (not self.matrix_a or not self.matrix_b):
            raise InvalidConfigError("custom_sgep needs matrix_a and matrix_b paths")

    @property
    def dimension(self) -> int:
        if self.n is not None:
            return self.n
        return 1024 if self.experiment == "l1l2" else 1000

    @property
    def stop_is_relative(self) -> bool:
        if self.relative_tol is not None:
            return self.relative_tol
        return self.experiment == "l1l2"

    def solver_names(self) -> tuple[str, ...]:
        return SOLVERS if self.solver == "all" else (self.solver,)


def config_from_dict(data: dict[str, Any]) -> ExperimentConfig:
    """Build a config from parsed JSON, rejecting unknown keys."""
    known = {f.name for f in dataclass_fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise InvalidConfigError(f"unknown config keys: {', '.join(unknown)}")
    return ExperimentConfig(**data)


def apply_env_overrides(
    data: dict[str, Any], environ: dict[str, str] | None = None
) -> dict[str, Any]:
    """Overlay FRACOPT_* environment variables onto a config dictionary."""
    env = os.environ if environ is None else environ
    result = dict(data)
    for field in dataclass_fields(ExperimentConfig):
        raw = env.get(ENV_PREFIX + field.name.upper())
        if raw is None:
            continue
        try:
            result[field.name] = json.loads(raw)
        except json.JSONDecodeError:
            result[field.name] = raw
    return result


def solver_run_config(
    cfg: ExperimentConfig, solver: str, record_trace: bool | None = None
) -> PgsaConfig | LineSearchConfig:
    """Translate experiment-level knobs into a concrete solver config."""
    record = cfg.write_traces if record_trace is None else record_trace
    common = dict(
        step_tol=cfg.step_tol,
        max_iter=cfg.max_iter,
        relative_tol=cfg.stop_is_relative,
        record_trace=record,
    )
    if solver == "pgsa":
        return PgsaConfig(alpha=cfg.alpha, **common)
    if solver not in ("pgsa_ml", "pgsa_nl"):
        raise InvalidConfigError(f"unknown solver {solver!r}")
    return LineSearchConfig(
        a=cfg.a,
        eta=cfg.eta,
        N=0 if solver == "pgsa_ml" else cfg.window,
        alpha_lower=cfg.alpha_lower,
        alpha_upper=cfg.alpha_upper,
        alpha0=cfg.alpha0,
        **common,
    )


def solve_with(
    problem: FractionalProblem,
    x0: np.ndarray,
    solver: str,
    config: PgsaConfig | LineSearchConfig,
) -> SolverTrace:
    if solver == "pgsa":
        assert isinstance(config, PgsaConfig)
        return run_pgsa(problem, x0, config)
    assert isinstance(config, LineSearchConfig)
    return run_pgsa_ls(problem, x0, config)


@dataclass
class TrialResult:
    """One solver run inside one trial."""

    experiment: str
    solver: str
    trial: int
    trace: SolverTrace
    wall_time_s: float
    report: RecoveryReport | None = None

    def record(self) -> dict[str, Any]:
        cert = self.trace.certificate
        rec: dict[str, Any] = {
            "experiment": self.experiment,
            "solver": self.solver,
            "trial": self.trial,
            "objective": cert.objective,
            "iterations": cert.iterations,
            "converged_reason": cert.converged_reason,
            "criticality_residual": cert.criticality_residual,
        }
        if self.report is not None:
            rec["relative_error"] = self.report.relative_error
            rec["success"] = self.report.success
            rec["recovery_objective"] = self.report.objective
        return rec


def _sfda_problem(cfg: ExperimentConfig, trial: int) -> tuple[SgepProblem, np.ndarray]:
    rng = philox_generator(cfg.master_seed, trial)
    recipe = SfdaRecipe(n=cfg.dimension, p1=cfg.p1, p2=cfg.p2, r=cfg.r, seed=rng)
    problem = gen_sfda(recipe)
    return problem, sgep_default_init(cfg.dimension, cfg.r)


def _l1l2_problem(
    cfg: ExperimentConfig, trial: int
) -> tuple[L1L2PenaltyProblem, np.ndarray, np.ndarray]:
    rng = philox_generator(cfg.master_seed, trial)
    n = cfg.dimension
    sensing = gen_dct_matrix(cfg.m, n, cfg.dct_f, rng)
    truth = gen_ground_truth(n, cfg.k, rng)
    problem = L1L2PenaltyProblem(
        sensing=sensing,
        observation=sensing @ truth,
        lam=cfg.lam,
        lower=np.full(n, cfg.box_lower),
        upper=np.full(n, cfg.box_upper),
    )
    return problem, penalty_start_point(problem), truth


def run_trial(
    cfg: ExperimentConfig,
    trial: int,
    shared_problem: tuple[SgepProblem, np.ndarray] | None = None,
) -> list[TrialResult]:
    """Run every configured solver on this trial's problem instance."""
    truth = None
    if cfg.experiment == "sfda":
        problem, x0 = _sfda_problem(cfg, trial)
    elif cfg.experiment == "l1l2":
        problem, x0, truth = _l1l2_problem(cfg, trial)
    else:
        assert shared_problem is not None, "custom_sgep requires a preloaded problem"
        problem, x0 = shared_problem
    results = []
    for solver in cfg.solver_names():
        run_cfg = solver_run_config(cfg, solver)
        start = time.perf_counter()
        trace = solve_with(problem, x0, solver, run_cfg)
        elapsed = time.perf_counter() - start
        report = None
        if truth is not None:
            report = recovery_report(trace.final_x, truth, trace.iterations, elapsed)
        results.append(
            TrialResult(
                experiment=cfg.experiment,
                solver=solver,
                trial=trial,
                trace=trace,
                wall_time_s=elapsed,
                report=report,
            )
        )
    return results


@dataclass
class ExperimentOutcome:
    """Aggregated benchmark results plus everything needed to re-audit them."""

    rows: list[dict[str, Any]]
    records: list[dict[str, Any]]
    results: list[TrialResult]
    failures: list[dict[str, Any]]


def run_experiment(cfg: ExperimentConfig) -> ExperimentOutcome:
    """Run all trials, in parallel when asked, and aggregate deterministically.

    A trial that raises a package error is recorded in ``failures`` and left
    out of the aggregates; anything else propagates, since it means a bug
    rather than a degenerate instance.
    """
    shared = None
    if cfg.experiment == "custom_sgep":
        a = load_matrix_csv(cfg.matrix_a, symmetrize=True)
        b = load_matrix_csv(cfg.matrix_b, symmetrize=True)
        problem = SgepProblem(matrix_a=a, matrix_b=b, sparsity=cfg.r)
        shared = (problem, sgep_default_init(problem.dim, cfg.r))

    def one_trial(index: int) -> list[TrialResult] | dict[str, Any]:
        try:
            return run_trial(cfg, index, shared)
        except FracoptError as exc:
            return {"trial": index, "error": type(exc).__name__, "message": str(exc)}

    outcomes: list[list[TrialResult] | dict[str, Any]]
    if cfg.threads > 1 and cfg.trials > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            outcomes = list(pool.map(one_trial, range(cfg.trials)))
    else:
        outcomes = [one_trial(i) for i in range(cfg.trials)]

    results: list[TrialResult] = []
    failures: list[dict[str, Any]] = []
    for outcome in outcomes:
        if isinstance(outcome, dict):
            failures.append(outcome)
        else:
            results.extend(outcome)

    if cfg.trials == 0:
        rows = []
    else:
        rows = [aggregate_row(cfg, solver, results, failures) for solver in cfg.solver_names()]
    records = [result.record() for result in results]
    return ExperimentOutcome(rows=rows, records=records, results=results, failures=failures)


def aggregate_row(
    cfg: ExperimentConfig,
    solver: str,
    results: list[TrialResult],
    failures: list[dict[str, Any]],
) -> dict[str, Any]:
    """One table row per solver; aggregates cover completed trials only."""
    mine = [res for res in results if res.solver == solver]
    row: dict[str, Any] = {
        "experiment": cfg.experiment,
        "solver": solver,
        "trials": len(mine),
        "failed": len(failures),
        "mean_objective": "",
        "mean_time_s": "",
        "success_rate": "",
        "mean_iterations": "",
    }
    if not mine:
        return row
    row["mean_time_s"] = float(np.mean([res.wall_time_s for res in mine]))
    row["mean_iterations"] = float(np.mean([res.trace.certificate.iterations for res in mine]))
    if cfg.experiment == "l1l2":
        reports = [res.report for res in mine if res.report is not None]
        successes = [rep for rep in reports if rep.success]
        row["success_rate"] = len(successes) / len(reports) if reports else math.nan
        row["mean_objective"] = (
            float(np.mean([rep.objective for rep in successes])) if successes else math.nan
        )
    else:
        row["mean_objective"] = float(
            np.mean([res.trace.certificate.objective for res in mine])
        )
    return row
