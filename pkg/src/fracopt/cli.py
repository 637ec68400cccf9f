"""Command-line interface.

Subcommands: ``solve`` (one problem from files, certificate JSON to stdout),
``bench`` (seeded multi-trial experiments driven by a JSON config), ``gen``
(write synthetic problem files), ``verify`` (re-audit a recorded trace).

Exit codes: 0 success; 1 a verification found violations; 2 invalid flags or
configuration; 3 I/O or parse failure; 4 dimension mismatch between inputs;
5 solver runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np

from .exceptions import (
    ConvergenceError,
    DegenerateInputError,
    DimensionMismatchError,
    DomainError,
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
    apply_env_overrides,
    config_from_dict,
    run_experiment,
    solve_with,
    solver_run_config,
)
from .io import (
    load_matrix_csv,
    load_trace_csv,
    load_vector_csv,
    save_matrix_csv,
    save_vector_csv,
    write_jsonl,
    write_result_rows,
    write_trace_csv,
)
from .l1l2 import L1L2PenaltyProblem, gen_dct_matrix, gen_ground_truth, penalty_start_point
from .oracle import audit_trace, fit_rate_from_errors
from .rand import philox_generator
from .sgep import SfdaRecipe, SgepProblem, gen_sfda, sgep_default_init

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_DIMENSIONS = 4
EXIT_SOLVER = 5

SOLVER_CONFIG_KEYS = {
    "alpha",
    "a",
    "eta",
    "window",
    "alpha_lower",
    "alpha_upper",
    "alpha0",
    "step_tol",
    "max_iter",
    "relative_tol",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracopt",
        description="Ratio-objective solvers: sparse eigenvalue and sparse recovery benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve one problem read from files")
    solve.add_argument("problem", choices=["sgep", "l1l2"])
    solve.add_argument("--matrix-a", required=True, help="CSV matrix (A for sgep, sensing for l1l2)")
    solve.add_argument("--matrix-b", help="CSV matrix B (sgep only)")
    solve.add_argument("--vector-b", help="CSV observation vector (l1l2 only)")
    solve.add_argument("-r", "--sparsity", type=int, help="sparsity level r (sgep only)")
    solve.add_argument("--lam", type=float, default=8e-5, help="l1 penalty weight (l1l2)")
    solve.add_argument("--box-lower", type=float, default=-1.0)
    solve.add_argument("--box-upper", type=float, default=1.0)
    solve.add_argument("--solver", choices=["pgsa", "pgsa_ml", "pgsa_nl"], default="pgsa_ml")
    solve.add_argument("--x0", help="CSV start vector; defaults to the problem's canonical start")
    solve.add_argument("--config", help="JSON file with solver parameters")
    solve.add_argument("--trace", help="write the per-iteration trace CSV here")
    solve.add_argument("--step-tol", type=float)
    solve.add_argument("--max-iter", type=int)
    solve.add_argument("--relative-tol", action="store_true", default=None)
    solve.add_argument("--alpha", type=float, help="fixed step size (pgsa)")

    bench = sub.add_parser("bench", help="run a seeded multi-trial benchmark")
    bench.add_argument("--config", help="JSON experiment configuration")
    bench.add_argument("--seed", type=int, help="override master_seed")
    bench.add_argument("--trials", type=int, help="override trial count")
    bench.add_argument("--threads", type=int, help="worker threads")
    bench.add_argument("--out-dir", default=".", help="where to write results")
    bench.add_argument("--trace", action="store_true", help="record and write per-run traces")

    gen = sub.add_parser("gen", help="write synthetic problem files")
    gen.add_argument("experiment", choices=["sfda", "l1l2"])
    gen.add_argument("--out-dir", default=".")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--n", type=int)
    gen.add_argument("--p1", type=int, default=500)
    gen.add_argument("--p2", type=int, default=500)
    gen.add_argument("--r", type=int, default=50)
    gen.add_argument("--m", type=int, default=64)
    gen.add_argument("--k", type=int, default=12)
    gen.add_argument("--dct-f", type=float, default=1.0)

    verify = sub.add_parser("verify", help="re-audit a recorded trace")
    verify.add_argument("--trace", required=True)
    verify.add_argument("--problem", choices=["sgep", "l1l2"], required=True)
    verify.add_argument("--matrix-a", required=True)
    verify.add_argument("--matrix-b")
    verify.add_argument("--vector-b")
    verify.add_argument("-r", "--sparsity", type=int)
    verify.add_argument("--lam", type=float, default=8e-5)
    verify.add_argument("--box-lower", type=float, default=-1.0)
    verify.add_argument("--box-upper", type=float, default=1.0)
    verify.add_argument("--mode", choices=["pgsa", "pgsa_ml", "pgsa_nl"], default="pgsa")
    verify.add_argument("--a", type=float, default=1e-3)
    verify.add_argument("--eta", type=float, default=0.5)
    verify.add_argument("--window", type=int, default=4)
    verify.add_argument("--alpha-lower", type=float)
    verify.add_argument("--alpha-upper", type=float)
    verify.add_argument("--rate-fit", action="store_true", help="also fit the convergence rate")
    return parser


def _load_solver_overrides(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    with open(path, "r") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError(f"{path}: expected a JSON object")
    unknown = sorted(set(data) - SOLVER_CONFIG_KEYS)
    if unknown:
        raise InvalidConfigError(f"unknown solver config keys: {', '.join(unknown)}")
    return data


def _build_sgep(args: argparse.Namespace) -> SgepProblem:
    if not args.matrix_b:
        raise InvalidConfigError("sgep needs --matrix-b")
    if args.sparsity is None:
        raise InvalidConfigError("sgep needs a sparsity level -r")
    a = load_matrix_csv(args.matrix_a, symmetrize=True)
    b = load_matrix_csv(args.matrix_b, symmetrize=True)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"A has shape {a.shape}, B has shape {b.shape}")
    return SgepProblem(matrix_a=a, matrix_b=b, sparsity=args.sparsity)


def _build_l1l2(args: argparse.Namespace) -> L1L2PenaltyProblem:
    if not args.vector_b:
        raise InvalidConfigError("l1l2 needs --vector-b")
    sensing = load_matrix_csv(args.matrix_a)
    observation = load_vector_csv(args.vector_b)
    if observation.shape[0] != sensing.shape[0]:
        raise DimensionMismatchError(
            f"observation has length {observation.shape[0]}, "
            f"sensing matrix has {sensing.shape[0]} rows"
        )
    n = sensing.shape[1]
    return L1L2PenaltyProblem(
        sensing=sensing,
        observation=observation,
        lam=args.lam,
        lower=np.full(n, args.box_lower),
        upper=np.full(n, args.box_upper),
    )


def _start_point(
    args: argparse.Namespace, problem: SgepProblem | L1L2PenaltyProblem
) -> np.ndarray:
    if args.x0:
        x0 = load_vector_csv(args.x0)
        if x0.shape[0] != problem.dim:
            raise DimensionMismatchError(
                f"x0 has length {x0.shape[0]}, problem dimension is {problem.dim}"
            )
        return x0
    if isinstance(problem, SgepProblem):
        return sgep_default_init(problem.dim, problem.sparsity)
    return penalty_start_point(problem)


def cmd_solve(args: argparse.Namespace) -> int:
    overrides = _load_solver_overrides(args.config)
    problem = _build_sgep(args) if args.problem == "sgep" else _build_l1l2(args)
    x0 = _start_point(args, problem)

    cfg_fields: dict[str, Any] = dict(overrides)
    for key, value in (
        ("alpha", args.alpha),
        ("step_tol", args.step_tol),
        ("max_iter", args.max_iter),
        ("relative_tol", args.relative_tol),
    ):
        if value is not None:
            cfg_fields[key] = value
    exp_cfg = ExperimentConfig(
        experiment="l1l2" if args.problem == "l1l2" else "custom_sgep",
        solver=args.solver,
        trials=1,
        matrix_a=args.matrix_a,
        matrix_b=args.matrix_b or args.matrix_a,
        **cfg_fields,
    )
    run_cfg = solver_run_config(exp_cfg, args.solver, record_trace=bool(args.trace))
    start = time.perf_counter()
    trace = solve_with(problem, x0, args.solver, run_cfg)
    elapsed = time.perf_counter() - start
    if args.trace:
        write_trace_csv(args.trace, trace)
    cert = trace.certificate
    print(
        json.dumps(
            {
                "objective": cert.objective,
                "criticality_residual": cert.criticality_residual,
                "iterations": cert.iterations,
                "converged_reason": cert.converged_reason,
                "residual_norm": cert.residual_norm,
                "wall_time_s": elapsed,
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    data: dict[str, Any] = {}
    if args.config:
        with open(args.config, "r") as handle:
            try:
                data = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ParseError(f"{args.config}: expected a JSON object")
    data = apply_env_overrides(data)
    if args.seed is not None:
        data["master_seed"] = args.seed
    if args.trials is not None:
        data["trials"] = args.trials
    if args.threads is not None:
        data["threads"] = args.threads
    if args.trace:
        data["write_traces"] = True
    cfg = config_from_dict(data)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outcome = run_experiment(cfg)

    results_path = out_dir / "results.csv"
    write_result_rows(results_path, outcome.rows)
    records_path = out_dir / "runs.jsonl"
    write_jsonl(records_path, outcome.records)
    written = [results_path, records_path]
    if outcome.failures:
        failures_path = out_dir / "failures.jsonl"
        write_jsonl(failures_path, outcome.failures)
        written.append(failures_path)
    if cfg.write_traces:
        trace_dir = out_dir / "traces"
        trace_dir.mkdir(exist_ok=True)
        for result in outcome.results:
            path = trace_dir / f"trace_{result.solver}_{result.trial}.csv"
            write_trace_csv(path, result.trace)
        written.append(trace_dir)

    for row in outcome.rows:
        summary = ", ".join(f"{key}={row[key]}" for key in ("solver", "mean_objective", "trials"))
        print(summary)
    print("wrote: " + ", ".join(str(p) for p in written))
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta: dict[str, Any] = {"experiment": args.experiment, "seed": args.seed}
    if args.experiment == "sfda":
        n = args.n if args.n is not None else 1000
        recipe = SfdaRecipe(n=n, p1=args.p1, p2=args.p2, r=args.r, seed=args.seed)
        problem = gen_sfda(recipe)
        save_matrix_csv(out_dir / "A.csv", problem.matrix_a)
        save_matrix_csv(out_dir / "B.csv", problem.matrix_b)
        meta.update(
            {
                "n": n,
                "p1": args.p1,
                "p2": args.p2,
                "r": args.r,
                "within_ridge": recipe.within_ridge,
            }
        )
        written = ["A.csv", "B.csv"]
    else:
        n = args.n if args.n is not None else 1024
        rng = philox_generator(args.seed)
        sensing = gen_dct_matrix(args.m, n, args.dct_f, rng)
        truth = gen_ground_truth(n, args.k, rng)
        save_matrix_csv(out_dir / "A.csv", sensing)
        save_vector_csv(out_dir / "b.csv", sensing @ truth)
        save_vector_csv(out_dir / "xtrue.csv", truth)
        meta.update({"m": args.m, "n": n, "k": args.k, "dct_f": args.dct_f})
        written = ["A.csv", "b.csv", "xtrue.csv"]
    with open(out_dir / "meta.json", "w") as handle:
        json.dump(meta, handle, sort_keys=True, indent=2)
    print(f"wrote {', '.join(written)} and meta.json to {out_dir}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    trace, errors = load_trace_csv(args.trace)
    problem = _build_sgep(args) if args.problem == "sgep" else _build_l1l2(args)
    trace.params = {
        "mode": args.mode,
        "a": args.a,
        "eta": args.eta,
        "N": 0 if args.mode == "pgsa_ml" else args.window,
        "alpha_lower": args.alpha_lower,
        "alpha_upper": args.alpha_upper,
        "lipschitz": problem.lipschitz_grad_h,
        "f_is_convex": problem.f_is_convex,
        "g_sup_bound": problem.g_sup_bound,
    }
    report = audit_trace(trace, problem, mode=args.mode)
    for violation in report.violations:
        print(
            f"violation at iteration {violation.iteration}: {violation.kind} "
            f"(magnitude {violation.magnitude:.3e}) {violation.detail}"
        )
    if args.rate_fit:
        if errors is None:
            print("rate fit: trace carries no err_to_final column")
        else:
            try:
                fit = fit_rate_from_errors(errors[:-1])
            except InsufficientDataError as exc:
                print(f"rate fit: {exc}")
            else:
                print(
                    f"rate fit: slope {fit.slope:.6f}, r_squared {fit.r_squared:.4f}, "
                    f"window {fit.window[0]}..{fit.window[1]} ({fit.n_points} points)"
                )
    if report.ok:
        print(f"audit ok: {report.checks_run} checks, zero violations")
        return EXIT_OK
    print(f"audit failed: {len(report.violations)} violations in {report.checks_run} checks")
    return EXIT_VIOLATIONS


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "solve": cmd_solve,
        "bench": cmd_bench,
        "gen": cmd_gen,
        "verify": cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except (InvalidConfigError, InvalidProblemError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DimensionMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMENSIONS
    except (
        DomainError,
        LineSearchError,
        ConvergenceError,
        NumericsError,
        DegenerateInputError,
        SizeGuardError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main_entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    main_entry()
