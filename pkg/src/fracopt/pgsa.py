"""Fixed-step proximity-gradient-subgradient solver for ratio objectives.

One iteration linearizes the denominator through a subgradient, takes a
gradient step on the smooth part scaled by the current objective value, and
applies the prox of the nonsmooth part:

    y      in  subgrad g(x_k)
    c_k    =   F(x_k)
    x_{k+1} in prox_{alpha f}( x_k - alpha * grad_h(x_k) + alpha * c_k * y )

With step sizes bounded away from 0 and 1/L (2/L when f is convex) the
objective decreases monotonically and the iterates stay inside dom(F).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .exceptions import DomainError, InvalidConfigError, NumericsError
from .problem import Certificate, ExtendedObjective, FractionalProblem, eval_objective

logger = logging.getLogger(__name__)

# Relative slack for the instrumented sufficient-decrease check; pure float
# noise, not algorithmic failure, lives below this.
DECREASE_SLACK = 1e-10


@dataclass(frozen=True)
class PgsaConfig:
    """Configuration for run_pgsa.

    ``alpha`` is the constant step size; None picks 0.99/L, or 1.99/L when
    the problem declares f convex.  ``alpha_lower``/``alpha_upper`` default to
    ``alpha`` (a constant schedule) and exist so the validation logic covers
    schedules bounded away from the endpoints.  ``max_iter`` defaults to 2n,
    or 10n when ``relative_tol`` is set; ``step_tol`` defaults to 1e-6
    absolute, or 1e-8 when interpreted relative to the iterate norm.

    ``strict_checks`` promotes the per-iteration sufficient-decrease
    instrumentation from a logged warning to a hard NumericsError.
    """

    alpha: float | None = None
    alpha_lower: float | None = None
    alpha_upper: float | None = None
    max_iter: int | None = None
    step_tol: float | None = None
    relative_tol: bool = False
    record_trace: bool = False
    strict_checks: bool = False


@dataclass
class SolverTrace:
    """Everything a solver run recorded, enough to re-audit it offline.

    Arrays are indexed so that ``objective[k]`` is F(x_k) for k = 0..K, while
    ``alpha[k]`` and ``step_norm[k]`` describe the step from x_k to x_{k+1}
    for k = 0..K-1.  The scaling sequence c_k equals the objective sequence
    by construction (each c_k is the objective value reused from the previous
    evaluation).  ``iterates`` is only populated when the run was configured
    with record_trace; everything else is always present.  ``params`` holds
    the resolved solver parameters so an audit does not have to guess them.
    """

    objective: np.ndarray
    g_value: np.ndarray
    alpha: np.ndarray
    step_norm: np.ndarray
    final_x: np.ndarray
    certificate: Certificate
    params: dict[str, Any] = field(default_factory=dict)
    backtracks: np.ndarray | None = None
    iterates: np.ndarray | None = None

    @property
    def iterations(self) -> int:
        return int(self.alpha.shape[0])

    def errors_to_final(self) -> np.ndarray:
        """||x_k - x_K|| for every recorded iterate; requires record_trace."""
        if self.iterates is None:
            raise ValueError("trace was recorded without iterates")
        return np.linalg.norm(self.iterates - self.iterates[-1], axis=1)


def _resolve_alpha(problem: FractionalProblem, alpha: float | None) -> float:
    cap = 2.0 if problem.f_is_convex else 1.0
    if alpha is None:
        return (cap - 0.01) / problem.lipschitz_grad_h
    return float(alpha)


def _validate_steps(problem: FractionalProblem, lo: float, hi: float) -> None:
    lipschitz = problem.lipschitz_grad_h
    cap = (2.0 if problem.f_is_convex else 1.0) / lipschitz
    if not (0.0 < lo <= hi):
        raise InvalidConfigError(f"need 0 < alpha_lower <= alpha_upper, got [{lo}, {hi}]")
    if not hi < cap:
        kind = "2/L (convex f)" if problem.f_is_convex else "1/L"
        raise InvalidConfigError(
            f"alpha_upper = {hi:.6e} must stay strictly below {kind} = {cap:.6e}"
        )


def _stop_metric(step: float, x_new: np.ndarray, relative: bool) -> float:
    if not relative:
        return step
    norm = float(np.linalg.norm(x_new))
    return step / norm if norm > 0 else math.inf


def _prox_step(
    problem: FractionalProblem,
    x: np.ndarray,
    alpha: float,
    scale: float,
) -> tuple[np.ndarray, ExtendedObjective]:
    """One prox-gradient-subgradient step with the ratio value ``scale``."""
    anchor = x - alpha * problem.grad_h(x) + (alpha * scale) * problem.subgrad_g(x)
    if np.isnan(anchor).any():
        raise NumericsError("NaN in step anchor (gradient or subgradient callback)")
    x_new = np.asarray(problem.prox_f(alpha, anchor), dtype=float)
    if np.isnan(x_new).any():
        raise NumericsError("NaN from prox callback")
    return x_new, eval_objective(problem, x_new)


def pgsa_step(problem: FractionalProblem, x: np.ndarray, alpha: float) -> np.ndarray:
    """A single solver step from x with step size alpha.

    Evaluates the ratio at x to get the scaling, so callers taking many steps
    should prefer run_pgsa, which reuses the previous iteration's objective
    value instead of paying an extra evaluation per step.
    """
    if alpha <= 0:
        raise InvalidConfigError("step size must be positive")
    x = np.asarray(x, dtype=float)
    ext = eval_objective(problem, x)
    if not ext.in_domain:
        raise DomainError("pgsa_step started outside dom(F)")
    x_new, _ = _prox_step(problem, x, alpha, ext.value)
    return x_new


def _decrease_check(
    problem: FractionalProblem,
    prev_value: float,
    new_ext: ExtendedObjective,
    alpha: float,
    step: float,
    iteration: int,
    strict: bool,
) -> None:
    # Instrumentation for the guaranteed per-step decrease; coefficient is
    # (1/alpha - L)/2 in general and the larger 1/alpha - L/2 for convex f.
    lipschitz = problem.lipschitz_grad_h
    if problem.f_is_convex:
        coef = (1.0 / alpha - lipschitz / 2.0) / new_ext.denominator
    else:
        coef = (1.0 / alpha - lipschitz) / (2.0 * new_ext.denominator)
    slack = DECREASE_SLACK * (1.0 + abs(prev_value))
    if new_ext.value + coef * step * step > prev_value + slack:
        msg = (
            f"sufficient decrease violated at iteration {iteration}: "
            f"{new_ext.value:.17g} + {coef:.3e} * {step:.3e}^2 > {prev_value:.17g}"
        )
        if strict:
            raise NumericsError(msg)
        logger.warning(msg)


def run_pgsa(
    problem: FractionalProblem,
    x0: np.ndarray,
    config: PgsaConfig | None = None,
) -> SolverTrace:
    """Run the fixed-step solver from x0 until the step norm is small.

    Parameters
    ----------
    problem : FractionalProblem
        Must satisfy the standing assumptions; x0 must be in dom(F).
    x0 : array
        Starting point.
    config : PgsaConfig, optional
        Unset fields are filled with the defaults described on PgsaConfig.

    Returns
    -------
    SolverTrace
        Per-iteration history plus a Certificate.  The run stops with reason
        "step_tol" when the (relative, if configured) step norm drops to the
        tolerance, "max_iter" at the iteration cap, and "domain_error" if an
        iterate ever leaves dom(F), which the theory rules out for correctly
        specified problems but corrupted callbacks can produce.
    """
    cfg = config or PgsaConfig()
    x = np.asarray(x0, dtype=float).copy()
    n = x.shape[0]
    if n != problem.dim:
        raise InvalidConfigError(f"x0 has length {n}, problem dimension is {problem.dim}")

    alpha = _resolve_alpha(problem, cfg.alpha)
    lo = alpha if cfg.alpha_lower is None else float(cfg.alpha_lower)
    hi = alpha if cfg.alpha_upper is None else float(cfg.alpha_upper)
    _validate_steps(problem, lo, hi)
    if not (lo <= alpha <= hi):
        raise InvalidConfigError("alpha must lie within [alpha_lower, alpha_upper]")
    max_iter = cfg.max_iter if cfg.max_iter is not None else (10 * n if cfg.relative_tol else 2 * n)
    step_tol = cfg.step_tol if cfg.step_tol is not None else (1e-8 if cfg.relative_tol else 1e-6)

    ext = eval_objective(problem, x)
    if not ext.in_domain:
        raise DomainError("run_pgsa started outside dom(F)")

    objective = [ext.value]
    g_value = [ext.denominator]
    alphas: list[float] = []
    steps: list[float] = []
    iterates = [x.copy()] if cfg.record_trace else None
    reason = "max_iter"

    for k in range(max_iter):
        x_new, new_ext = _prox_step(problem, x, alpha, ext.value)
        if not new_ext.in_domain:
            reason = "domain_error"
            break
        step = float(np.linalg.norm(x_new - x))
        _decrease_check(problem, ext.value, new_ext, alpha, step, k, cfg.strict_checks)
        alphas.append(alpha)
        steps.append(step)
        objective.append(new_ext.value)
        g_value.append(new_ext.denominator)
        if iterates is not None:
            iterates.append(x_new.copy())
        x, ext = x_new, new_ext
        if _stop_metric(step, x_new, cfg.relative_tol) <= step_tol:
            reason = "step_tol"
            break

    try:
        residual = problem.critical_residual(x)
    except NotImplementedError:
        residual = None
    cert = Certificate(
        objective=ext.value,
        criticality_residual=residual,
        iterations=len(alphas),
        converged_reason=reason,
    )
    return SolverTrace(
        objective=np.asarray(objective),
        g_value=np.asarray(g_value),
        alpha=np.asarray(alphas),
        step_norm=np.asarray(steps),
        final_x=x,
        certificate=cert,
        params={
            "mode": "pgsa",
            "alpha": alpha,
            "alpha_lower": lo,
            "alpha_upper": hi,
            "step_tol": step_tol,
            "relative_tol": cfg.relative_tol,
            "lipschitz": problem.lipschitz_grad_h,
            "f_is_convex": problem.f_is_convex,
            "g_sup_bound": problem.g_sup_bound,
        },
        iterates=np.asarray(iterates) if iterates is not None else None,
    )
