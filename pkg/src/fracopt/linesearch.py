"""Backtracked variant of the ratio solver with a spectral initial step.

Each iteration seeds a trial step from consecutive iterate and gradient
differences (a Barzilai-Borwein quotient clamped to configured bounds), then
shrinks it geometrically until the trial point is feasible and its objective
sits below the maximum over the last N+1 accepted values minus a quadratic
decrease term:

    F(x_trial) <= max_{[k-N]+ <= j <= k} F(x_j) - (a/2) * ||x_trial - x_k||^2

N = 0 forces monotone decrease; N > 0 allows occasional increases while the
windowed maxima still decrease.  Accepted steps never fall below
eta / (a * M + L), where M bounds the denominator on the initial level set,
so backtracking always terminates for correctly specified problems.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, InvalidConfigError, LineSearchError, NumericsError
from .pgsa import SolverTrace, _stop_metric
from .problem import Certificate, ExtendedObjective, FractionalProblem, eval_objective

# A trial step is never shrunk more than this many times; with the default
# eta = 0.5 this covers a dynamic range of 2^60 between the seed step and the
# guaranteed acceptance threshold.
MAX_BACKTRACKS = 60

# Once alpha <= 1/(aM + L) acceptance holds in exact arithmetic, so a trial
# value exceeding the window by at most this relative slack is rounding noise
# from a near-critical iterate, not a genuine rejection.  Kept two orders
# below the 1e-10 audit tolerance so slack-accepted steps still audit clean.
ACCEPT_REL_SLACK = 1e-12


@dataclass(frozen=True)
class LineSearchConfig:
    """Configuration for run_pgsa_ls.

    ``a`` is the quadratic decrease coefficient, ``eta`` the backtracking
    factor, and ``N`` the nonmonotone memory (0 = monotone).  Initial trial
    steps are clamped into [alpha_lower, alpha_upper]; ``alpha_lower`` and the
    first seed ``alpha0`` default to 0.99/L (1.99/L when f is convex).
    ``max_iter`` and ``step_tol`` default exactly as in PgsaConfig.
    """

    a: float = 1e-3
    eta: float = 0.5
    N: int = 4
    alpha_lower: float | None = None
    alpha_upper: float = 1e8
    alpha0: float | None = None
    max_backtracks: int = MAX_BACKTRACKS
    max_iter: int | None = None
    step_tol: float | None = None
    relative_tol: bool = False
    record_trace: bool = False
    strict_checks: bool = False


class ObjectiveWindow:
    """Ring buffer over the last N+1 accepted objective values."""

    def __init__(self, memory: int):
        if memory < 0:
            raise InvalidConfigError("window memory must be nonnegative")
        self._values: deque[float] = deque(maxlen=memory + 1)

    def push(self, value: float) -> None:
        self._values.append(float(value))

    @property
    def maximum(self) -> float:
        if not self._values:
            raise ValueError("window is empty")
        return max(self._values)

    def __len__(self) -> int:
        return len(self._values)


def bb_initial_step(
    dx: np.ndarray, dgrad: np.ndarray, alpha_lower: float, alpha_upper: float
) -> float:
    """Spectral trial step from the last iterate and gradient differences.

    Returns ||dx||^2 / |<dx, dgrad>| clamped into [alpha_lower, alpha_upper],
    or alpha_upper when the inner product vanishes.
    """
    if not (0.0 < alpha_lower <= alpha_upper):
        raise InvalidConfigError("need 0 < alpha_lower <= alpha_upper")
    inner = float(np.dot(dx, dgrad))
    if inner == 0.0:
        return alpha_upper
    raw = float(np.dot(dx, dx)) / abs(inner)
    return min(alpha_upper, max(alpha_lower, raw))


def _backtrack(
    problem: FractionalProblem,
    x: np.ndarray,
    scale: float,
    grad: np.ndarray,
    subgrad: np.ndarray,
    window_max: float,
    alpha0: float,
    a: float,
    eta: float,
    max_backtracks: int,
) -> tuple[np.ndarray, ExtendedObjective, float, int]:
    """Shrink alpha0 geometrically until the acceptance test passes.

    Below the guaranteed threshold 1/(aM + L) a candidate matching the window
    to within ACCEPT_REL_SLACK is accepted as well; without that escape a
    near-critical iterate can be rejected forever on rounding noise alone.
    """
    direction = scale * subgrad - grad
    bound = problem.g_sup_bound
    guaranteed = None if bound is None else 1.0 / (a * bound + problem.lipschitz_grad_h)
    alpha = alpha0
    for m in range(max_backtracks + 1):
        anchor = x + alpha * direction
        if np.isnan(anchor).any():
            raise NumericsError("NaN in step anchor (gradient or subgradient callback)")
        x_trial = np.asarray(problem.prox_f(alpha, anchor), dtype=float)
        if np.isnan(x_trial).any():
            raise NumericsError("NaN from prox callback")
        ext = eval_objective(problem, x_trial)
        if ext.in_domain:
            diff = float(np.linalg.norm(x_trial - x))
            if ext.value <= window_max - 0.5 * a * diff * diff:
                return x_trial, ext, alpha, m
            if (
                guaranteed is not None
                and alpha <= guaranteed
                and ext.value <= window_max + ACCEPT_REL_SLACK * (1.0 + abs(window_max))
            ):
                return x_trial, ext, alpha, m
        alpha *= eta
    raise LineSearchError(
        f"no acceptable step after {max_backtracks} backtracks from alpha0 = {alpha0:.6e}"
    )


def line_search_step(
    problem: FractionalProblem,
    x: np.ndarray,
    window: ObjectiveWindow,
    alpha0: float,
    config: LineSearchConfig | None = None,
) -> tuple[np.ndarray, float]:
    """One backtracked step; returns the accepted point and step size.

    ``window`` must already contain F(x) (and up to N earlier accepted
    values).  Standalone entry point; run_pgsa_ls uses the same core but
    reuses cached evaluations across iterations.
    """
    cfg = config or LineSearchConfig()
    if alpha0 <= 0:
        raise InvalidConfigError("alpha0 must be positive")
    x = np.asarray(x, dtype=float)
    ext = eval_objective(problem, x)
    if not ext.in_domain:
        raise DomainError("line_search_step started outside dom(F)")
    x_new, _, alpha, _ = _backtrack(
        problem,
        x,
        ext.value,
        problem.grad_h(x),
        problem.subgrad_g(x),
        window.maximum,
        alpha0,
        cfg.a,
        cfg.eta,
        cfg.max_backtracks,
    )
    return x_new, alpha


def run_pgsa_ls(
    problem: FractionalProblem,
    x0: np.ndarray,
    config: LineSearchConfig | None = None,
) -> SolverTrace:
    """Run the line-search solver from x0.

    Stopping mirrors run_pgsa: "step_tol" when the (relative, if configured)
    step norm reaches the tolerance, "max_iter" at the cap, "domain_error"
    only if corrupted callbacks drive an accepted iterate out of dom(F),
    which the acceptance test itself prevents for sound problems.
    """
    cfg = config or LineSearchConfig()
    x = np.asarray(x0, dtype=float).copy()
    n = x.shape[0]
    if n != problem.dim:
        raise InvalidConfigError(f"x0 has length {n}, problem dimension is {problem.dim}")
    if cfg.a <= 0:
        raise InvalidConfigError("decrease coefficient a must be positive")
    if not (0.0 < cfg.eta < 1.0):
        raise InvalidConfigError("backtracking factor eta must lie in (0, 1)")
    if cfg.N < 0:
        raise InvalidConfigError("window memory N must be nonnegative")

    cap = (2.0 if problem.f_is_convex else 1.0) - 0.01
    lo = cfg.alpha_lower if cfg.alpha_lower is not None else cap / problem.lipschitz_grad_h
    hi = float(cfg.alpha_upper)
    if not (0.0 < lo <= hi):
        raise InvalidConfigError(f"need 0 < alpha_lower <= alpha_upper, got [{lo}, {hi}]")
    alpha_seed = cfg.alpha0 if cfg.alpha0 is not None else lo
    if not (lo <= alpha_seed <= hi):
        raise InvalidConfigError("alpha0 must lie within [alpha_lower, alpha_upper]")
    max_iter = cfg.max_iter if cfg.max_iter is not None else (10 * n if cfg.relative_tol else 2 * n)
    step_tol = cfg.step_tol if cfg.step_tol is not None else (1e-8 if cfg.relative_tol else 1e-6)

    ext = eval_objective(problem, x)
    if not ext.in_domain:
        raise DomainError("run_pgsa_ls started outside dom(F)")

    window = ObjectiveWindow(cfg.N)
    window.push(ext.value)
    grad = problem.grad_h(x)

    objective = [ext.value]
    g_value = [ext.denominator]
    alphas: list[float] = []
    steps: list[float] = []
    backtracks: list[int] = []
    iterates = [x.copy()] if cfg.record_trace else None
    reason = "max_iter"
    alpha_trial = alpha_seed

    for _ in range(max_iter):
        x_new, new_ext, alpha, m = _backtrack(
            problem,
            x,
            ext.value,
            grad,
            problem.subgrad_g(x),
            window.maximum,
            alpha_trial,
            cfg.a,
            cfg.eta,
            cfg.max_backtracks,
        )
        if not new_ext.in_domain:  # unreachable for sound problems; keep the trace honest
            reason = "domain_error"
            break
        dx = x_new - x
        step = float(np.linalg.norm(dx))
        grad_new = problem.grad_h(x_new)
        alphas.append(alpha)
        steps.append(step)
        backtracks.append(m)
        objective.append(new_ext.value)
        g_value.append(new_ext.denominator)
        if iterates is not None:
            iterates.append(x_new.copy())
        window.push(new_ext.value)
        alpha_trial = bb_initial_step(dx, grad_new - grad, lo, hi)
        x, ext, grad = x_new, new_ext, grad_new
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
            "mode": "pgsa_ml" if cfg.N == 0 else "pgsa_nl",
            "a": cfg.a,
            "eta": cfg.eta,
            "N": cfg.N,
            "alpha_lower": lo,
            "alpha_upper": hi,
            "alpha0": alpha_seed,
            "step_tol": step_tol,
            "relative_tol": cfg.relative_tol,
            "lipschitz": problem.lipschitz_grad_h,
            "f_is_convex": problem.f_is_convex,
            "g_sup_bound": problem.g_sup_bound,
        },
        backtracks=np.asarray(backtracks, dtype=int),
        iterates=np.asarray(iterates) if iterates is not None else None,
    )
