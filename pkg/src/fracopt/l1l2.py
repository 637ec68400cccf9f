"""Box-constrained sparse recovery with an l1-over-l2 ratio objective.

The model is

    minimize  (lam * ||x||_1 + ind_box(x) + 0.5 * ||A x - b||_2^2) / ||x||_2

in the ratio template f = lam * ||.||_1 + indicator of [lower, upper],
h = 0.5 * ||A x - b||^2 and g = ||.||_2.  f is convex, so the solvers may use
steps up to 2/L with L = ||A||_2^2.  Soft-thresholding followed by clipping is
the exact prox of f whenever the box contains 0, which construction enforces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateInputError, DomainError, InvalidProblemError
from .linalg import power_iteration_norm
from .problem import DOMAIN_EPS_BASE, FractionalProblem
from .rand import as_generator

# ||x||_2 at or below this counts as the origin for the l2 subgradient.
ZERO_NORM_EPS = 1e-14
# Tolerance for box membership and active-bound classification.
BOX_TOL = 1e-12
INITIALIZER_ITERATIONS = 2000
INITIALIZER_PENALTY_SCALE = 1e-6


def prox_l1_box(
    z: np.ndarray, threshold: float, lower: np.ndarray, upper: np.ndarray
) -> np.ndarray:
    """Soft-threshold by ``threshold``, then clip into [lower, upper].

    This is the exact prox of threshold * ||.||_1 + indicator of the box
    whenever the box contains the origin componentwise (clipping commutes
    with shrinkage toward an interior zero).  Outside that regime it is still
    the shrink-then-clip map, just not a prox.
    """
    z = np.asarray(z, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), z.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), z.shape)
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    if np.any(lower > upper):
        raise InvalidProblemError("box is empty: lower > upper somewhere")
    shrunk = np.sign(z) * np.maximum(np.abs(z) - threshold, 0.0)
    return np.clip(shrunk, lower, upper)


def l2_subgradient(x: np.ndarray) -> np.ndarray:
    """x / ||x||_2 away from the origin, 0 at the origin.

    0 is a valid subgradient of the l2 norm at 0 (the norm's subdifferential
    there is the whole unit ball).
    """
    x = np.asarray(x, dtype=float)
    norm = float(np.linalg.norm(x))
    if norm <= ZERO_NORM_EPS:
        return np.zeros_like(x)
    return x / norm


@dataclass(frozen=True, eq=False)
class L1L2PenaltyProblem(FractionalProblem):
    """Ratio-structured sparse recovery instance.

    Construction requires a nonempty box containing the origin (otherwise the
    shrink-then-clip prox would be inexact) and a positive penalty weight.
    L = ||A||_2^2 is estimated by power iteration on v -> A.T (A v), never
    forming the normal matrix.
    """

    sensing: np.ndarray
    observation: np.ndarray
    lam: float
    lower: np.ndarray
    upper: np.ndarray
    _lipschitz: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        a = np.asarray(self.sensing, dtype=float)
        b = np.asarray(self.observation, dtype=float)
        if a.ndim != 2:
            raise InvalidProblemError("sensing matrix must be 2-D")
        if b.ndim != 1 or b.shape[0] != a.shape[0]:
            raise InvalidProblemError(
                f"observation has length {b.shape}, expected ({a.shape[0]},)"
            )
        if self.lam <= 0:
            raise InvalidProblemError("penalty weight lam must be positive")
        n = a.shape[1]
        lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if np.any(lower > upper):
            raise InvalidProblemError("box is empty: lower > upper somewhere")
        if np.any(lower > 0.0) or np.any(upper < 0.0):
            raise InvalidProblemError("box must contain the origin componentwise")
        object.__setattr__(self, "sensing", a)
        object.__setattr__(self, "observation", b)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        lipschitz = power_iteration_norm(lambda v: a.T @ (a @ v), n)
        if lipschitz <= 0:
            raise InvalidProblemError("sensing matrix is zero")
        object.__setattr__(self, "_lipschitz", lipschitz)

    @property
    def dim(self) -> int:
        return self.sensing.shape[1]

    def eval_f(self, x: np.ndarray) -> float:
        tol = BOX_TOL * (1.0 + float(np.max(np.abs(self.upper) + np.abs(self.lower))))
        if np.any(x < self.lower - tol) or np.any(x > self.upper + tol):
            return math.inf
        return self.lam * float(np.abs(x).sum())

    def eval_h(self, x: np.ndarray) -> float:
        residual = self.sensing @ x - self.observation
        return 0.5 * float(residual @ residual)

    def grad_h(self, x: np.ndarray) -> np.ndarray:
        return self.sensing.T @ (self.sensing @ x - self.observation)

    def eval_g(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(x))

    def subgrad_g(self, x: np.ndarray) -> np.ndarray:
        return l2_subgradient(x)

    def prox_f(self, alpha: float, z: np.ndarray) -> np.ndarray:
        return prox_l1_box(z, alpha * self.lam, self.lower, self.upper)

    @property
    def lipschitz_grad_h(self) -> float:
        return self._lipschitz

    @property
    def f_is_convex(self) -> bool:
        return True

    @property
    def g_sup_bound(self) -> float:
        # The denominator over the whole box never exceeds the norm of the
        # componentwise larger bound magnitude.
        return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))

    def critical_residual(self, x: np.ndarray) -> float:
        return l1l2_critical_residual(self, x)


def l1l2_critical_residual(problem: L1L2PenaltyProblem, x: np.ndarray) -> float:
    """Componentwise distance to the criticality condition, as an l2 norm.

    At a critical point the vector u = F(x) * x / ||x|| - grad_h(x) belongs to
    the subdifferential of f, which splits per coordinate into

        lam * sign(x_j)        plus  {0}         strictly inside the box,
        lam * sign(x_j)        plus  [0, +inf)   at the upper bound,
        lam * sign(x_j)        plus  (-inf, 0]   at the lower bound,
        [-lam, lam]            (at x_j = 0, interior)

    with the obvious combinations when 0 sits on a bound.  Each coordinate
    contributes its distance from u_j to the allowed interval; the residual is
    the l2 norm of those distances.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != problem.dim:
        raise DomainError(f"x has length {x.shape[0]}, problem dimension is {problem.dim}")
    norm = float(np.linalg.norm(x))
    num = problem.eval_f(x)
    if not math.isfinite(num) or norm <= DOMAIN_EPS_BASE * (1.0 + num):
        raise DomainError("criticality residual requested outside dom(F)")
    ratio = (num + problem.eval_h(x)) / norm
    u = ratio * (x / norm) - problem.grad_h(x)

    lam = problem.lam
    tol = BOX_TOL * (1.0 + float(np.max(np.abs(problem.upper) + np.abs(problem.lower))))
    at_lower = x <= problem.lower + tol
    at_upper = x >= problem.upper - tol
    positive = x > tol
    negative = x < -tol

    # Allowed interval [lo_j, hi_j] for u_j, coordinate by coordinate.
    lo = np.where(positive, lam, -lam)
    hi = np.where(negative, -lam, lam)
    lo = np.where(at_lower, -np.inf, lo)
    hi = np.where(at_upper, np.inf, hi)
    gaps = np.maximum(lo - u, 0.0) + np.maximum(u - hi, 0.0)
    return float(np.linalg.norm(gaps))


def gen_dct_matrix(
    m: int, n: int, coherence: float, seed: int | np.random.Generator
) -> np.ndarray:
    """Random oversampled cosine sensing matrix, shape (m, n).

    Column j (1-based) is cos(2 pi w j / coherence) / sqrt(m) with w drawn
    once, uniformly from [0, 1]^m.  Larger ``coherence`` makes neighbouring
    columns nearly parallel, which is what stresses sparse recovery.
    """
    if m <= 0 or n <= 0:
        raise ValueError("matrix dimensions must be positive")
    if coherence <= 0:
        raise ValueError("coherence parameter must be positive")
    rng = as_generator(seed)
    w = rng.uniform(0.0, 1.0, size=m)
    cols = np.arange(1, n + 1, dtype=float)
    return np.cos(2.0 * np.pi * np.outer(w, cols) / coherence) / math.sqrt(m)


def gen_ground_truth(n: int, k: int, seed: int | np.random.Generator) -> np.ndarray:
    """Unit-norm vector with k Gaussian entries on a uniformly random support."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}, got k = {k}")
    rng = as_generator(seed)
    support = rng.choice(n, size=k, replace=False)
    x = np.zeros(n)
    x[support] = rng.standard_normal(k)
    norm = float(np.linalg.norm(x))
    if norm == 0.0:  # probability zero, but never divide by it
        raise DegenerateInputError("all ground-truth entries were drawn as zero")
    return x / norm


def l1_box_initializer(
    a: np.ndarray,
    b: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    iterations: int = INITIALIZER_ITERATIONS,
) -> np.ndarray:
    """Rough l1-penalized least-squares start point for the ratio solvers.

    Runs a fixed number of proximal-gradient iterations on

        mu * ||x||_1 + 0.5 * ||A x - b||^2 + ind_box(x),
        mu = 1e-6 * ||A.T b||_inf,

    from the origin with step 1 / ||A||_2^2.  The result is feasible by
    construction; a zero result raises DegenerateInputError so the caller can
    fall back to the clipped normalized correlation A.T b / ||A.T b||.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[1]
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (n,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (n,))
    correlation = a.T @ b
    mu = INITIALIZER_PENALTY_SCALE * float(np.max(np.abs(correlation)))
    lipschitz = power_iteration_norm(lambda v: a.T @ (a @ v), n)
    if lipschitz <= 0:
        raise DegenerateInputError("sensing matrix is zero")
    step = 1.0 / lipschitz
    x = np.zeros(n)
    for _ in range(iterations):
        grad = a.T @ (a @ x - b)
        x = prox_l1_box(x - step * grad, step * mu, lower, upper)
    if float(np.linalg.norm(x)) <= ZERO_NORM_EPS:
        raise DegenerateInputError("initializer collapsed to the zero vector")
    return x


def penalty_start_point(problem: L1L2PenaltyProblem) -> np.ndarray:
    """Initializer plus its documented fallback, as one call.

    Tries l1_box_initializer first; on a degenerate (zero) result falls back
    to A.T b scaled to unit norm and clipped to the box.  If the fallback is
    degenerate too (b = 0, say), there is no sensible start and the error
    propagates.
    """
    try:
        return l1_box_initializer(
            problem.sensing, problem.observation, problem.lower, problem.upper
        )
    except DegenerateInputError:
        correlation = problem.sensing.T @ problem.observation
        norm = float(np.linalg.norm(correlation))
        if norm <= ZERO_NORM_EPS:
            raise DegenerateInputError(
                "initializer and its correlation fallback are both zero"
            ) from None
        fallback = np.clip(correlation / norm, problem.lower, problem.upper)
        if float(np.linalg.norm(fallback)) <= ZERO_NORM_EPS:
            raise DegenerateInputError("correlation fallback clipped to zero") from None
        return fallback


@dataclass(frozen=True)
class RecoveryReport:
    """Outcome of one sparse-recovery trial against a known ground truth."""

    relative_error: float
    success: bool
    objective: float
    iterations: int
    wall_time_s: float


SUCCESS_REL_ERROR = 1e-3


def recovery_report(
    solution: np.ndarray,
    ground_truth: np.ndarray,
    iterations: int,
    wall_time_s: float,
) -> RecoveryReport:
    """Score a recovered vector: relative error, success flag, l1/l2 value."""
    solution = np.asarray(solution, dtype=float)
    truth = np.asarray(ground_truth, dtype=float)
    truth_norm = float(np.linalg.norm(truth))
    if truth_norm == 0.0:
        raise DegenerateInputError("ground truth is the zero vector")
    rel = float(np.linalg.norm(solution - truth)) / truth_norm
    sol_norm = float(np.linalg.norm(solution))
    objective = float(np.abs(solution).sum()) / sol_norm if sol_norm > 0 else math.inf
    return RecoveryReport(
        relative_error=rel,
        success=rel < SUCCESS_REL_ERROR,
        objective=objective,
        iterations=iterations,
        wall_time_s=wall_time_s,
    )
