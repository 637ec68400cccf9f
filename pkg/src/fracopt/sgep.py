"""Sparse generalized eigenvalue problem as a ratio objective.

Given symmetric PSD matrices A and B, minimize x.T B x / x.T A x over unit
vectors with at most r nonzeros.  In the ratio template this is

    f = indicator of C = {||x||_0 <= r, ||x||_2 = 1},
    h(x) = 0.5 * x.T B x,   g(x) = 0.5 * x.T A x,

so the halving cancels and the objective equals the raw ratio.  The prox of f
is Euclidean projection onto C: keep the r largest magnitudes, zero the rest,
normalize.  The standing assumptions additionally require every r x r
principal submatrix of B to be positive definite, which construction checks
on a sample of supports.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateInputError,
    DomainError,
    InvalidProblemError,
    SizeGuardError,
)
from .linalg import check_symmetric, power_iteration_norm
from .problem import DOMAIN_EPS_BASE, FractionalProblem
from .rand import as_generator, philox_generator

# Relative floor on the smallest eigenvalue for the PSD construction check.
PSD_EIG_FLOOR = -1e-10
# Entries larger than this fraction of ||x||_inf count as support members.
SUPPORT_REL_THRESHOLD = 1e-12
# Hard limits for the exhaustive-optimum routine.
BRUTE_FORCE_MAX_N = 16
BRUTE_FORCE_MAX_R = 4
# Number of random supports sampled for the submatrix PD check.
SUBMATRIX_CHECK_SAMPLES = 50
# Tolerance on | ||x||_2 - 1 | for membership in the constraint set.
UNIT_NORM_TOL = 1e-9


def matrix_two_norm(matrix: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric PSD matrix.

    Power iteration from a deterministic start vector; raises
    ConvergenceError past the iteration cap instead of returning a stale
    estimate.
    """
    m = np.asarray(matrix, dtype=float)
    check_symmetric(m, "matrix")
    return power_iteration_norm(lambda v: m @ v, m.shape[0])


def project_sparse_sphere(x: np.ndarray, r: int) -> np.ndarray:
    """Euclidean projection onto {||y||_0 <= r, ||y||_2 = 1}.

    Keeps the r largest magnitudes (ties broken toward lower indices), zeros
    the rest and rescales to unit norm.  The projection is undefined at the
    origin, so a vector with norm at or below 1e-14 raises
    DegenerateInputError.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("expected a 1-D vector")
    n = x.shape[0]
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= {n}, got r = {r}")
    if float(np.linalg.norm(x)) <= DOMAIN_EPS_BASE:
        raise DegenerateInputError("projection onto the sparse sphere is undefined at 0")
    # Stable sort keeps the original order among equal magnitudes, which is
    # exactly the lower-index tie-break.
    keep = np.argsort(-np.abs(x), kind="stable")[:r]
    y = np.zeros_like(x)
    y[keep] = x[keep]
    return y / np.linalg.norm(y)


@dataclass(frozen=True, eq=False)
class SgepProblem(FractionalProblem):
    """Ratio-structured sparse generalized eigenvalue instance.

    Construction validates symmetry (1e-12 relative), positive
    semidefiniteness (smallest eigenvalue no lower than -1e-10 relative to
    the largest) and positive definiteness of B on min(50, C(n, r)) supports
    of size r, exhaustively when that enumeration is small enough.  The
    gradient Lipschitz constant L = lambda_max(B) and the denominator bound
    M = lambda_max(A) / 2 are estimated once here and cached.
    """

    matrix_a: np.ndarray
    matrix_b: np.ndarray
    sparsity: int
    _lipschitz: float = field(init=False, repr=False)
    _g_bound: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        a = np.asarray(self.matrix_a, dtype=float)
        b = np.asarray(self.matrix_b, dtype=float)
        try:
            check_symmetric(a, "A")
            check_symmetric(b, "B")
        except ValueError as exc:
            raise InvalidProblemError(str(exc)) from exc
        if a.shape != b.shape:
            raise InvalidProblemError(f"A has shape {a.shape}, B has shape {b.shape}")
        n = a.shape[0]
        if not 1 <= self.sparsity <= n:
            raise InvalidProblemError(f"need 1 <= r <= {n}, got r = {self.sparsity}")
        for name, m in (("A", a), ("B", b)):
            eigs = np.linalg.eigvalsh(m)
            floor = PSD_EIG_FLOOR * max(1.0, float(eigs[-1]))
            if float(eigs[0]) < floor:
                raise InvalidProblemError(
                    f"{name} is not PSD: smallest eigenvalue {eigs[0]:.3e}"
                )
        self._check_submatrices(b, n)
        object.__setattr__(self, "matrix_a", a)
        object.__setattr__(self, "matrix_b", b)
        object.__setattr__(self, "_lipschitz", matrix_two_norm(b))
        object.__setattr__(self, "_g_bound", 0.5 * matrix_two_norm(a))

    def _check_submatrices(self, b: np.ndarray, n: int) -> None:
        r = self.sparsity
        total = math.comb(n, r)
        if total <= SUBMATRIX_CHECK_SAMPLES:
            supports = itertools.combinations(range(n), r)
        else:
            rng = philox_generator(0)
            supports = (
                tuple(np.sort(rng.choice(n, size=r, replace=False)))
                for _ in range(SUBMATRIX_CHECK_SAMPLES)
            )
        for support in supports:
            idx = np.asarray(support)
            sub = b[np.ix_(idx, idx)]
            if float(np.linalg.eigvalsh(sub)[0]) <= 0.0:
                raise InvalidProblemError(
                    f"B restricted to support {tuple(int(i) for i in idx)} "
                    "is not positive definite"
                )

    @property
    def dim(self) -> int:
        return self.matrix_a.shape[0]

    def eval_f(self, x: np.ndarray) -> float:
        if np.count_nonzero(x) > self.sparsity:
            return math.inf
        if abs(float(np.linalg.norm(x)) - 1.0) > UNIT_NORM_TOL:
            return math.inf
        return 0.0

    def eval_h(self, x: np.ndarray) -> float:
        return 0.5 * float(x @ (self.matrix_b @ x))

    def grad_h(self, x: np.ndarray) -> np.ndarray:
        return self.matrix_b @ x

    def eval_g(self, x: np.ndarray) -> float:
        return 0.5 * float(x @ (self.matrix_a @ x))

    def subgrad_g(self, x: np.ndarray) -> np.ndarray:
        return self.matrix_a @ x

    def prox_f(self, alpha: float, z: np.ndarray) -> np.ndarray:
        # The prox of an indicator is the projection, whatever alpha is.
        return project_sparse_sphere(z, self.sparsity)

    @property
    def lipschitz_grad_h(self) -> float:
        return self._lipschitz

    @property
    def g_sup_bound(self) -> float:
        return self._g_bound

    def ratio_value(self, x: np.ndarray) -> float:
        """x.T B x / x.T A x, without the (cancelling) halving."""
        den = float(x @ (self.matrix_a @ x))
        num = float(x @ (self.matrix_b @ x))
        if den <= DOMAIN_EPS_BASE * (1.0 + abs(num)):
            raise DomainError("denominator energy x.T A x vanishes at this point")
        return num / den

    def critical_residual(self, x: np.ndarray) -> float:
        return sgep_critical_residual(self, x)


def sgep_critical_residual(problem: SgepProblem, x: np.ndarray) -> float:
    """Distance-to-criticality measure for the sparse eigenvalue problem.

    With G(x) the ratio value and support taken as the entries above
    1e-12 * ||x||_inf, a critical point satisfies

        ||B x - G(x) A x||_2 = 0                 when the support is smaller
                                                 than r (the full-space test),
        ||B_S x_S - G(x) A_S x_S||_2 = 0         when it has exactly r entries
                                                 (restricted to the support S).

    Entries within a factor 10 of the support threshold make the
    classification ambiguous; in that case both applicable residuals are
    computed and the larger one is returned, so a small result never hinges
    on the thresholding.
    """
    a = problem.matrix_a
    b = problem.matrix_b
    r = problem.sparsity
    x = np.asarray(x, dtype=float)
    if x.shape[0] != problem.dim:
        raise DomainError(f"x has length {x.shape[0]}, problem dimension is {problem.dim}")
    if abs(float(np.linalg.norm(x)) - 1.0) > 1e-8:
        raise DomainError("x must lie on the unit sphere")
    magnitude = np.abs(x)
    threshold = SUPPORT_REL_THRESHOLD * float(magnitude.max())
    support = magnitude > threshold
    if int(support.sum()) > r:
        raise DomainError(f"x has {int(support.sum())} active entries, more than r = {r}")
    ratio = problem.ratio_value(x)

    def residual_for(mask: np.ndarray) -> float:
        if int(mask.sum()) == r:
            idx = np.flatnonzero(mask)
            xs = x[idx]
            vec = b[np.ix_(idx, idx)] @ xs - ratio * (a[np.ix_(idx, idx)] @ xs)
        else:
            vec = b @ x - ratio * (a @ x)
        return float(np.linalg.norm(vec))

    result = residual_for(support)
    borderline = (magnitude > threshold) & (magnitude <= 10.0 * threshold)
    if borderline.any():
        strict = magnitude > 10.0 * threshold
        if int(strict.sum()) != int(support.sum()):
            result = max(result, residual_for(strict))
    return result


def sgep_default_init(n: int, r: int) -> np.ndarray:
    """Canonical feasible start: first r coordinates equal to 1/sqrt(r)."""
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= {n}, got r = {r}")
    x = np.zeros(n)
    x[:r] = 1.0 / math.sqrt(r)
    return x


@dataclass(frozen=True)
class SfdaRecipe:
    """Synthetic two-class discriminant-analysis instance description.

    Class 1 is centered Gaussian; class 2 shares the covariance and shifts
    coordinates 2, 4, ..., 40 (1-based) by ``mean_shift``.  The covariance is
    block diagonal with five equal Toeplitz blocks whose (i, j) entry is
    ``toeplitz_rho ** |i - j|``, so n must be divisible by 5.

    ``within_ridge`` is added to the diagonal of the within-class scatter
    when the instance is assembled by :func:`gen_sfda`.  The raw within-class
    scatter of a two-class Gaussian sample is positive semidefinite but
    typically has near-null directions that a sparse minimizer exploits; the
    ridge makes the numerator matrix positive definite and is part of the
    benchmark protocol (reference objective values assume it).  Set it to 0.0
    to study the raw scatter pair.
    """

    n: int
    p1: int
    p2: int
    r: int
    mean_shift: float = 0.5
    toeplitz_rho: float = 0.8
    within_ridge: float = 0.5
    seed: int | np.random.Generator = 0

    def __post_init__(self) -> None:
        if self.n < 5 or self.n % 5 != 0:
            raise InvalidProblemError(f"n must be a positive multiple of 5, got {self.n}")
        if self.p1 <= 0 or self.p2 <= 0:
            raise InvalidProblemError("both class sizes must be positive")
        if not 1 <= self.r <= self.n:
            raise InvalidProblemError(f"need 1 <= r <= {self.n}, got r = {self.r}")
        if not 0.0 <= self.toeplitz_rho < 1.0:
            raise InvalidProblemError("toeplitz_rho must lie in [0, 1)")
        if self.within_ridge < 0.0:
            raise InvalidProblemError("within_ridge must be nonnegative")

    @property
    def p(self) -> int:
        return self.p1 + self.p2

    def class2_mean(self) -> np.ndarray:
        mean = np.zeros(self.n)
        mean[1 : min(40, self.n) : 2] = self.mean_shift
        return mean


def gen_sfda_dataset(recipe: SfdaRecipe) -> tuple[np.ndarray, np.ndarray]:
    """Draw the two Gaussian classes; returns (p1, n) and (p2, n) arrays."""
    rng = as_generator(recipe.seed)
    block = recipe.n // 5
    cov = recipe.toeplitz_rho ** np.abs(np.subtract.outer(np.arange(block), np.arange(block)))
    chol = np.linalg.cholesky(cov)
    samples = rng.standard_normal((recipe.p, recipe.n))
    for start in range(0, recipe.n, block):
        samples[:, start : start + block] = samples[:, start : start + block] @ chol.T
    class1 = samples[: recipe.p1]
    class2 = samples[recipe.p1 :] + recipe.class2_mean()
    return class1, class2


def scatter_matrices(class1: np.ndarray, class2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Between-class and within-class scatter of a two-class sample.

    Both are divided by the total sample count; the between-class scatter is
    built from the raw class means (no global centering):

        between = (p1 * m1 m1.T + p2 * m2 m2.T) / p
        within  = (sum_i (z1_i - m1)(z1_i - m1).T
                   + sum_i (z2_i - m2)(z2_i - m2).T) / p

    Results are symmetrized by averaging with their transpose.
    """
    z1 = np.asarray(class1, dtype=float)
    z2 = np.asarray(class2, dtype=float)
    if z1.ndim != 2 or z2.ndim != 2 or z1.shape[1] != z2.shape[1]:
        raise DegenerateInputError("class samples must be 2-D with matching width")
    if z1.shape[0] == 0 or z2.shape[0] == 0:
        raise DegenerateInputError("each class needs at least one sample")
    p = z1.shape[0] + z2.shape[0]
    m1 = z1.mean(axis=0)
    m2 = z2.mean(axis=0)
    between = (z1.shape[0] * np.outer(m1, m1) + z2.shape[0] * np.outer(m2, m2)) / p
    c1 = z1 - m1
    c2 = z2 - m2
    within = (c1.T @ c1 + c2.T @ c2) / p
    return 0.5 * (between + between.T), 0.5 * (within + within.T)


def gen_sfda(recipe: SfdaRecipe) -> SgepProblem:
    """Generate a discriminant-analysis instance as an SgepProblem.

    The between-class scatter is the denominator matrix A and the
    within-class scatter plus ``within_ridge`` times the identity is the
    numerator matrix B, so small objective values mean directions that
    separate the classes well relative to their spread.
    """
    class1, class2 = gen_sfda_dataset(recipe)
    between, within = scatter_matrices(class1, class2)
    if recipe.within_ridge > 0.0:
        within = within + recipe.within_ridge * np.eye(recipe.n)
    return SgepProblem(matrix_a=between, matrix_b=within, sparsity=recipe.r)


def sgep_brute_force_optimum(
    a: np.ndarray, b: np.ndarray, r: int
) -> tuple[float, np.ndarray]:
    """Global optimum by support enumeration; only for tiny instances.

    For every support S with |S| <= r the restricted problem is a generalized
    eigenvalue computation: with B_S positive definite,

        min over span(S) of x.T B x / x.T A x  =  1 / lambda_max(W),
        W = B_S^{-1/2} A_S B_S^{-1/2},

    and supports on which the A-energy vanishes (lambda_max(W) = 0) admit no
    feasible point, so they are skipped.  Guarded to n <= 16 and r <= 4; the
    enumeration is exponential and this routine exists as ground truth for
    tests, not as a solver.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise InvalidProblemError("A and B must be square with identical shapes")
    n = a.shape[0]
    if not 1 <= r <= n:
        raise InvalidProblemError(f"need 1 <= r <= {n}, got r = {r}")
    if n > BRUTE_FORCE_MAX_N or r > BRUTE_FORCE_MAX_R:
        raise SizeGuardError(
            f"refusing exhaustive enumeration for n = {n}, r = {r} "
            f"(limits: n <= {BRUTE_FORCE_MAX_N}, r <= {BRUTE_FORCE_MAX_R})"
        )
    best_value = math.inf
    best_point: np.ndarray | None = None
    for size in range(1, r + 1):
        for support in itertools.combinations(range(n), size):
            idx = np.asarray(support)
            sub_b = b[np.ix_(idx, idx)]
            eigvals_b, eigvecs_b = np.linalg.eigh(sub_b)
            if float(eigvals_b[0]) <= 0.0:
                raise InvalidProblemError(
                    f"B restricted to support {support} is not positive definite"
                )
            inv_half = (eigvecs_b / np.sqrt(eigvals_b)) @ eigvecs_b.T
            reduced = inv_half @ a[np.ix_(idx, idx)] @ inv_half
            eigvals_w, eigvecs_w = np.linalg.eigh(reduced)
            top = float(eigvals_w[-1])
            if top <= 0.0:
                continue  # A-energy is zero on this support
            value = 1.0 / top
            if value < best_value:
                direction = inv_half @ eigvecs_w[:, -1]
                point = np.zeros(n)
                point[idx] = direction / np.linalg.norm(direction)
                best_value = value
                best_point = point
    if best_point is None:
        raise DegenerateInputError("the A-energy vanishes on every support")
    return best_value, best_point
