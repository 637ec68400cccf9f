"""Dependency-light linear algebra helpers.

The only nontrivial routine here is a power iteration for the largest
eigenvalue of a symmetric PSD operator.  It is deliberately written against a
matvec callable so the same code serves dense matrices and implicit normal
operators (e.g. v -> A.T @ (A @ v) without ever forming A.T @ A).
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .exceptions import ConvergenceError

MAX_POWER_ITERATIONS = 5000
POWER_REL_TOL = 1e-10


def power_iteration_norm(
    matvec: Callable[[np.ndarray], np.ndarray],
    dim: int,
    rel_tol: float = POWER_REL_TOL,
    max_iter: int = MAX_POWER_ITERATIONS,
) -> float:
    """Largest eigenvalue of a symmetric PSD operator by power iteration.

    Parameters
    ----------
    matvec : callable
        Applies the operator to a 1-D array of length ``dim``.  The operator
        must be symmetric positive semidefinite; for such operators the
        Rayleigh quotient of the iterate converges to the top eigenvalue.
    dim : int
        Dimension of the operator.
    rel_tol : float
        Stop once the relative change of the Rayleigh quotient between two
        consecutive iterations drops below this value.
    max_iter : int
        Hard cap; exceeding it raises ConvergenceError rather than returning
        a silently inaccurate value.

    Returns
    -------
    float
        The estimated largest eigenvalue (0.0 for the zero operator).

    The start vector is deterministic: all ones perturbed by the coordinate
    index, which breaks symmetry without any randomness so repeated runs are
    bit-identical.
    """
    if dim <= 0:
        raise ValueError("operator dimension must be positive")
    v = 1.0 + np.arange(dim, dtype=float) / max(dim, 1)
    v /= np.linalg.norm(v)
    rayleigh = 0.0
    for _ in range(max_iter):
        w = matvec(v)
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            # v is in the kernel; for a PSD operator reached from a generic
            # start this only happens when the operator is zero.
            return 0.0
        new_rayleigh = float(v @ w)
        v = w / norm_w
        if abs(new_rayleigh - rayleigh) <= rel_tol * max(1.0, abs(new_rayleigh)):
            return new_rayleigh
        rayleigh = new_rayleigh
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(last Rayleigh quotient {rayleigh:.6e})"
    )


def symmetric_two_norm(matrix: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric PSD matrix via power_iteration_norm."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    return power_iteration_norm(lambda v: m @ v, m.shape[0])


def check_symmetric(matrix: np.ndarray, name: str, tol: float = 1e-12) -> None:
    """Raise ValueError unless matrix equals its transpose within tol (scaled)."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 0.0)
    gap = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if gap > tol * scale:
        raise ValueError(f"{name} is not symmetric: max |M - M.T| = {gap:.3e}")
