"""LSQR for square sparse systems, stopped on the true relative residual.

The Newton driver needs ``||rhs - A s|| <= tol * ||rhs||`` for the square
system, which is not one of the quantities LSQR tracks in its recurrences.
The residual is therefore recomputed from scratch after every iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import CsrMatrix, matvec, matvec_transpose, norm2

#: Practical stand-in for an exact solve (``rel_tol == 0``).
EXACT_TOL = 1e-14
STAGNATION_WINDOW = 5
STAGNATION_GAIN = 1e-16


class LsqrBreakdown(ArithmeticError):
    """Bidiagonalization produced a zero vector before the tolerance was met."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


@dataclass
class LinearSolveResult:
    solution: np.ndarray
    final_relative_residual: float
    iterations: int
    satisfied: bool
    tolerance: float
    stagnated: bool = False
    history: list[float] | None = None


def _true_residual(A, rhs, x, rhs_norm):
    return norm2(rhs - matvec(A, x)) / rhs_norm


def lsqr_solve(A: CsrMatrix, rhs, rel_tol: float, max_iter: int | None = None,
               keep_history: bool = False) -> LinearSolveResult:
    """Approximately solve ``A s = rhs`` from ``s = 0`` with Paige-Saunders LSQR.

    Stops as soon as ``||rhs - A s|| / ||rhs|| <= rel_tol``.  With
    ``rel_tol < EXACT_TOL`` the target becomes ``EXACT_TOL`` and the solve also
    ends (as satisfied) once the residual stops improving by more than
    ``STAGNATION_GAIN`` over ``STAGNATION_WINDOW`` iterations.  When
    ``max_iter`` (default ``2 n``) runs out, the best iterate seen is returned
    with ``satisfied=False``.

    Raises
    ------
    LsqrBreakdown
        If a bidiagonalization vector vanishes while the residual is still
        above tolerance.  The partial result is attached to the exception.
    """
    n_rows, n_cols = A.shape
    if n_rows != n_cols:
        raise ValueError("lsqr_solve expects a square matrix")
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape != (n_rows,):
        raise ValueError("rhs has the wrong length")
    if rel_tol < 0:
        raise ValueError("rel_tol must be non-negative")
    if max_iter is None:
        max_iter = 2 * n_cols
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    beta = norm2(rhs)
    if beta == 0.0:
        raise ValueError("rhs must be nonzero")

    exact = rel_tol < EXACT_TOL
    target = EXACT_TOL if exact else rel_tol
    rhs_norm = beta

    x = np.zeros(n_cols)
    best_x, best_res = x.copy(), 1.0
    history = [1.0]

    u = rhs / beta
    v = matvec_transpose(A, u)
    alpha = norm2(v)
    if alpha == 0.0:
        res = LinearSolveResult(x, 1.0, 0, False, target, history=history if keep_history else None)
        raise LsqrBreakdown("A^T rhs vanished", res)
    v = v / alpha
    w = v.copy()
    phibar, rhobar = beta, alpha

    def finish(iters, satisfied, stagnated=False):
        return LinearSolveResult(best_x, best_res, iters, satisfied, target, stagnated,
                                 history if keep_history else None)

    for it in range(1, max_iter + 1):
        u = matvec(A, v) - alpha * u
        beta = norm2(u)
        if beta > 0.0:
            u = u / beta
            v_next = matvec_transpose(A, u) - beta * v
            alpha = norm2(v_next)
            if alpha > 0.0:
                v_next = v_next / alpha
        else:
            v_next, alpha = np.zeros_like(v), 0.0

        rho = math.hypot(rhobar, beta)
        c, s = rhobar / rho, beta / rho
        theta = s * alpha
        rhobar = -c * alpha
        phi = c * phibar
        phibar = s * phibar
        x = x + (phi / rho) * w
        w = v_next - (theta / rho) * w
        v = v_next

        res = _true_residual(A, rhs, x, rhs_norm)
        history.append(res)
        if res < best_res:
            best_x, best_res = x.copy(), res
        if best_res <= target:
            return finish(it, True)
        if exact and it > STAGNATION_WINDOW:
            if history[-1 - STAGNATION_WINDOW] - min(history[-STAGNATION_WINDOW:]) < STAGNATION_GAIN:
                return finish(it, True, stagnated=True)
        if beta == 0.0 or alpha == 0.0:
            raise LsqrBreakdown(
                f"bidiagonalization broke down at iteration {it} "
                f"with relative residual {best_res:.3e}", finish(it, False))
    return finish(max_iter, False)
