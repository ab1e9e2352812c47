"""Inexact Newton method with feasible inexact projections.

Solves ``f(x) = 0`` subject to ``x`` in a closed convex set ``C``.  Each
step solves the Newton system only approximately (LSQR to a relative
residual ``eta_k``) and replaces the Euclidean projection onto ``C`` by a
conditional-gradient point certified up to a tolerance ``theta_k``.
"""

from .cave import CaveInstance, GenerationError, generate, start_point
from .linalg import CsrMatrix, SingularMatrixError, sigma_extremes
from .linsolve import LinearSolveResult, LsqrBreakdown, lsqr_solve
from .newton import (
    ConstrainedProblem,
    ForcingSchedule,
    IterationRecord,
    OrderEstimate,
    SolverConfig,
    SolveTrace,
    estimate_order,
    eta_upper_bound,
    solve,
)
from .projection import ProjectionCertificate, condg_project, exact_as_inexact, verify_certificate
from .sets import Ball, BudgetSimplex, Box, CapabilityError, FeasibleSet

__version__ = "0.1.0"

__all__ = [
    "Ball", "Box", "BudgetSimplex", "CapabilityError", "CaveInstance", "ConstrainedProblem",
    "CsrMatrix", "FeasibleSet", "ForcingSchedule", "GenerationError", "IterationRecord",
    "LinearSolveResult", "LsqrBreakdown", "OrderEstimate", "ProjectionCertificate",
    "SingularMatrixError", "SolveTrace", "SolverConfig", "condg_project", "estimate_order",
    "eta_upper_bound", "exact_as_inexact", "generate", "lsqr_solve", "sigma_extremes", "solve",
    "start_point", "verify_certificate",
]
