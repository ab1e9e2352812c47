"""Inexact Newton iteration with feasible inexact projections.

Each outer step takes one generalized Jacobian element ``V_k`` at ``x_k``,
solves ``V_k s = -f(x_k)`` with LSQR only to the relative residual
``eta_k``, and then brings ``y_k = x_k + s`` back into the feasible set
with a projection that is only required to satisfy the tolerance
``theta_k``.  Every iterate is feasible.

The forcing sequences decide the local rate near a regular solution:
constant ``eta_k, theta_k`` give linear convergence, sequences tending to
zero give superlinear convergence, and ``eta_k ~ ||f(x_k)||^mu`` with
``theta_k ~ ||f(x_k)||^(2 mu)`` give order ``1 + mu``.  For the linear
regime ``eta_bar`` should stay below :func:`eta_upper_bound`.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Protocol, runtime_checkable

import numpy as np

from .linalg import CsrMatrix, matvec, norm2
from .linsolve import EXACT_TOL, LsqrBreakdown, lsqr_solve
from .projection import DEFAULT_MAX_ITER, condg_project, exact_as_inexact
from .sets import MEMBERSHIP_TOL, FeasibleSet

logger = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
INNER_FAILURE = "inner_failure"
DIVERGED = "diverged"
NON_FINITE = "non_finite"

_WARNED_NO_HINTS = False


class InfeasibleStartError(ValueError):
    pass


@runtime_checkable
class ConstrainedProblem(Protocol):
    """Find ``x`` in ``feasible_set`` with ``eval_f(x) = 0``.

    ``clarke_element(x)`` returns one element of the Clarke generalized
    Jacobian at ``x`` (the Jacobian itself when ``f`` is smooth).
    ``known_solution`` may be ``None``.
    """

    @property
    def dimension(self) -> int: ...

    @property
    def feasible_set(self) -> FeasibleSet: ...

    @property
    def known_solution(self) -> np.ndarray | None: ...

    def eval_f(self, x) -> np.ndarray: ...

    def clarke_element(self, x) -> CsrMatrix: ...


def eta_upper_bound(theta_bar: float, gamma: float, lam: float) -> float:
    """Largest admissible ``eta_bar`` for a given ``theta_bar``.

    ``gamma`` is a Lipschitz constant of ``f`` near the solution and ``lam``
    bounds the norm of the inverse Jacobian elements there.
    """
    r = math.sqrt(2.0 * theta_bar)
    return (1.0 - r) / (lam * gamma * (1.0 + r))


@dataclass(frozen=True)
class ForcingSchedule:
    """Tolerances ``(eta_k, theta_k)`` for the linear solve and the projection.

    ``constant``: ``(eta_bar, theta_bar)`` at every step.
    ``vanishing``: ``(eta_bar / (k+1), theta_bar / (k+1)**2)``.
    ``residual_power``: ``(min(eta_bar ||f||^mu, eta_bar),
    min(theta_bar ||f||^(2 mu), theta_bar))``.
    """

    kind: str
    eta_bar: float
    theta_bar: float
    mu: float = 1.0

    KINDS = ("constant", "vanishing", "residual_power")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown schedule {self.kind!r}")
        if not 0.0 <= self.theta_bar < 0.5:
            raise ValueError("theta_bar must lie in [0, 1/2)")
        if not 0.0 <= self.eta_bar < 1.0:
            raise ValueError("eta_bar must lie in [0, 1)")
        if self.kind == "residual_power" and not 0.0 < self.mu <= 1.0:
            raise ValueError("mu must lie in (0, 1]")

    @classmethod
    def constant(cls, eta_bar, theta_bar):
        return cls("constant", eta_bar, theta_bar)

    @classmethod
    def vanishing(cls, eta_bar, theta_bar):
        return cls("vanishing", eta_bar, theta_bar)

    @classmethod
    def residual_power(cls, mu, eta_bar, theta_bar):
        return cls("residual_power", eta_bar, theta_bar, mu)

    def __call__(self, k: int, residual_norm: float) -> tuple[float, float]:
        if self.kind == "constant":
            return self.eta_bar, self.theta_bar
        if self.kind == "vanishing":
            return self.eta_bar / (k + 1), self.theta_bar / (k + 1) ** 2
        return (min(self.eta_bar * residual_norm ** self.mu, self.eta_bar),
                min(self.theta_bar * residual_norm ** (2 * self.mu), self.theta_bar))


@dataclass
class SolverConfig:
    schedule: ForcingSchedule
    residual_tol: float = 1e-6
    max_outer: int = 50
    max_inner_linear: int | None = None  # None -> 2 n
    max_inner_proj: int = DEFAULT_MAX_ITER
    gamma_hint: float | None = None
    lambda_hint: float | None = None
    projection_mode: str = "condg"
    condg_start: str = "retraction"
    divergence_factor: float = 1e6
    store_iterates: bool = True

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.max_outer < 1 or self.max_inner_proj < 1:
            raise ValueError("iteration caps must be at least 1")
        if self.max_inner_linear is not None and self.max_inner_linear < 1:
            raise ValueError("iteration caps must be at least 1")
        if self.projection_mode not in ("condg", "exact"):
            raise ValueError(f"unknown projection mode {self.projection_mode!r}")
        if self.gamma_hint is not None and self.lambda_hint is not None:
            bound = eta_upper_bound(self.schedule.theta_bar, self.gamma_hint, self.lambda_hint)
            if not self.schedule.eta_bar < bound:
                raise ValueError(
                    f"eta_bar={self.schedule.eta_bar:.6g} violates the admissibility bound {bound:.6g}")
        else:
            global _WARNED_NO_HINTS
            if not _WARNED_NO_HINTS:
                logger.warning("gamma/lambda hints missing; eta_bar admissibility not checked")
                _WARNED_NO_HINTS = True


@dataclass
class IterationRecord:
    k: int
    residual_norm: float
    eta_k: float = 0.0
    theta_k: float = 0.0
    inner_linear_iters: int = 0
    inner_proj_iters: int = 0
    linear_residual: float = 0.0
    linear_certificate_ok: bool = True
    projected: bool = False
    projection_certified: bool = True
    projection_gap: float = 0.0
    projection_threshold: float = 0.0
    step_norm: float = 0.0
    error_to_solution: float | None = None
    step_taken: bool = False


@dataclass
class SolveTrace:
    records: list[IterationRecord]
    status: str
    final_point: np.ndarray
    wall_time: float
    message: str = ""
    iterates: list[np.ndarray] = field(default_factory=list, repr=False)
    steps: list[np.ndarray] = field(default_factory=list, repr=False)  # LSQR solutions s_k

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def iterations(self) -> int:
        """Number of Newton steps taken."""
        return sum(r.step_taken for r in self.records)

    @property
    def final_residual(self) -> float:
        return self.records[-1].residual_norm if self.records else math.nan

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.error_to_solution for r in self.records
                         if r.error_to_solution is not None], dtype=float)

    def to_dict(self, include_iterates: bool = False) -> dict:
        out = {
            "status": self.status,
            "message": self.message,
            "iterations": self.iterations,
            "wall_time": self.wall_time,
            "final_point": self.final_point.tolist(),
            "records": [asdict(r) for r in self.records],
        }
        if include_iterates:
            out["iterates"] = [x.tolist() for x in self.iterates]
            out["steps"] = [s.tolist() for s in self.steps]
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(**kwargs), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> SolveTrace:
        return cls(
            records=[IterationRecord(**r) for r in data["records"]],
            status=data["status"],
            final_point=np.asarray(data["final_point"], dtype=float),
            wall_time=data["wall_time"],
            message=data.get("message", ""),
            iterates=[np.asarray(x, dtype=float) for x in data.get("iterates", [])],
            steps=[np.asarray(x, dtype=float) for x in data.get("steps", [])],
        )


def _linear_step(V, f, eta, cap):
    """Run LSQR, retrying once with a doubled cap if it fails to certify."""
    total = 0
    result = None
    for attempt_cap in (cap, 2 * cap):
        try:
            result = lsqr_solve(V, -f, eta, attempt_cap)
        except LsqrBreakdown as exc:
            result = exc.result
        total += result.iterations
        if result.satisfied:
            break
    return result, total


def solve(problem: ConstrainedProblem, x0, config: SolverConfig) -> SolveTrace:
    """Run the inexact Newton method with feasible inexact projections from ``x0``.

    Stops when ``||f(x_k)|| < residual_tol``, after ``max_outer`` steps, when
    the linear solve cannot be certified even after one retry, when the
    residual grows beyond ``divergence_factor`` times its initial value, or
    when ``f`` stops being finite.  Failing to certify a projection is not
    fatal: the best feasible CondG iterate is used and the record says so.
    """
    start = time.perf_counter()
    S = problem.feasible_set
    x = np.array(x0, dtype=np.float64)
    if x.shape != (problem.dimension,):
        raise ValueError("x0 has the wrong dimension")
    if not S.contains(x, MEMBERSHIP_TOL):
        raise InfeasibleStartError("starting point is not feasible")
    x_bar = problem.known_solution
    lin_cap = config.max_inner_linear or 2 * problem.dimension

    records: list[IterationRecord] = []
    iterates: list[np.ndarray] = []
    steps: list[np.ndarray] = []
    status, message = MAX_ITERATIONS, ""
    f = np.asarray(problem.eval_f(x), dtype=np.float64)
    f0_norm = norm2(f)

    for k in range(config.max_outer + 1):
        fn = norm2(f)
        rec = IterationRecord(k=k, residual_norm=fn)
        if x_bar is not None:
            rec.error_to_solution = norm2(x - x_bar)
        records.append(rec)
        if config.store_iterates:
            iterates.append(x.copy())
        if not math.isfinite(fn):
            status, message = NON_FINITE, f"f(x_{k}) is not finite"
            break
        if fn < config.residual_tol:
            status = CONVERGED
            break
        if k == config.max_outer:
            status, message = MAX_ITERATIONS, f"no convergence in {k} iterations"
            break
        if fn > config.divergence_factor * f0_norm:
            status, message = DIVERGED, f"residual {fn:.3e} exceeds {config.divergence_factor:g} x initial"
            break

        eta, theta = config.schedule(k, fn)
        rec.eta_k, rec.theta_k = eta, theta
        V = problem.clarke_element(x)
        lin, lin_iters = _linear_step(V, f, eta, lin_cap)
        rec.inner_linear_iters = lin_iters
        s = lin.solution
        if config.store_iterates:
            steps.append(s.copy())
        rec.linear_residual = norm2(f + matvec(V, s))
        rec.linear_certificate_ok = bool(
            lin.satisfied and (rec.linear_residual <= max(eta, EXACT_TOL) * fn or lin.stagnated))
        if not lin.satisfied:
            status = INNER_FAILURE
            message = (f"linear solve at k={k} reached relative residual "
                       f"{lin.final_relative_residual:.3e} > eta_k={eta:.3e}")
            break

        y = x + s
        if S.contains(y, MEMBERSHIP_TOL):
            x_new = y
        else:
            if config.projection_mode == "exact":
                x_new, cert = exact_as_inexact(S, y, x)
            else:
                x_new, cert = condg_project(S, y, x, theta, config.max_inner_proj,
                                             start=config.condg_start)
            rec.projected = True
            rec.projection_certified = cert.certified
            rec.projection_gap = cert.final_gap
            rec.projection_threshold = cert.threshold
            rec.inner_proj_iters = cert.inner_iterations
        rec.step_norm = norm2(x_new - x)
        rec.step_taken = True
        x = x_new
        f = np.asarray(problem.eval_f(x), dtype=np.float64)

    return SolveTrace(records, status, x, time.perf_counter() - start, message, iterates, steps)


class OrderEstimate(NamedTuple):
    order: float
    confidence: str  # "ok" or "insufficient_data"
    pairs_used: int


def _errors_of(trace_or_errors):
    if isinstance(trace_or_errors, SolveTrace):
        return trace_or_errors.errors
    return np.asarray(trace_or_errors, dtype=float)


def usable_errors(errors, floor: float = 1e-14, scale: float = 1.0) -> np.ndarray:
    """Leading run of errors that stay above ``floor * scale``."""
    errors = np.asarray(errors, dtype=float)
    above = errors > floor * scale
    stop = len(errors) if above.all() else int(np.argmin(above))
    return errors[:stop]


def estimate_order(trace_or_errors, floor: float = 1e-14, scale: float = 1.0) -> OrderEstimate:
    """Least-squares slope of ``log e_{k+1}`` against ``log e_k``.

    Only the leading errors above ``floor * scale`` are used.  Fewer than
    three usable pairs give ``confidence='insufficient_data'``.
    """
    e = usable_errors(_errors_of(trace_or_errors), floor, scale)
    pairs = max(len(e) - 1, 0)
    if pairs < 2:
        return OrderEstimate(math.nan, "insufficient_data", pairs)
    lx, ly = np.log(e[:-1]), np.log(e[1:])
    slope = float(np.polyfit(lx, ly, 1)[0])
    return OrderEstimate(slope, "ok" if pairs >= 3 else "insufficient_data", pairs)


def check_contraction(trace_or_errors, scale: float = 1.0) -> bool:
    """True when every error above ``100 eps * scale`` is followed by a smaller one."""
    e = _errors_of(trace_or_errors)
    floor = 100 * np.finfo(float).eps * scale
    return all(e[k + 1] < e[k] for k in range(len(e) - 1) if e[k] > floor)


def error_ratios(trace_or_errors, floor: float = 1e-14, scale: float = 1.0) -> np.ndarray:
    e = usable_errors(_errors_of(trace_or_errors), floor, scale)
    return e[1:] / e[:-1]
