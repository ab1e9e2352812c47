"""Convergence-rate studies on problems with a known root.

Each forcing regime has an expected signature near a regular root:

* ``constant``: estimated order in ``[0.9, 1.3]`` (linear);
* ``vanishing``: the error ratios ``e_{k+1} / e_k`` over the final window
  strictly decrease (superlinear);
* ``residual_power``: estimated order at least ``1 + 0.6 mu``, so
  ``>= 1.6`` for ``mu = 1``.

Two benchmark families are provided.  ``smooth`` is the planted cubic
system on a box with active bounds, started at a small random offset from
the root.  ``cave`` is an ``n = 50`` absolute value equation on its budget
simplex, started on the segment from ``x_star`` along a random nonnegative
direction at the point where ``||f(x0)|| = 1000``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cave import CaveInstance, generate
from .linalg import matvec, norm2
from .newton import (ForcingSchedule, SolverConfig, SolveTrace, check_contraction, error_ratios,
                     estimate_order, solve)
from .smooth import CubicProblem, cubic_problem

REGIMES = ("constant", "vanishing", "residual_power")
PROBLEMS = ("smooth", "cave")

CONSTANT_ORDER_BAND = (0.9, 1.3)
POWER_ORDER_SLACK = 0.6
FINAL_WINDOW = 4

CAVE_N = 50
CAVE_DENSITY = 0.1
CAVE_START_RESIDUAL = 1e3

# (eta_bar, theta_bar) per family and regime
_SMOOTH_PARAMS = {"constant": (0.1, 0.01), "vanishing": (0.5, 0.1), "residual_power": (0.5, 0.1)}
_CAVE_PARAMS = {r: (0.1, 0.01) for r in REGIMES}


@dataclass
class RateResult:
    problem: str
    regime: str
    seed: int
    mu: float
    trace: SolveTrace
    order: float
    confidence: str
    ratios: np.ndarray
    expected: str
    passed: bool
    contracting: bool = False

    def summary(self) -> str:
        ratios = " ".join(f"{r:.3g}" for r in self.ratios)
        verdict = "pass" if self.passed else "FAIL"
        return (f"{self.problem} {self.regime} seed={self.seed}: status={self.trace.status} "
                f"steps={self.trace.iterations} order={self.order:.3f} ({self.confidence}) "
                f"expected {self.expected}: {verdict}\n  ratios: {ratios}")


def schedule_for(problem: str, regime: str, mu: float = 1.0) -> ForcingSchedule:
    eta_bar, theta_bar = (_SMOOTH_PARAMS if problem == "smooth" else _CAVE_PARAMS)[regime]
    if regime == "constant":
        return ForcingSchedule.constant(eta_bar, theta_bar)
    if regime == "vanishing":
        return ForcingSchedule.vanishing(eta_bar, theta_bar)
    return ForcingSchedule.residual_power(mu, eta_bar, theta_bar)


def smooth_setup(seed: int) -> tuple[CubicProblem, np.ndarray, float]:
    prob = cubic_problem(n=50, seed=seed, active=True)
    rng = np.random.default_rng([seed, 1])
    x0 = prob.feasible_set.repair(prob.x_bar - 0.05 * np.abs(rng.standard_normal(prob.dimension)))
    return prob, x0, 1e-10


def cave_setup(seed: int) -> tuple[CaveInstance, np.ndarray, float]:
    inst = generate(CAVE_N, CAVE_DENSITY, seed)
    rng = np.random.default_rng([seed, 1])
    direction = np.abs(rng.standard_normal(inst.n))
    direction /= norm2(direction)
    # f is affine on the positive orthant, so the offset is exact
    V = inst.clarke_element(inst.x_star)
    t = CAVE_START_RESIDUAL / norm2(matvec(V, direction))
    x0 = inst.feasible_set.repair(inst.x_star - t * direction)
    # just above the rounding floor of f near x_star
    eps = np.finfo(float).eps
    tol = 100 * eps * (inst.gamma * norm2(inst.x_star) + norm2(inst.b))
    return inst, x0, tol


def final_window_decreasing(ratios, window: int = FINAL_WINDOW) -> bool:
    """True when the last ``window`` ratios (at least three) strictly decrease."""
    ratios = np.asarray(ratios, dtype=float)
    if ratios.size < 3:
        return False
    tail = ratios[-window:]
    return bool(np.all(np.diff(tail) < 0))


def run_regime(problem: str, regime: str, seed: int = 0, mu: float = 1.0) -> RateResult:
    """Solve one benchmark under one forcing regime and check its signature."""
    if problem not in PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}")
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    if not 0 < mu <= 1:
        raise ValueError("mu must lie in (0, 1]")
    prob, x0, tol = smooth_setup(seed) if problem == "smooth" else cave_setup(seed)
    config = SolverConfig(schedule_for(problem, regime, mu), residual_tol=tol, max_outer=100)
    trace = solve(prob, x0, config)
    scale = norm2(prob.known_solution)
    est = estimate_order(trace, scale=scale)
    ratios = error_ratios(trace, scale=scale)
    ok_run = trace.converged and est.confidence == "ok"
    if regime == "constant":
        lo, hi = CONSTANT_ORDER_BAND
        expected = f"order in [{lo}, {hi}]"
        passed = ok_run and lo <= est.order <= hi
    elif regime == "vanishing":
        expected = "strictly decreasing final-window ratios"
        passed = trace.converged and final_window_decreasing(ratios)
    else:
        bound = 1.0 + POWER_ORDER_SLACK * mu
        expected = f"order >= {bound:.2f}"
        passed = ok_run and est.order >= bound
    if math.isnan(est.order):
        passed = passed and regime == "vanishing"
    return RateResult(problem, regime, seed, mu, trace, est.order, est.confidence,
                      ratios, expected, bool(passed), check_contraction(trace, scale))
