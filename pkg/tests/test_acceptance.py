"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criteria 1-3 and the first half of 7 share one batch of CAVE solves
(20 instances at n = 1000 plus 50 each at n = 50 and n = 200, both
methods), built once per session by the ``solves`` fixture.
"""

import itertools
import math
import time

import numpy as np
import pytest
import scipy.sparse as sp

from inexp_newton import bench, rates
from inexp_newton.cave import clarke_element, generate, residual, start_point
from inexp_newton.linalg import CsrMatrix
from inexp_newton.linsolve import lsqr_solve
from inexp_newton.newton import solve
from inexp_newton.projection import condg_project, exact_as_inexact, verify_certificate
from inexp_newton.sets import Ball, Box, BudgetSimplex
from oracles import dense_lu_solve, dense_sigmas, simplex_projection_kkt, vertex_sweep_gap

pytestmark = pytest.mark.acceptance

BIG_N = 1000
BIG_COUNT = 20
SMALL_NS = (50, 200)
SMALL_COUNT = 50
METHODS = ("exp", "inexp")
ITER_TARGETS = {"exp": 6.61, "inexp": 5.50}
ITER_BAND = 2.0


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} {detail}")


class Solve:
    def __init__(self, inst, method, trace, error=None):
        self.inst, self.method, self.trace, self.error = inst, method, trace, error

    @property
    def solved(self):
        return (self.trace is not None and self.trace.converged and self.trace.iterations <= 50
                and self.trace.final_residual < 1e-6)


def _run(n, count):
    out = []
    for seed in range(count):
        inst = generate(n, bench.effective_density(n, bench.DEFAULT_DENSITY), seed)
        for method in METHODS:
            try:
                config = bench.method_config(inst, bench.DEFAULT_THETAS[method], store_iterates=True)
                out.append(Solve(inst, method, solve(inst, start_point(inst), config)))
            except (ArithmeticError, ValueError, RuntimeError) as exc:
                out.append(Solve(inst, method, None, exc))
    return out


@pytest.fixture(scope="module")
def solves():
    start = time.perf_counter()
    big = _run(BIG_N, BIG_COUNT)
    big_time = time.perf_counter() - start
    small = [s for n in SMALL_NS for s in _run(n, SMALL_COUNT)]
    return {"big": big, "big_time": big_time, "all": big + small}


class TestAcceptance:
    def test_criterion_1_robustness(self, solves, capsys):
        big = solves["big"]
        pct = {m: 100.0 * np.mean([s.solved for s in big if s.method == m]) for m in METHODS}
        ok = all(p == 100.0 for p in pct.values()) and len(big) == 2 * BIG_COUNT
        report(capsys, 1, ok, f"n={BIG_N}: exp {pct['exp']:.1f}% inexp {pct['inexp']:.1f}% solved "
                              f"({solves['big_time']:.0f} s)")
        assert ok

    def test_criterion_2_iteration_counts(self, solves, capsys):
        big = solves["big"]
        mean = {m: float(np.mean([s.trace.iterations for s in big if s.method == m and s.solved]))
                for m in METHODS}
        in_band = {m: abs(mean[m] - ITER_TARGETS[m]) <= ITER_BAND for m in METHODS}
        ordered = mean["inexp"] <= mean["exp"]
        ok = all(in_band.values()) and ordered
        report(capsys, 2, ok,
               f"mean iterations exp {mean['exp']:.2f} (target {ITER_TARGETS['exp']} +/- {ITER_BAND}) "
               f"inexp {mean['inexp']:.2f} (target {ITER_TARGETS['inexp']} +/- {ITER_BAND}), "
               f"inexp <= exp: {ordered}")
        assert ok

    def test_criterion_3_feasibility(self, solves, capsys):
        runs = [s for s in solves["all"] if s.trace is not None]
        violations = checked = 0
        for s in runs:
            d = s.inst.d
            for x in s.trace.iterates:
                checked += 1
                if not (x.min() >= -1e-12 and math.fsum(x) <= d + 1e-12):
                    violations += 1
        ok = len(runs) >= 200 and violations == 0 and len(runs) == len(solves["all"])
        report(capsys, 3, ok, f"{len(runs)} solves, {checked} iterates, {violations} violations")
        assert ok

    def test_criterion_4_certificates(self, capsys):
        rng = np.random.default_rng(4)
        bad_condg = bad_exact = certified = 0
        for i in range(1000):
            n = int(rng.integers(1, 11))
            if i % 2 == 0:
                d = rng.uniform(0.5, 10.0)
                S = BudgetSimplex(n, d)
                verts = np.vstack([np.zeros(n), d * np.eye(n)])
            else:
                lo = rng.uniform(-5, 0, n)
                hi = lo + rng.uniform(0.1, 5, n)
                S = Box(lo, hi)
                verts = np.array([np.where(bits, hi, lo)
                                  for bits in itertools.product((False, True), repeat=n)])
            x = S.sample(rng, 1)[0]
            y = x + rng.uniform(0.1, 10) * rng.standard_normal(n)
            theta = rng.uniform(0, 0.49)
            slack = lambda w: 1e-12 * (1 + np.linalg.norm(y - w) * np.abs(verts - w).max())

            w, cert = condg_project(S, y, x, theta)
            if cert.certified:
                certified += 1
                bound = theta * np.sum((y - x) ** 2)
                if not (S.contains(w) and vertex_sweep_gap(verts, y, w) <= bound + slack(w)
                        and verify_certificate(S, y, x, w, theta).ok):
                    bad_condg += 1
            w, _ = exact_as_inexact(S, y, x)
            if not (vertex_sweep_gap(verts, y, w) <= slack(w) and verify_certificate(S, y, x, w, 0.0).ok):
                bad_exact += 1
        ok = bad_condg == 0 and bad_exact == 0
        report(capsys, 4, ok, f"1000 instances, {certified} certified CondG outputs, "
                              f"{bad_condg} CondG and {bad_exact} exact failures")
        assert ok

    def test_criterion_5_perturbation_bound(self, capsys):
        rng = np.random.default_rng(5)
        violations = certified = 0
        worst = -np.inf
        for i in range(1000):
            n = int(rng.integers(1, 11))
            kind = i % 3
            if kind == 0:
                S = BudgetSimplex(n, rng.uniform(0.5, 10.0))
            elif kind == 1:
                lo = rng.uniform(-5, 0, n)
                S = Box(lo, lo + rng.uniform(0.1, 5, n))
            else:
                S = Ball(rng.uniform(-2, 2, n), rng.uniform(0.5, 5))
            x = S.sample(rng, 1)[0]
            y = x + rng.uniform(0.1, 10) * rng.standard_normal(n)
            y_tilde = y + rng.uniform(0, 2) * rng.standard_normal(n)
            theta = rng.uniform(0, 0.49)
            w, cert = condg_project(S, y, x, theta)
            if not cert.certified:
                continue
            certified += 1
            p = simplex_projection_kkt(y_tilde, S.d) if kind == 0 else S.exact_project(y_tilde)
            lhs = np.linalg.norm(w - p)
            rhs = np.linalg.norm(y - y_tilde) + math.sqrt(2 * theta) * np.linalg.norm(y - x)
            worst = max(worst, lhs - rhs)
            if lhs > rhs + 1e-10:
                violations += 1
        ok = violations == 0 and certified > 0
        report(capsys, 5, ok, f"{certified} certified of 1000, {violations} violations, "
                              f"max lhs - rhs = {worst:.3e}")
        assert ok

    def test_criterion_6_rate_regimes(self, capsys):
        failures = []
        counts = {}
        for problem in rates.PROBLEMS:
            for regime in rates.REGIMES:
                passed = 0
                for seed in range(5):
                    result = rates.run_regime(problem, regime, seed, 1.0)
                    if result.passed:
                        passed += 1
                    else:
                        failures.append(f"{problem}/{regime}/seed{seed}")
                counts[f"{problem}/{regime}"] = passed
        ok = not failures
        detail = ", ".join(f"{k} {v}/5" for k, v in counts.items())
        report(capsys, 6, ok, detail + (f"; failed: {' '.join(failures)}" if failures else ""))
        assert ok

    def test_criterion_7_linear_solve(self, solves, capsys):
        checked = bad = 0
        for s in solves["all"]:
            if s.trace is None:
                continue
            inst = s.inst
            A = sp.csr_matrix((inst.A.values, inst.A.col_idx, inst.A.row_ptr), shape=inst.A.shape)
            for rec, x, step in zip(s.trace.records, s.trace.iterates, s.trace.steps):
                V = A - sp.diags(np.sign(x))
                f = A @ x - np.abs(x) - inst.b
                lhs = np.linalg.norm(f + V @ step)
                checked += 1
                if lhs > rec.eta_k * np.linalg.norm(f) + 1e-13:
                    bad += 1
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(50):
            D = rng.standard_normal((20, 20)) / np.sqrt(20) + 3.0 * np.eye(20)
            b = rng.standard_normal(20)
            res = lsqr_solve(CsrMatrix.from_dense(D), b, 1e-14)
            worst = max(worst, float(np.max(np.abs(res.solution - dense_lu_solve(D, b)))))
        ok = bad == 0 and checked > 0 and worst <= 1e-8
        report(capsys, 7, ok, f"{checked} inner solves rechecked, {bad} violations; "
                              f"LSQR vs dense LU max error {worst:.2e} on 50 systems")
        assert ok

    def test_criterion_8_generator(self, capsys):
        failures = []
        worst_v = np.inf
        for n in SMALL_NS:
            for seed in range(100):
                inst = generate(n, bench.effective_density(n, bench.DEFAULT_DENSITY), seed)
                dense = inst.A.to_dense()
                smin, _ = dense_sigmas(dense)
                res = np.linalg.norm(dense @ inst.x_star - np.abs(inst.x_star) - inst.b)
                feasible = inst.x_star.min() >= 0 and math.isclose(math.fsum(inst.x_star), inst.d,
                                                                     rel_tol=1e-14)
                rng = np.random.default_rng([seed, n])
                for _ in range(10):
                    x = rng.standard_normal(n) * (rng.random(n) > 0.1)
                    worst_v = min(worst_v, dense_sigmas(dense - np.diag(np.sign(x)))[0])
                if not (smin > 3 and res <= 1e-10 * np.linalg.norm(inst.b) and feasible):
                    failures.append(f"n={n}/seed={seed}")
        ok = not failures and worst_v >= 2 - 1e-8
        report(capsys, 8, ok, f"200 instances, {len(failures)} failures, min sigma_min(V) = {worst_v:.4f}")
        assert ok

    def test_criterion_9_projection_oracle(self, capsys):
        rng = np.random.default_rng(9)
        worst = 0.0
        for _ in range(500):
            n = int(rng.integers(1, 7))
            d = rng.uniform(0.1, 10)
            y = rng.uniform(-5, 5, n) * rng.choice([0.1, 1.0, 10.0])
            got = BudgetSimplex(n, d).exact_project(y)
            worst = max(worst, float(np.max(np.abs(got - simplex_projection_kkt(y, d)))))
        ok = worst <= 1e-8
        report(capsys, 9, ok, f"500 instances, max deviation from KKT oracle {worst:.2e}")
        assert ok


def test_residual_helper_matches_dense():
    # guards the independent residual used in criterion 7
    inst = generate(30, 0.1, 0)
    x = start_point(inst)
    dense = inst.A.to_dense()
    np.testing.assert_allclose(residual(inst, x), dense @ x - np.abs(x) - inst.b, atol=1e-9)
    np.testing.assert_allclose(clarke_element(inst, x).to_dense(), dense - np.eye(30))
