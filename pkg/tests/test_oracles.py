"""Sanity checks of the reference implementations themselves."""

import numpy as np
from numpy.testing import assert_allclose

from oracles import dense_lu_solve, newton_scalar_square, simplex_projection_kkt


class TestOracles:
    def test_lu_against_numpy(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((6, 6)) + 6 * np.eye(6)
        b = rng.standard_normal(6)
        assert_allclose(dense_lu_solve(A, b), np.linalg.solve(A, b), rtol=1e-12)

    def test_lu_needs_pivoting(self):
        assert_allclose(dense_lu_solve([[0.0, 1.0], [1.0, 0.0]], [2.0, 3.0]), [3.0, 2.0])

    def test_kkt_hand_cases(self):
        assert_allclose(simplex_projection_kkt([2, 2], 2), [1, 1])
        assert_allclose(simplex_projection_kkt([0.5, 0.5], 2), [0.5, 0.5])
        assert_allclose(simplex_projection_kkt([-1, -3], 2), [0, 0])
        # y = (1, 0.5, -2), d = 1: tau = 0.25 gives (0.75, 0.25, 0)
        assert_allclose(simplex_projection_kkt([1, 0.5, -2], 1), [0.75, 0.25, 0])

    def test_scalar_newton(self):
        xs = newton_scalar_square(0.5, 3)
        assert_allclose(xs, [0.5, 1.25, 1.025, 1.0003048780487804], rtol=1e-15)
