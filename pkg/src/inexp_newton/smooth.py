"""Smooth test equations with a planted root, used for convergence-rate studies.

``f(x) = A x + c * x**3 - b`` with a fixed sparse, diagonally dominant ``A``
and ``b`` chosen so that ``x_bar`` is a root.  The Jacobian
``A + 3 c diag(x**2)`` is Lipschitz, so Holder exponent ``mu = 1`` applies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import CsrMatrix, matvec
from .sets import Box, FeasibleSet


@dataclass(frozen=True, eq=False)
class CubicProblem:
    A: CsrMatrix
    b: np.ndarray
    x_bar: np.ndarray
    feasible_set: FeasibleSet
    c: float = 1.0

    @property
    def dimension(self) -> int:
        return self.x_bar.size

    @property
    def known_solution(self):
        return self.x_bar

    def eval_f(self, x):
        x = np.asarray(x, dtype=np.float64)
        return matvec(self.A, x) + self.c * x ** 3 - self.b

    def clarke_element(self, x):
        return self.A.add_diagonal(3.0 * self.c * np.asarray(x, dtype=np.float64) ** 2)


def cubic_problem(n: int = 50, seed: int = 0, active: bool = True, c: float = 1.0) -> CubicProblem:
    """Planted cubic system on a box.

    With ``active=True`` the first quarter of the root components sit on the
    upper bound of the box, so projections are exercised near the root.
    """
    rng = np.random.default_rng(seed)
    main = rng.uniform(2.0, 6.0, size=n)
    off = rng.uniform(-1.0, 1.0, size=n - 1)
    A = CsrMatrix.from_scipy(sp.diags([off, main, off[::-1]], [-1, 0, 1]))
    x_bar = rng.uniform(0.5, 1.5, size=n)
    upper = x_bar + 10.0
    lower = np.full(n, -10.0)
    if active:
        k = max(n // 4, 1)
        upper[:k] = x_bar[:k]
    b = matvec(A, x_bar) + c * x_bar ** 3
    return CubicProblem(A, b, x_bar, Box(lower, upper), c)


@dataclass(frozen=True, eq=False)
class ScalarSquare:
    """Componentwise ``f(x) = x**2 - 1`` on a box that never binds near the root."""

    n: int = 1
    bound: float = 1e6

    @property
    def dimension(self):
        return self.n

    @property
    def feasible_set(self):
        return Box(np.full(self.n, -self.bound), np.full(self.n, self.bound))

    @property
    def known_solution(self):
        return np.ones(self.n)

    def eval_f(self, x):
        return np.asarray(x, dtype=np.float64) ** 2 - 1.0

    def clarke_element(self, x):
        return CsrMatrix.diag(2.0 * np.asarray(x, dtype=np.float64))
