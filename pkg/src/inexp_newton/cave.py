"""Constrained absolute value equations ``A x - |x| = b`` over a budget simplex.

Random instances are planted: a solution ``x_star`` with entries in
``(0.1, 300)`` is drawn first and ``b`` and the budget ``d = sum(x_star)``
are derived from it, so ``x_star`` sits on the face ``sum(x) = d``.  ``A``
is rescaled so that ``sigma_min(A) > 3``; then every element
``A - diag(sgn x)`` of the generalized Jacobian has ``sigma_min >= 2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .linalg import CsrMatrix, matvec, read_matrix_market, sigma_extremes, write_matrix_market
from .sets import BudgetSimplex

X_STAR_LOW, X_STAR_HIGH = 0.1, 300.0
TARGET_SIGMA_MIN = 3.0
MAX_RETRIES = 10
MIN_SIGMA_A0 = 1e-10


class GenerationError(RuntimeError):
    pass


def sgn(x) -> np.ndarray:
    """Componentwise sign with ``sgn(0) = 0``."""
    return np.sign(np.asarray(x, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class CaveInstance:
    A: CsrMatrix
    b: np.ndarray
    d: float
    x_star: np.ndarray
    seed: int = 0
    density: float = 1.0

    @property
    def n(self) -> int:
        return self.A.n_rows

    # ConstrainedProblem interface
    @property
    def dimension(self) -> int:
        return self.n

    @cached_property
    def feasible_set(self) -> BudgetSimplex:
        return BudgetSimplex(self.n, self.d)

    @property
    def known_solution(self) -> np.ndarray:
        return self.x_star

    def eval_f(self, x) -> np.ndarray:
        return residual(self, x)

    def clarke_element(self, x) -> CsrMatrix:
        return clarke_element(self, x)

    @cached_property
    def sigma(self):
        return sigma_extremes(self.A)

    @property
    def gamma(self) -> float:
        """Lipschitz constant ``||A|| + 1`` of the residual map (spectral norm)."""
        return self.sigma.sigma_max + 1.0

    def save(self, prefix) -> tuple[Path, Path]:
        """Write ``<prefix>.mtx`` and the ``<prefix>.json`` sidecar."""
        prefix = Path(prefix)
        mtx, meta = prefix.with_suffix(".mtx"), prefix.with_suffix(".json")
        write_matrix_market(mtx, self.A)
        sidecar = {
            "n": self.n,
            "seed": self.seed,
            "density": self.density,
            "d": self.d,
            "b": self.b.tolist(),
            "x_star": self.x_star.tolist(),
            "matrix": mtx.name,
        }
        meta.write_text(json.dumps(sidecar, indent=1) + "\n")
        return mtx, meta

    @classmethod
    def load(cls, path) -> CaveInstance:
        """Load from the JSON sidecar (or its prefix / ``.mtx`` path)."""
        path = Path(path)
        meta = path if path.suffix == ".json" else path.with_suffix(".json")
        data = json.loads(meta.read_text())
        A = read_matrix_market(meta.parent / data.get("matrix", meta.with_suffix(".mtx").name))
        inst = cls(A, np.asarray(data["b"], dtype=float), float(data["d"]),
                   np.asarray(data["x_star"], dtype=float), int(data.get("seed", 0)),
                   float(data.get("density", 1.0)))
        if A.shape != (inst.b.size, inst.b.size) or inst.x_star.size != inst.b.size:
            raise ValueError("instance files have inconsistent dimensions")
        return inst


def residual(inst: CaveInstance, x) -> np.ndarray:
    """``A x - |x| - b``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.n,):
        raise ValueError(f"dimension mismatch: expected {inst.n}, got {x.shape}")
    return matvec(inst.A, x) - np.abs(x) - inst.b


def clarke_element(inst: CaveInstance, x) -> CsrMatrix:
    """``A - diag(sgn x)``."""
    return inst.A.add_diagonal(-sgn(x))


def start_point(inst: CaveInstance) -> np.ndarray:
    return np.full(inst.n, inst.d / (2 * inst.n))


def rotated_spectrum_matrix(singular_values, density: float, rng) -> CsrMatrix:
    """Sparse square matrix with exactly the given singular values.

    Starts from ``diag(singular_values)`` and applies random plane rotations,
    alternating between row pairs and column pairs, until the number of
    stored entries reaches ``density * n**2``.  Orthogonal factors leave the
    singular values unchanged (up to rounding).
    """
    sv = np.asarray(singular_values, dtype=np.float64)
    n = sv.size
    rows = [{i: float(sv[i])} for i in range(n)]
    cols = [{i} for i in range(n)]
    nnz, target = n, int(round(density * n * n))
    left = True
    while nnz < target:
        p, q = rng.choice(n, size=2, replace=False)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        c, s = math.cos(angle), math.sin(angle)
        if left:
            for j in set(rows[p]) | set(rows[q]):
                a, b = rows[p].get(j, 0.0), rows[q].get(j, 0.0)
                for r in (p, q):
                    if j not in rows[r]:
                        nnz += 1
                        cols[j].add(r)
                rows[p][j], rows[q][j] = c * a - s * b, s * a + c * b
        else:
            for r in cols[p] | cols[q]:
                a, b = rows[r].get(p, 0.0), rows[r].get(q, 0.0)
                for j in (p, q):
                    if j not in rows[r]:
                        nnz += 1
                        cols[j].add(r)
                rows[r][p], rows[r][q] = c * a - s * b, s * a + c * b
        left = not left
    ii = np.fromiter((i for i in range(n) for _ in rows[i]), dtype=np.int64, count=nnz)
    jj = np.fromiter((j for i in range(n) for j in rows[i]), dtype=np.int64, count=nnz)
    vv = np.fromiter((v for i in range(n) for v in rows[i].values()), dtype=np.float64, count=nnz)
    return CsrMatrix.from_scipy(sp.coo_matrix((vv, (ii, jj)), shape=(n, n)))


def generate(n: int, density: float, seed: int) -> CaveInstance:
    """Draw a planted random instance; deterministic in ``(n, density, seed)``.

    Singular values are drawn uniformly on ``(0, 1)`` and rescaled by
    ``3 / (min(sv) * u)`` with ``u`` uniform on ``(0, 1)``, so that
    ``sigma_min(A) = 3 / u > 3``.  ``A`` is then synthesized with that
    spectrum by :func:`rotated_spectrum_matrix`.

    Per attempt ``a`` the stream ``default_rng([seed, a])`` is consumed in a
    fixed order: singular values, ``u``, ``x_star``, rotations.  An attempt is
    redrawn when ``min(sv) < 1e-10``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    if n * density < 1:
        raise ValueError("density too low: fewer than one expected nonzero per row")
    for attempt in range(MAX_RETRIES + 1):
        rng = np.random.default_rng([seed, attempt])
        sv = rng.uniform(0.0, 1.0, size=n)
        u = rng.uniform(0.0, 1.0)
        x_star = rng.uniform(X_STAR_LOW, X_STAR_HIGH, size=n)
        smin = float(sv.min())
        if not smin >= MIN_SIGMA_A0 or u == 0.0:
            continue
        A = rotated_spectrum_matrix(sv * (TARGET_SIGMA_MIN / (smin * u)), density, rng)
        b = matvec(A, x_star) - np.abs(x_star)
        d = math.fsum(x_star)
        return CaveInstance(A, b, d, x_star, seed, density)
    raise GenerationError(f"no usable spectrum after {MAX_RETRIES} retries (seed={seed})")
