"""Closed convex feasible sets with linear minimization oracles."""

from __future__ import annotations

import itertools
import math
from abc import ABC, abstractmethod

import numpy as np

from .linalg import norm2

MEMBERSHIP_TOL = 1e-12
MAX_BOX_VERTEX_DIM = 16


class CapabilityError(NotImplementedError):
    """The set does not support the requested operation."""


class FeasibleSet(ABC):
    """A nonempty closed convex set ``C`` in ``R^n``.

    Subclasses provide membership, a linear minimization oracle and, where
    cheap, the exact Euclidean projection and a vertex list.
    """

    has_exact_projection = True
    is_polyhedral = False

    @property
    @abstractmethod
    def dimension(self) -> int: ...

    @abstractmethod
    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool: ...

    @abstractmethod
    def lmo(self, c) -> np.ndarray:
        """Return a minimizer of ``<c, z>`` over the set."""

    def exact_project(self, y) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} has no exact projection")

    def vertices(self) -> list[np.ndarray]:
        raise CapabilityError(f"{type(self).__name__} is not polyhedral")

    @abstractmethod
    def repair(self, w) -> np.ndarray:
        """Undo rounding drift so that ``contains(w, 0)`` holds.

        Meant for points that are feasible in exact arithmetic (convex
        combinations of feasible points); it only moves ``w`` by a few ulps.
        """

    def retract(self, y) -> np.ndarray:
        """Cheap feasible point near ``y``; used to warm-start CondG."""
        return self.exact_project(y)

    @abstractmethod
    def sample(self, rng, k: int) -> np.ndarray:
        """Draw ``k`` random feasible points as rows of an array."""

    @abstractmethod
    def to_dict(self) -> dict: ...

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dimension,):
            raise ValueError(f"dimension mismatch: set has dimension {self.dimension}, got {x.shape}")
        return x


class BudgetSimplex(FeasibleSet):
    """``{x : sum(x) <= d, x >= 0}``.  Vertices are ``0`` and ``d e_i``."""

    is_polyhedral = True

    def __init__(self, n: int, d: float):
        if n < 1:
            raise ValueError("n must be positive")
        if not d > 0:
            raise ValueError("budget d must be positive")
        self.n = int(n)
        self.d = float(d)

    @property
    def dimension(self):
        return self.n

    def __repr__(self):
        return f"BudgetSimplex(n={self.n}, d={self.d!r})"

    def contains(self, x, tol=MEMBERSHIP_TOL):
        x = self._check(x)
        if not np.all(np.isfinite(x)):
            return False
        # fsum gives the exact sum of the stored floats, so tiny tolerances stay meaningful
        return bool(x.min() >= -tol and math.fsum(x) <= self.d + tol)

    def lmo(self, c):
        c = self._check(c)
        i = int(np.argmin(c))
        out = np.zeros(self.n)
        if c[i] < 0:
            out[i] = self.d
        return out

    def exact_project(self, y):
        y = self._check(y)
        p = np.maximum(y, 0.0)
        if math.fsum(p) <= self.d:
            return p
        # sort-and-threshold: find tau with sum(max(y - tau, 0)) = d
        u = np.sort(y)[::-1]
        css = np.cumsum(u)
        j = np.arange(1, self.n + 1)
        rho = np.nonzero(u - (css - self.d) / j > 0)[0][-1]
        tau = (css[rho] - self.d) / (rho + 1)
        return self.repair(np.maximum(y - tau, 0.0))

    def retract(self, y):
        # one pass of the threshold rule over the positive entries, then a
        # scaling fallback; exact unless the shift drives new entries to 0
        p = np.maximum(self._check(y), 0.0)
        excess = math.fsum(p) - self.d
        if excess <= 0:
            return p
        pos = p > 0
        p[pos] = np.maximum(p[pos] - excess / np.count_nonzero(pos), 0.0)
        total = math.fsum(p)
        if total > self.d:
            p = p * (self.d / total)
        return self.repair(p)

    def vertices(self):
        verts = [np.zeros(self.n)]
        for i in range(self.n):
            v = np.zeros(self.n)
            v[i] = self.d
            verts.append(v)
        return verts

    def repair(self, w):
        w = np.maximum(np.asarray(w, dtype=np.float64), 0.0)
        excess = math.fsum(w) - self.d
        if excess <= 0:
            return w
        w = w.copy()
        j = int(np.argmax(w))
        w[j] = max(w[j] - excess, 0.0)
        while math.fsum(w) > self.d:
            if w[j] == 0.0:
                j = int(np.argmax(w))
            w[j] = np.nextafter(w[j], -np.inf)
        return w

    def sample(self, rng, k):
        # Dirichlet(1,...,1) over the n+1 vertices gives uniform points in the simplex
        lam = rng.dirichlet(np.ones(self.n + 1), size=k)
        pts = lam[:, 1:] * self.d
        return np.array([self.repair(p) for p in pts])

    def to_dict(self):
        return {"type": "budget_simplex", "n": self.n, "d": self.d}


class Box(FeasibleSet):
    """``{x : lower <= x <= upper}``."""

    is_polyhedral = True

    def __init__(self, lower, upper):
        lower = np.array(lower, dtype=np.float64)
        upper = np.array(upper, dtype=np.float64)
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size < 1:
            raise ValueError("lower and upper must be vectors of equal length")
        if np.any(lower > upper) or not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("box bounds must be finite with lower <= upper")
        lower.setflags(write=False)
        upper.setflags(write=False)
        self.lower, self.upper = lower, upper

    @property
    def dimension(self):
        return self.lower.size

    def __repr__(self):
        return f"Box(lower={self.lower.tolist()}, upper={self.upper.tolist()})"

    def contains(self, x, tol=MEMBERSHIP_TOL):
        x = self._check(x)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def lmo(self, c):
        c = self._check(c)
        return np.where(c < 0, self.upper, self.lower)

    def exact_project(self, y):
        return np.clip(self._check(y), self.lower, self.upper)

    def vertices(self):
        n = self.dimension
        if n > MAX_BOX_VERTEX_DIM:
            raise CapabilityError(f"refusing to enumerate 2^{n} box vertices")
        return [np.where(np.array(bits, dtype=bool), self.upper, self.lower)
                for bits in itertools.product((0, 1), repeat=n)]

    def repair(self, w):
        return np.clip(w, self.lower, self.upper)

    def sample(self, rng, k):
        return rng.uniform(self.lower, self.upper, size=(k, self.dimension))

    def to_dict(self):
        return {"type": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


class Ball(FeasibleSet):
    """Euclidean ball ``{x : ||x - center|| <= radius}``."""

    def __init__(self, center, radius: float):
        center = np.array(center, dtype=np.float64)
        if center.ndim != 1 or center.size < 1:
            raise ValueError("center must be a vector")
        if not radius > 0:
            raise ValueError("radius must be positive")
        center.setflags(write=False)
        self.center, self.radius = center, float(radius)

    @property
    def dimension(self):
        return self.center.size

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius!r})"

    def contains(self, x, tol=MEMBERSHIP_TOL):
        return norm2(self._check(x) - self.center) <= self.radius + tol

    def lmo(self, c):
        c = self._check(c)
        nc = norm2(c)
        if nc == 0.0:
            return self.center.copy()
        return self.center - self.radius * (c / nc)

    def exact_project(self, y):
        y = self._check(y)
        r = norm2(y - self.center)
        if r <= self.radius:
            return y.copy()
        return self.repair(self.center + (self.radius / r) * (y - self.center))

    def repair(self, w):
        w = np.asarray(w, dtype=np.float64)
        off = w - self.center
        while norm2(w - self.center) > self.radius:
            off = off * (1.0 - 4 * np.finfo(float).eps)
            w = self.center + off
        return w

    def sample(self, rng, k):
        g = rng.standard_normal((k, self.dimension))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.radius * rng.uniform(size=(k, 1)) ** (1.0 / self.dimension)
        return np.array([self.repair(p) for p in self.center + r * g])

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


def set_from_dict(desc: dict) -> FeasibleSet:
    """Build a set from its JSON descriptor."""
    kind = desc.get("type")
    if kind == "budget_simplex":
        return BudgetSimplex(desc["n"], desc["d"])
    if kind == "box":
        return Box(desc["lower"], desc["upper"])
    if kind == "ball":
        return Ball(desc["center"], desc["radius"])
    raise ValueError(f"unknown set type {kind!r}")
