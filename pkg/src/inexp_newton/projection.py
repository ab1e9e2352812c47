"""Feasible inexact projections computed by conditional gradient.

A point ``w`` in ``C`` is an inexact projection of ``y`` relative to the
feasible anchor ``x`` with tolerance ``theta`` when

    <y - w, z - w> <= theta * ||y - x||**2    for every z in C.

The left side is affine in ``z``, so its maximum over ``C`` is attained at
the LMO output for the cost ``w - y``; for polytopes it is attained at a
vertex.  That is what makes the certificate checkable.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .linalg import norm2
from .sets import MEMBERSHIP_TOL, CapabilityError, FeasibleSet

CERT_ATOL = 1e-13
CERT_RTOL = 1e-12
DEFAULT_MAX_ITER = 100


class InfeasibleAnchorError(ValueError):
    pass


class CondGInconsistency(RuntimeError):
    """LMO returned the current iterate while reporting a positive gap."""


@dataclass
class ProjectionCertificate:
    theta_used: float
    anchor_distance: float
    final_gap: float
    inner_iterations: int
    certified: bool

    @property
    def threshold(self) -> float:
        return self.theta_used * self.anchor_distance ** 2

    def to_dict(self):
        return asdict(self)


class Verification(NamedTuple):
    ok: bool
    max_gap: float
    bound: float
    exhaustive: bool
    points_checked: int

    def __bool__(self):
        return self.ok


def _slack(r_norm: float, spread: float) -> float:
    # rounding in <y - w, z - w> grows with the magnitudes involved
    return CERT_ATOL + CERT_RTOL * r_norm * spread


def _gap(S: FeasibleSet, y, w):
    v = S.lmo(w - y)
    return float(np.dot(y - w, v - w)), v


def condg_project(S: FeasibleSet, y, x, theta: float, max_iter: int = DEFAULT_MAX_ITER,
                  start: str = "retraction"):
    """Conditional gradient (Frank-Wolfe) inexact projection of ``y`` onto ``S``.

    Minimizes ``0.5 * ||u - y||**2`` over ``S`` with exact line search until
    the Frank-Wolfe gap drops to ``theta * ||y - x||**2``.  Every iterate is
    a convex combination of feasible points.  If ``max_iter`` steps are not
    enough the iterate with the smallest gap is returned and the certificate
    says ``certified=False``.

    ``start="retraction"`` begins at ``S.retract(y)``, a cheap feasible point
    near ``y``; ``start="anchor"`` begins at ``x``.  From the anchor, plain
    Frank-Wolfe on a large simplex needs far more than 100 steps to move
    mass across many coordinates, so the retraction is the default.

    Returns
    -------
    w : ndarray
    certificate : ProjectionCertificate
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if theta < 0:
        raise ValueError("theta must be non-negative")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if not S.contains(x, MEMBERSHIP_TOL):
        raise InfeasibleAnchorError("anchor x is not in the feasible set")
    anchor = norm2(y - x)
    threshold = theta * anchor * anchor

    if start == "retraction":
        w = S.retract(y)
    elif start == "anchor":
        w = S.repair(x)
    else:
        raise ValueError(f"unknown start {start!r}")
    best_w, best_gap = w, np.inf
    for t in range(max_iter + 1):
        gap, v = _gap(S, y, w)
        if gap < best_gap:
            best_w, best_gap = w, gap
        if gap <= threshold:
            return w, ProjectionCertificate(theta, anchor, gap, t, True)
        if t == max_iter:
            break
        direction = v - w
        dd = float(np.dot(direction, direction))
        if dd == 0.0:
            raise CondGInconsistency(f"LMO returned the iterate with gap {gap:.3e}")
        step = min(1.0, gap / dd)
        w = S.repair(w + step * direction)
    return best_w, ProjectionCertificate(theta, anchor, best_gap, max_iter, False)


def exact_as_inexact(S: FeasibleSet, y, x):
    """Exact projection reported through the inexact-projection interface (theta = 0)."""
    if not S.has_exact_projection:
        raise CapabilityError(f"{type(S).__name__} has no exact projection")
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if not S.contains(x, MEMBERSHIP_TOL):
        raise InfeasibleAnchorError("anchor x is not in the feasible set")
    w = S.exact_project(y)
    gap, v = _gap(S, y, w)
    certified = gap <= _slack(norm2(y - w), norm2(v - w))
    return w, ProjectionCertificate(0.0, norm2(y - x), gap, 0, bool(certified))


def verify_certificate(S: FeasibleSet, y, x, w, theta: float, n_samples: int = 1000,
                       seed: int = 0) -> Verification:
    """Check ``<y - w, z - w> <= theta ||y - x||^2`` over ``S`` independently of CondG.

    Polyhedral sets are checked at every vertex, which is exact (boxes too
    large to enumerate use the LMO vertex, also exact).  Other sets
    are checked at ``n_samples`` random feasible points plus the boundary
    point given by the LMO, and the result says ``exhaustive=False``.
    Membership of ``w`` is part of the check.
    """
    y, x, w = (np.asarray(a, dtype=np.float64) for a in (y, x, w))
    bound = theta * norm2(y - x) ** 2
    if S.is_polyhedral:
        try:
            pts = np.array(S.vertices())
        except CapabilityError:
            # too many vertices; the LMO point maximizes the affine gap exactly
            pts = S.lmo(w - y)[None, :]
        exhaustive = True
    else:
        rng = np.random.default_rng(seed)
        pts = np.vstack([S.sample(rng, n_samples), S.lmo(w - y)[None, :]])
        exhaustive = False
    diffs = pts - w
    gaps = diffs @ (y - w)
    max_gap = float(gaps.max())
    spread = float(np.max(np.linalg.norm(diffs, axis=1)))
    ok = S.contains(w, MEMBERSHIP_TOL) and max_gap <= bound + _slack(norm2(y - w), spread)
    return Verification(bool(ok), max_gap, bound, exhaustive, len(pts))
