"""Point-to-hyperplane distances, projections, and box-constrained variants.

For a plane {z : w . z + b = 0} and a point x, the l_p distance is

    |w . x + b| / ||w||_q,   1/p + 1/q = 1,

by Hoelder.  The box-constrained distance min ||z - x||_p over the plane
intersected with an axis-aligned box has no closed form; it is computed by
bisection (p = 2 on the Lagrange multiplier of the clipped stationarity
condition, p = inf on the radius).  Box-constrained distances are rounded
toward zero so they stay valid lower bounds on the true distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SUPPORTED_P = (1.0, 2.0, math.inf)

# Fixed iteration caps make every bisection deterministic; 100 halvings are
# far below double precision already.
_BISECT_ITERS = 100
_BISECT_TOL = 1e-10


class DeadPlaneError(ValueError):
    """Distance to a zero-normal plane is undefined."""


class AllInfeasibleError(RuntimeError):
    """Every candidate plane misses the box."""


def check_p(p) -> float:
    p = float(p)
    if p not in SUPPORTED_P:
        raise ValueError(f"p must be one of {SUPPORTED_P}, got {p}")
    return p


def dual_exponent(p) -> float:
    p = check_p(p)
    if p == 1.0:
        return math.inf
    if p == math.inf:
        return 1.0
    return 2.0


def vector_norm(v, p) -> float:
    p = check_p(p)
    v = np.asarray(v, dtype=np.float64)
    if p == math.inf:
        return float(np.max(np.abs(v))) if v.size else 0.0
    if p == 1.0:
        return float(np.sum(np.abs(v)))
    return float(np.sqrt(np.sum(v * v)))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lower, upper]; the default input domain is [0, 1]^d."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64)
        hi = np.asarray(self.upper, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-d arrays of equal shape")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValueError("box bounds must be finite")
        if np.any(lo > hi):
            raise ValueError("box has lower > upper")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @staticmethod
    def unit(dim: int) -> "Box":
        return Box(np.zeros(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=np.float64), self.lower, self.upper)


def _normal_offset(plane):
    # Accepts a network.Hyperplane or a bare (w, b) pair.
    if hasattr(plane, "normal"):
        return np.asarray(plane.normal, dtype=np.float64), float(plane.offset)
    w, b = plane
    return np.asarray(w, dtype=np.float64), float(b)


def point_hyperplane_distance(plane, x, p) -> float:
    """Unconstrained l_p distance |w . x + b| / ||w||_q."""
    w, b = _normal_offset(plane)
    den = vector_norm(w, dual_exponent(p))
    if den == 0.0:
        raise DeadPlaneError("zero-normal plane has no distance")
    x = np.asarray(x, dtype=np.float64)
    return abs(float(w @ x + b)) / den


def hyperplane_projection(plane, x, p) -> np.ndarray:
    """A point on the plane at exactly the l_p distance from x.

    p = 2 moves along the normal; p = inf moves every coordinate with
    w_i != 0 by the same amount; p = 1 moves only the coordinate with the
    largest |w_i| (ties resolved toward the lowest index).
    """
    p = check_p(p)
    w, b = _normal_offset(plane)
    x = np.asarray(x, dtype=np.float64)
    r = float(w @ x + b)
    if not w.any():
        raise DeadPlaneError("zero-normal plane has no projection")
    if r == 0.0:
        return x.copy()
    if p == 2.0:
        return x - (r / float(w @ w)) * w
    if p == math.inf:
        t = abs(r) / float(np.sum(np.abs(w)))
        return x - math.copysign(t, r) * np.sign(w)
    j = int(np.argmax(np.abs(w)))
    z = x.copy()
    z[j] = x[j] - r / w[j]
    return z


def _plane_range_over_box(w, b, lower, upper):
    """Exact range of w . z + b over an axis-aligned box."""
    lo = float(np.sum(np.minimum(w * lower, w * upper)) + b)
    hi = float(np.sum(np.maximum(w * lower, w * upper)) + b)
    return lo, hi


@dataclass(frozen=True)
class BoxDistance:
    """Result of a box-constrained plane distance computation.

    ``distance`` is +inf when the plane misses the box entirely.  ``point``
    is a box point (numerically) on the plane attaining the distance; it is
    None for infeasible planes and for the p = 1 fallback.  ``tight`` is
    False only for the p = 1 fallback, where the reported value is the
    unconstrained distance (a valid lower bound, not the box optimum).
    """

    distance: float
    point: object
    tight: bool

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.distance)


def box_constrained_distance(plane, x, p, box: Box) -> BoxDistance:
    """min ||z - x||_p subject to w . z + b = 0 and z in the box.

    Infeasibility (the plane misses the box) is reported via distance +inf.
    For p = 1 the constrained problem is not supported; the unconstrained
    distance is returned as a lower bound with tight=False.
    """
    p = check_p(p)
    w, b = _normal_offset(plane)
    if not w.any():
        raise DeadPlaneError("zero-normal plane has no distance")
    x = np.asarray(x, dtype=np.float64)
    lo_val, hi_val = _plane_range_over_box(w, b, box.lower, box.upper)
    if lo_val > 0.0 or hi_val < 0.0:
        return BoxDistance(math.inf, None, True)
    d0 = point_hyperplane_distance((w, b), x, p)
    r0 = float(w @ x + b)
    if r0 == 0.0:
        return BoxDistance(0.0, box.clip(x), True)
    if p == 1.0:
        return BoxDistance(d0, None, False)
    if p == 2.0:
        return _box_distance_l2(w, b, x, box, d0, r0)
    return _box_distance_linf(w, b, x, box, d0)


def _box_distance_l2(w, b, x, box, d0, r0):
    # KKT stationarity of min ||z - x||^2 on plane+box gives z = clip(x - mu w)
    # with w . z(mu) + b monotone nonincreasing in mu.  Bisect mu to the root.
    if r0 < 0.0:
        w, b, r0 = -w, -b, -r0

    def residual(mu):
        return float(w @ np.clip(x - mu * w, box.lower, box.upper) + b)

    mu_lo = 0.0
    mu_hi = r0 / float(w @ w)  # unconstrained root
    if residual(mu_hi) > 0.0:
        # Expand toward saturation; feasibility guarantees a sign change.
        for _ in range(200):
            mu_hi *= 2.0
            if residual(mu_hi) <= 0.0:
                break
        else:
            return BoxDistance(math.inf, None, True)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (mu_lo + mu_hi)
        if residual(mid) > 0.0:
            mu_lo = mid
        else:
            mu_hi = mid
        if mu_hi - mu_lo <= _BISECT_TOL * max(1.0, abs(mu_hi)) / 1e6:
            break
    z_near = np.clip(x - mu_lo * w, box.lower, box.upper)  # not yet crossed
    z_on = np.clip(x - mu_hi * w, box.lower, box.upper)    # just crossed
    dist = max(vector_norm(z_near - x, 2.0), d0)  # round toward the lower bound side
    return BoxDistance(dist, z_on, True)


def _linf_witness(w, b, x, r, box):
    """A box point on the plane within l_inf radius r of x, built greedily.

    Assumes 0 is in the range of w . z + b over box intersected with the
    radius-r cube (the bisection feasibility test).
    """
    lo = np.maximum(box.lower, x - r)
    hi = np.minimum(box.upper, x + r)
    z = np.clip(x, lo, hi)
    resid = float(w @ z + b)
    order = np.argsort(-np.abs(w), kind="stable")
    for i in order:
        if resid == 0.0 or w[i] == 0.0:
            break
        target = z[i] - resid / w[i]
        new = min(max(target, lo[i]), hi[i])
        resid += w[i] * (new - z[i])
        z[i] = new
    return z


def _box_distance_linf(w, b, x, box, d0):
    def feasible(r):
        lo = np.maximum(box.lower, x - r)
        hi = np.minimum(box.upper, x + r)
        lo_val, hi_val = _plane_range_over_box(w, b, lo, hi)
        return lo_val <= 0.0 <= hi_val

    r_cover = float(np.max(np.maximum(x - box.lower, box.upper - x)))
    if feasible(d0):
        return BoxDistance(d0, _linf_witness(w, b, x, d0, box), True)
    r_lo, r_hi = d0, r_cover
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (r_lo + r_hi)
        if feasible(mid):
            r_hi = mid
        else:
            r_lo = mid
        if r_hi - r_lo <= _BISECT_TOL * max(1.0, r_hi) / 1e6:
            break
    dist = max(r_lo, d0)
    return BoxDistance(dist, _linf_witness(w, b, x, r_hi, box), True)


@dataclass(frozen=True)
class PlaneMin:
    """Minimum distance over a family of planes.

    ``index`` refers to the input list; ``point`` is a witness on the argmin
    plane (None for the p = 1 box fallback); ``box_solves`` counts how many
    box-constrained subproblems were actually solved.
    """

    distance: float
    index: int
    point: object
    box_solves: int


def min_box_distance_over_planes(planes, x, p, box: Box = None) -> PlaneMin:
    """Smallest (box-constrained) distance over a list of planes.

    Dead planes are skipped.  With a box, planes are processed in order of
    increasing unconstrained distance and the loop stops as soon as the best
    box distance found is at or below the next unconstrained distance, which
    can never be beaten (box distances dominate unconstrained ones).
    """
    p = check_p(p)
    x = np.asarray(x, dtype=np.float64)
    usable = []
    dists = []
    for i, plane in enumerate(planes):
        w, b = _normal_offset(plane)
        if not w.any():
            continue
        usable.append(i)
        dists.append(point_hyperplane_distance((w, b), x, p))
    if not usable:
        raise ValueError("no usable (non-dead) planes")
    order = np.argsort(np.asarray(dists), kind="stable")
    if box is None:
        k = int(order[0])
        idx = usable[k]
        return PlaneMin(dists[k], idx, hyperplane_projection(planes[idx], x, p), 0)

    best = math.inf
    best_idx = -1
    best_point = None
    solves = 0
    for k in order:
        if best <= dists[int(k)]:
            break
        idx = usable[int(k)]
        res = box_constrained_distance(planes[idx], x, p, box)
        solves += 1
        if res.feasible and res.distance < best:
            best, best_idx, best_point = res.distance, idx, res.point
    if best_idx < 0:
        raise AllInfeasibleError("every plane misses the box")
    return PlaneMin(best, best_idx, best_point, solves)
