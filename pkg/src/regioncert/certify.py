"""Robustness certificates for ReLU classifiers from linear-region geometry.

For a point x with predicted class c, let d_B be the smallest distance from
x to a face of its linear region and d_D the smallest distance to a plane
where logit c ties another class (both computed on the region's frozen
affine map, optionally constrained to an input box).  Then:

  * d_D <= d_B: the nearest decision-plane point lies inside the region, so
    d_D is the exact norm of a minimal adversarial perturbation.
  * d_B < d_D: min(d_B, d_D) = d_B is a sound lower bound; no perturbation
    smaller than d_B changes the decision.

The lower bound can be tightened by walking into neighboring regions: flip
the activation of the nearest region face, verify the flipped pattern is
realized just beyond the face, and redo the decision-plane analysis with
the neighbor's affine map.  Bookkeeping below keeps the reported bound
sound and nondecreasing in the exploration budget:

  * the frontier value of a face inherits the entry distance of the region
    it was discovered in (every point of that region is at least that far),
  * an upper bound u is only accepted from a decision-plane minimizer that
    verifiably lies inside its region on the correct side,
  * per explored region, class changes inside it are bounded below by its
    decision-plane distances (zero when the frozen map already favors the
    competitor at x) floored at the region's entry distance,
  * a face whose flip cannot be realized by a probe on the face itself
    keeps its value as a permanent cap on the bound, unless the plane
    provably misses the region and the face is empty.

Exactness is claimed when u is at or below every remaining frontier value,
every per-region bound, and every blocked-face value.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    AllInfeasibleError,
    Box,
    box_constrained_distance,
    check_p,
    hyperplane_projection,
    min_box_distance_over_planes,
    point_hyperplane_distance,
    vector_norm,
)
from .network import (
    DEGENERACY_TOL,
    ActivationPattern,
    AffineMap,
    Network,
    activation_pattern,
    affine_coefficients,
    decision_hyperplanes,
    forward,
    region_hyperplanes,
)

MISCLASSIFIED = "MISCLASSIFIED"
DEGENERATE = "DEGENERATE"
EXACT = "EXACT"
CERTIFIED_LB = "CERTIFIED_LB"

# Push used when checking that a face flip is realized on the other side.
_WITNESS_PUSH = 1e-7
# Slack for "point satisfies the region constraints" checks.
_REGION_TOL = 1e-9
# Alternating-projection settings for landing a witness on a region face.
_FACE_ITERS = 600
_FACE_FEAS_TOL = 1e-9   # residual below which the point counts as on-face
_FACE_EMPTY_TOL = 1e-6  # residual above which the face counts as empty


class DegeneratePointError(RuntimeError):
    """Some preactivation at x is numerically zero; pattern reasoning is off."""


@dataclass(frozen=True)
class NeighborBudget:
    """Cap on how many neighboring regions certification may inspect."""

    max_regions: int = 5

    def __post_init__(self):
        if not 0 <= self.max_regions <= 64:
            raise ValueError("max_regions must be in [0, 64]")


@dataclass(frozen=True)
class Certificate:
    point_index: int
    p: float
    true_label: int
    predicted_class: int
    d_B: float
    d_D: float
    lower_bound: float
    is_exact: bool
    minimal_perturbation: object
    used_box: bool
    regions_explored: int
    flips_skipped: int
    status: str


@dataclass
class RegionDistances:
    """Distances of x to its region faces and decision planes, with context."""

    d_B: float
    boundary_plane: object
    boundary_point: object
    d_D: float
    decision_plane: object
    decision_point: object
    predicted_class: int
    trace: object
    pattern: ActivationPattern
    affine: AffineMap


def region_distances(net: Network, x, p, box: Box = None,
                     tol: float = DEGENERACY_TOL) -> RegionDistances:
    """Theorem-style d_B / d_D at x, raising on degenerate preactivations.

    Dead region planes are excluded.  A dead decision plane (identical
    logit rows) scores distance 0 when its constant gap is zero, otherwise
    it can never flip and is skipped.  With a box, planes that miss the box
    are unreachable and drop out; if all planes drop out the distance is
    +inf (robust at every radius inside the box).
    """
    p = check_p(p)
    x = np.asarray(x, dtype=np.float64)
    trace = forward(net, x)
    pattern = activation_pattern(trace, tol)
    if pattern.is_degenerate:
        raise DegeneratePointError("preactivation within tolerance of zero at x")
    affine = affine_coefficients(net, pattern)
    c = int(np.argmax(trace.logits))

    d_B, b_plane, b_point = _min_over_planes(
        [pl for pl in region_hyperplanes(affine, pattern) if not pl.is_dead], x, p, box
    )

    live = []
    zero_gap_plane = None
    for pl in decision_hyperplanes(affine, c):
        if pl.is_dead:
            if pl.offset == 0.0:
                zero_gap_plane = pl
            continue
        live.append(pl)
    if zero_gap_plane is not None:
        d_D, d_plane, d_point = 0.0, zero_gap_plane, x.copy()
    else:
        d_D, d_plane, d_point = _min_over_planes(live, x, p, box)

    return RegionDistances(d_B, b_plane, b_point, d_D, d_plane, d_point,
                           c, trace, pattern, affine)


def _min_over_planes(planes, x, p, box):
    if not planes:
        return math.inf, None, None
    try:
        res = min_box_distance_over_planes(planes, x, p, box)
    except AllInfeasibleError:
        return math.inf, None, None
    return res.distance, planes[res.index], res.point


def _in_region(affine: AffineMap, pattern: ActivationPattern, z,
               tol: float = _REGION_TOL) -> bool:
    """Does z satisfy every halfspace of the pattern's region, within slack?"""
    z = np.asarray(z, dtype=np.float64)
    for V, a, act in zip(affine.V[:-1], affine.a[:-1], pattern.active):
        vals = V @ z + a
        signed = np.where(act, vals, -vals)
        if np.any(signed < -tol * (1.0 + np.abs(vals))):
            return False
    return True


@dataclass(frozen=True)
class ExplorationResult:
    lower_bound: float
    upper_bound: float
    exact: bool
    witness_point: object
    regions_explored: int
    flips_skipped: int


def certify_point(net: Network, x, true_label: int, p, box: Box = None,
                  budget: NeighborBudget = NeighborBudget(),
                  tol: float = DEGENERACY_TOL,
                  point_index: int = -1) -> Certificate:
    """Full certificate for one input point.

    Status is MISCLASSIFIED (lower bound 0) when the prediction differs from
    the label, DEGENERATE (conservative lower bound 0) on numerically
    boundary configurations, EXACT when the bound is provably the minimal
    perturbation norm (with the perturbation attached), and CERTIFIED_LB
    otherwise.
    """
    p = check_p(p)
    x = np.asarray(x, dtype=np.float64)
    if box is not None and box.dim != x.shape[0]:
        raise ValueError("box dimension does not match input")
    trace = forward(net, x)
    predicted = int(np.argmax(trace.logits))

    def cert(d_B, d_D, lb, exact, pert, regions, skipped, status):
        return Certificate(point_index, p, int(true_label), predicted, d_B, d_D,
                           lb, exact, pert, box is not None, regions, skipped, status)

    if predicted != int(true_label):
        return cert(math.nan, math.nan, 0.0, False, None, 0, 0, MISCLASSIFIED)
    try:
        rd = region_distances(net, x, p, box, tol)
    except DegeneratePointError:
        return cert(math.nan, math.nan, 0.0, False, None, 0, 0, DEGENERATE)

    if rd.d_D == 0.0:
        # x sits exactly on a decision boundary; report it as degenerate
        # rather than an EXACT zero, for which no witness perturbation exists.
        return cert(rd.d_B, rd.d_D, 0.0, False, None, 0, 0, DEGENERATE)

    if rd.d_D <= rd.d_B:
        z = rd.decision_point
        ok = z is not None and _in_region(rd.affine, rd.pattern, z)
        if ok:
            return cert(rd.d_B, rd.d_D, rd.d_D, True, z - x, 0, 0, EXACT)
        # Box-constrained minimizer outside the region (or p = 1 fallback
        # without a witness): fall back to the sound lower bound.
        return cert(rd.d_B, rd.d_D, min(rd.d_D, rd.d_B), False, None, 0, 0,
                    CERTIFIED_LB)

    if budget.max_regions == 0 or not math.isfinite(rd.d_B):
        return cert(rd.d_B, rd.d_D, rd.d_B, False, None, 0, 0, CERTIFIED_LB)

    res = explore_neighbors(net, x, p, box, budget, tol, _start=rd)
    if res.exact:
        return cert(rd.d_B, rd.d_D, res.lower_bound, True,
                    res.witness_point - x, res.regions_explored,
                    res.flips_skipped, EXACT)
    return cert(rd.d_B, rd.d_D, res.lower_bound, False, None,
                res.regions_explored, res.flips_skipped, CERTIFIED_LB)


def _face_point(net: Network, plane, source_pattern: ActivationPattern,
                start, box: Box = None):
    """Land a point on ``plane`` within the closure of the source region.

    Euclidean alternating projections onto the plane, the most violated
    region half-space, and the box.  Returns ``(point, residual)`` where
    the residual is the largest remaining constraint violation in distance
    units; a residual that stays large is evidence the plane misses the
    region entirely (the constraint is redundant and the face is empty).
    """
    aff = affine_coefficients(net, source_pattern)
    W = []
    b = []
    for V, a, act in zip(aff.V[:-1], aff.a[:-1], source_pattern.active):
        sign = np.where(act, 1.0, -1.0)
        W.append(sign[:, None] * V)
        b.append(sign * a)
    W = np.vstack(W)
    b = np.concatenate(b)
    nrm = np.sqrt(np.sum(W * W, axis=1))
    live = nrm > 0.0
    W, b, nrm = W[live], b[live], nrm[live]

    n = np.asarray(plane.normal, dtype=np.float64)
    nn = float(n @ n)
    if nn == 0.0:
        return np.asarray(start, dtype=np.float64), math.inf

    z = np.asarray(start, dtype=np.float64).copy()
    residual = math.inf
    for _ in range(_FACE_ITERS):
        z -= ((n @ z + plane.offset) / nn) * n
        if box is not None:
            z = box.clip(z)
        if W.size:
            v = W @ z + b
            j = int(np.argmin(v / nrm))
            if v[j] < 0.0:
                z -= (v[j] / (nrm[j] * nrm[j])) * W[j]
        plane_res = abs(float(n @ z) + plane.offset) / math.sqrt(nn)
        halfspace_res = 0.0
        if W.size:
            halfspace_res = max(0.0, -float(np.min((W @ z + b) / nrm)))
        box_res = 0.0
        if box is not None:
            box_res = float(np.max(np.abs(z - box.clip(z))))
        residual = max(plane_res, halfspace_res, box_res)
        if residual <= _FACE_FEAS_TOL:
            break
    return z, residual


def explore_neighbors(net: Network, x, p, box: Box = None,
                      budget: NeighborBudget = NeighborBudget(),
                      tol: float = DEGENERACY_TOL,
                      _start: RegionDistances = None) -> ExplorationResult:
    """Improve the two-distance bounds by walking neighboring regions.

    Maintains a frontier heap of region faces keyed by a sound entry value
    (face distance floored at the entry value of the region that produced
    it).  Repeatedly takes the closest face, flips its unit, and explores
    the neighbor iff a point pushed slightly beyond the face actually
    realizes the flipped pattern.  The raw plane projection can land
    outside the face (outside the source region), so failed probes are
    retried from a point projected onto plane AND source region; planes
    that provably miss the region are discarded for free, while faces that
    exist but cannot be crossed keep their value as a permanent cap on the
    lower bound.  Neither kind of skip spends region budget.  Terminates
    with an exact value when the verified upper bound u is at or below
    every remaining frontier value, every per-region lower bound, and
    every blocked-face value.
    """
    p = check_p(p)
    x = np.asarray(x, dtype=np.float64)
    rd = _start if _start is not None else region_distances(net, x, p, box, tol)
    c = rd.predicted_class

    def plane_distance(plane):
        """(distance, witness) honoring the box; witness may be None."""
        if box is None:
            return point_hyperplane_distance(plane, x, p), None
        res = box_constrained_distance(plane, x, p, box)
        if not res.feasible:
            return math.inf, None
        return res.distance, res.point

    # u: best verified adversarial distance so far.
    u = math.inf
    u_point = None
    if (rd.decision_point is not None and math.isfinite(rd.d_D)
            and _in_region(rd.affine, rd.pattern, rd.decision_point)):
        u, u_point = rd.d_D, np.asarray(rd.decision_point, dtype=np.float64)

    # Per-region lower-bound components; the start region contributes d_D.
    components = [rd.d_D]

    visited = {rd.pattern.key()}
    heap = []  # (value, seq, confirmed) with side data in entries[seq]
    entries = {}
    seen = set()
    seq = 0

    def push(plane, base_pattern, base_key, entry_value):
        nonlocal seq
        ident = (base_key, plane.layer, plane.unit)
        if ident in seen or plane.is_dead:
            return
        seen.add(ident)
        flipped = base_pattern.flip(plane.layer, plane.unit)
        d0 = point_hyperplane_distance(plane, x, p)
        confirmed = box is None
        entries[seq] = (plane, flipped, flipped.key(), entry_value, None)
        heapq.heappush(heap, (max(d0, entry_value), seq, confirmed))
        seq += 1

    for pl in region_hyperplanes(rd.affine, rd.pattern):
        push(pl, rd.pattern, rd.pattern.key(), 0.0)

    regions = 0
    skipped = 0
    blocked = []  # values of real faces whose flip could not be realized

    def head_value():
        """Confirm heap entries lazily until the head carries its true box
        distance, dropping faces that lead to visited patterns or miss the
        box on the way."""
        while heap:
            value, s, confirmed = heap[0]
            if entries[s][2] in visited:
                heapq.heappop(heap)
                del entries[s]
                continue
            if confirmed:
                return value
            heapq.heappop(heap)
            plane, flipped, fkey, entry_value, _ = entries[s]
            dist, witness = plane_distance(plane)
            if not math.isfinite(dist):
                del entries[s]
                continue
            entries[s] = (plane, flipped, fkey, entry_value, witness)
            heapq.heappush(heap, (max(dist, entry_value), s, True))
        return math.inf

    while True:
        frontier = head_value()
        cap = min(blocked) if blocked else math.inf
        lower = min(frontier, min(components), cap)
        if u <= lower and u_point is not None:
            return ExplorationResult(u, u, True, u_point, regions, skipped)
        if not heap:
            return ExplorationResult(min(lower, u), u, False, u_point,
                                     regions, skipped)

        value, s, _ = heapq.heappop(heap)
        plane, flipped, fkey, entry_value, witness = entries.pop(s)

        if witness is None:
            witness = hyperplane_projection(plane, x, p)
        nrm = vector_norm(plane.normal, 2.0)
        step = plane.orientation * plane.normal / nrm
        probe = witness - _WITNESS_PUSH * step
        realized = activation_pattern(forward(net, probe), tol).key() == fkey
        if not realized:
            # The raw projection can land outside the face; retry from a
            # point constrained to the plane and the source region.
            source = flipped.flip(plane.layer, plane.unit)
            refined, residual = _face_point(net, plane, source, witness, box)
            if residual <= _FACE_FEAS_TOL:
                for amount in (_WITNESS_PUSH, 1e-9, 1e-5):
                    probe = refined - amount * step
                    if activation_pattern(forward(net, probe), tol).key() == fkey:
                        realized = True
                        break
            if not realized:
                skipped += 1
                if residual <= _FACE_EMPTY_TOL:
                    # Real face, unrealizable flip (degenerate adjacency):
                    # its value permanently caps the lower bound.
                    blocked.append(value)
                # Otherwise the plane misses the region: the face is empty
                # and no path leaves the region through it.
                continue

        if regions >= budget.max_regions:
            # A realizable neighbor remains but the budget is spent; its
            # frontier value caps the lower bound.
            return ExplorationResult(min(lower, u), u, False, u_point,
                                     regions, skipped)

        regions += 1
        visited.add(fkey)
        affine = affine_coefficients(net, flipped)

        # Decision-plane analysis on the neighbor's affine map.
        candidates = []
        dd = math.inf
        for dpl in decision_hyperplanes(affine, c):
            if dpl.is_dead:
                if dpl.offset <= 0.0:
                    dd = 0.0
                continue
            gap_x = dpl.value_at(x)
            if gap_x <= 0.0:
                dd = 0.0
                continue
            dist, point = plane_distance(dpl)
            if not math.isfinite(dist):
                continue
            dd = min(dd, dist)
            if point is None and box is None:
                point = hyperplane_projection(dpl, x, p)
            candidates.append((dist, point))
        components.append(max(dd, value))

        candidates.sort(key=lambda t: t[0])
        for dist, point in candidates:
            if dist >= u:
                break
            if point is not None and _in_region(affine, flipped, point):
                u, u_point = dist, np.asarray(point, dtype=np.float64)
                break

        for pl in region_hyperplanes(affine, flipped):
            push(pl, flipped, fkey, value)


def certified_robust_error(net: Network, X, y, eps: float, p,
                           box: Box = None,
                           budget: NeighborBudget = NeighborBudget(),
                           tol: float = DEGENERACY_TOL) -> float:
    """Fraction of points not certified robust at radius eps.

    A point counts as certified iff it is correctly classified, not
    degenerate, and its lower bound is at least eps.  At eps = 0 this
    equals the clean test error on degenerate-free data.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    bad = 0
    for i in range(X.shape[0]):
        cert = certify_point(net, X[i], int(y[i]), p, box, budget, tol, i)
        if cert.status in (MISCLASSIFIED, DEGENERATE) or cert.lower_bound < eps:
            bad += 1
    return bad / max(1, X.shape[0])
