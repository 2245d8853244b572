"""Independent brute-force oracles for minimal adversarial perturbations.

Two oracles with different failure modes cross-check the certification
path:

  * :func:`grid_oracle` scans a discretized p-ball (intersected with the
    input box) around x and reports the closest point whose predicted
    class differs, refined on progressively finer local sub-grids.  Pure
    forward evaluations; upper bound only, accurate to the final cell size.
  * :func:`enumerate_patterns_oracle` enumerates every activation pattern
    of a small network (at most 14 hidden units), and for each feasible
    region solves min ||z - x||_p subject to the region's halfspaces and a
    class-tie constraint.  The convex subproblems are solved by projection
    methods: Dykstra's alternating projections for p = 2 (the exact
    Euclidean projection onto the intersection) and an exact enumeration of
    basic feasible points of the epigraph linear program for p in {1, inf}.
    Feasibility is established by repeated projections onto the most
    violated constraint.

Neither oracle shares distance or exploration code with the certification
module; both only rely on the shared forward/affine definitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .geometry import Box, check_p, vector_norm
from .network import (
    Network,
    affine_coefficients,
    forward_batch,
    pattern_from_bits,
    predict,
)

GRID = "grid"
PATTERN_ENUM = "pattern_enumeration"
UPPER_ONLY = "upper_only"
EXACT_WITHIN_TOL = "exact_within_tol"

_MAX_GRID_CELLS = 10 ** 7
_MAX_ENUM_UNITS = 14
_FEAS_TOL = 1e-8
_FEAS_ITERS = 3000
_DYKSTRA_ITERS = 5000


class NoAdversarialFoundError(RuntimeError):
    """No class change inside the searched set."""


@dataclass(frozen=True)
class OracleResult:
    value: float
    witness: np.ndarray
    method: str
    guarantee: str
    tol: float


def _cell_diagonal(spacing: float, d: int, p: float) -> float:
    if p == math.inf:
        return spacing
    return spacing * d ** (1.0 / p)


def grid_oracle(net: Network, x, p, radius: float, resolution: int,
                box: Box = None) -> OracleResult:
    """Closest grid point (within the p-ball, and the box if given) whose
    predicted class differs from the prediction at x."""
    p = check_p(p)
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    if d > 3:
        raise ValueError("grid oracle supports d <= 3")
    if resolution < 2 or resolution ** d > _MAX_GRID_CELLS:
        raise ValueError("resolution out of range (need 2 <= r, r^d <= 1e7)")
    if radius <= 0:
        raise ValueError("radius must be positive")
    c0 = predict(net, x)

    def scan(center, half_width, res):
        axes = []
        spacing = 0.0
        for i in range(d):
            lo, hi = center[i] - half_width, center[i] + half_width
            if box is not None:
                lo, hi = max(lo, box.lower[i]), min(hi, box.upper[i])
            lo, hi = min(lo, hi), max(lo, hi)
            axes.append(np.linspace(lo, hi, res))
            spacing = max(spacing, (hi - lo) / (res - 1))
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        if p == math.inf:
            dist = np.max(np.abs(pts - x), axis=1)
        elif p == 1.0:
            dist = np.sum(np.abs(pts - x), axis=1)
        else:
            dist = np.sqrt(np.sum((pts - x) ** 2, axis=1))
        keep = dist <= radius + 1e-12
        pts, dist = pts[keep], dist[keep]
        if pts.shape[0] == 0:
            return None, spacing
        mis = np.argmax(forward_batch(net, pts), axis=1) != c0
        if not mis.any():
            return None, spacing
        j = int(np.argmin(np.where(mis, dist, np.inf)))
        return (float(dist[j]), pts[j]), spacing

    found, spacing = scan(x, radius, resolution)
    if found is None:
        raise NoAdversarialFoundError(f"no class change within radius {radius}")
    best, witness = found
    # Three rounds of 10x finer sub-grids around the incumbent.
    for _ in range(3):
        found, finer = scan(witness, 2.0 * spacing, 41)
        if found is None:
            break
        spacing = finer
        if found[0] < best:
            best, witness = found
    return OracleResult(best, witness, GRID, UPPER_ONLY,
                        _cell_diagonal(spacing, d, p))


def _pattern_constraints(net, affine, bits):
    """Halfspace system A z <= b of one region, or None if trivially empty.

    Dead units impose constant constraints: an active claim needs a
    strictly positive constant preactivation, an inactive claim a
    nonpositive one.
    """
    rows, rhs = [], []
    pos = 0
    for layer, width in enumerate(net.hidden_dims):
        V, a = affine.V[layer], affine.a[layer]
        for i in range(width):
            active = (bits >> (pos + i)) & 1
            v, const = V[i], float(a[i])
            if not v.any():
                if (active and const <= 0.0) or (not active and const > 0.0):
                    return None
                continue
            if active:
                rows.append(-v)
                rhs.append(const)
            else:
                rows.append(v)
                rhs.append(-const)
        pos += width
    if rows:
        A = np.asarray(rows)
        b = np.asarray(rhs)
    else:
        A = np.zeros((0, net.input_dim))
        b = np.zeros(0)
    return A, b


def _most_violated_feasible(A, b, x0, box, iters=_FEAS_ITERS, tol=_FEAS_TOL):
    """A point of {A z <= b} (and the box) or None, by projections onto the
    most violated halfspace.  Rows must be l2-normalized."""
    z = x0.copy() if box is None else box.clip(x0)
    if A.shape[0] == 0:
        return z
    for _ in range(iters):
        viol = A @ z - b
        j = int(np.argmax(viol))
        if viol[j] <= tol:
            return z
        z = z - viol[j] * A[j]
        if box is not None:
            z = box.clip(z)
    return None


def _dykstra_projection(x0, A, b, box, iters=_DYKSTRA_ITERS):
    """Exact Euclidean projection of x0 onto {A z <= b} (+ box), assuming
    the intersection is nonempty.  Rows must be l2-normalized."""
    m = A.shape[0]
    z = x0.copy()
    nsets = m + (1 if box is not None else 0)
    corr = np.zeros((nsets, x0.shape[0]))
    for _ in range(iters):
        move = 0.0
        for i in range(m):
            w = z + corr[i]
            v = float(A[i] @ w - b[i])
            znew = w - v * A[i] if v > 0.0 else w
            corr[i] = w - znew
            move = max(move, float(np.max(np.abs(znew - z))))
            z = znew
        if box is not None:
            w = z + corr[m]
            znew = box.clip(w)
            corr[m] = w - znew
            move = max(move, float(np.max(np.abs(znew - z))))
            z = znew
        if move <= 1e-13:
            break
    return z


def _lp_basic_minimum(obj, A, b, chunk=40000):
    """min obj . v over {A v <= b} by enumerating basic feasible points.

    Exact (up to linear algebra roundoff) for pointed feasible sets, which
    is the case for the epigraph formulations used here.  Returns
    (value, argmin) or None when no feasible basic point exists.
    """
    m, k = A.shape
    if m < k:
        return None
    best = math.inf
    best_v = None
    combos = combinations(range(m), k)
    while True:
        block = list(combinations_slice(combos, chunk))
        if not block:
            break
        idx = np.asarray(block)
        mats = A[idx]
        dets = np.linalg.det(mats)
        ok = np.abs(dets) > 1e-12
        if ok.any():
            sols = np.linalg.solve(mats[ok], b[idx][ok][..., None])[..., 0]
            feas = np.all(sols @ A.T <= b + 1e-9, axis=1)
            if feas.any():
                vals = sols[feas] @ obj
                j = int(np.argmin(vals))
                if vals[j] < best:
                    best = float(vals[j])
                    best_v = sols[feas][j]
    if best_v is None:
        return None
    return best, best_v


def combinations_slice(it, n):
    out = []
    for _ in range(n):
        try:
            out.append(next(it))
        except StopIteration:
            break
    return out


def _min_norm_epigraph(x, A, b, p, box):
    """min ||z - x||_p s.t. A z <= b (and box) via the epigraph LP."""
    d = x.shape[0]
    eye = np.eye(d)
    if box is not None:
        A0 = np.vstack([A, eye, -eye]) if A.size else np.vstack([eye, -eye])
        b0 = np.concatenate([b, box.upper, -box.lower])
    else:
        A0 = A
        b0 = b
    if p == math.inf:
        # variables (z, t), minimize t with |z_i - x_i| <= t
        k = d + 1
        top = np.hstack([A0, np.zeros((A0.shape[0], 1))])
        cup = np.hstack([eye, -np.ones((d, 1))])
        cdn = np.hstack([-eye, -np.ones((d, 1))])
        Afull = np.vstack([top, cup, cdn])
        bfull = np.concatenate([b0, x, -x])
        obj = np.zeros(k)
        obj[-1] = 1.0
    else:
        # p == 1: variables (z, t_1..t_d), minimize sum t
        k = 2 * d
        top = np.hstack([A0, np.zeros((A0.shape[0], d))])
        cup = np.hstack([eye, -eye])
        cdn = np.hstack([-eye, -eye])
        Afull = np.vstack([top, cup, cdn])
        bfull = np.concatenate([b0, x, -x])
        obj = np.concatenate([np.zeros(d), np.ones(d)])
    norms = np.linalg.norm(Afull, axis=1)
    norms[norms == 0.0] = 1.0
    res = _lp_basic_minimum(obj, Afull / norms[:, None], bfull / norms)
    if res is None:
        return None
    value, v = res
    return max(value, 0.0), v[:d]


def _min_norm_over_region(x, A, b, p, box):
    """min ||z - x||_p over a halfspace system, None if infeasible."""
    norms = np.linalg.norm(A, axis=1)
    keep = norms > 0.0
    An = A[keep] / norms[keep][:, None]
    bn = b[keep] / norms[keep]
    feas = _most_violated_feasible(An, bn, x, box)
    if feas is None:
        return None
    if p == 2.0:
        z = _dykstra_projection(x, An, bn, box)
        return vector_norm(z - x, 2.0), z
    res = _min_norm_epigraph(x, An, bn, p, box)
    if res is None:
        # Feasible per projections but no basic point found: degenerate
        # system; fall back to the feasibility point (upper bound).
        return vector_norm(feas - x, p), feas
    return res


def enumerate_patterns_oracle(net: Network, x, p, box: Box = None) -> OracleResult:
    """Exact minimal class-changing perturbation by enumerating all
    activation patterns of a small network.

    For every pattern the region polytope and each class-tie halfspace are
    assembled from the frozen affine map; the closest feasible point over
    all (pattern, competitor) pairs is the global optimum.  Patterns are
    processed in order of a cheap per-pattern lower bound so that most of
    the 2^N systems are pruned without solving anything.
    """
    p = check_p(p)
    x = np.asarray(x, dtype=np.float64)
    N = net.num_hidden_units
    if N > _MAX_ENUM_UNITS:
        raise ValueError(f"pattern enumeration capped at {_MAX_ENUM_UNITS} hidden units")
    c0 = predict(net, x)
    q = {1.0: math.inf, 2.0: 2.0, math.inf: 1.0}[p]

    def halfspace_lb(A, b):
        """l_p distance lower bound from constraints violated at x."""
        if A.shape[0] == 0:
            return 0.0
        viol = A @ x - b
        dual = np.array([vector_norm(row, q) for row in A])
        with np.errstate(invalid="ignore"):
            vals = np.where(viol > 0.0, viol / dual, 0.0)
        return float(np.max(vals))

    prepared = []
    for bits in range(1 << N):
        pattern = pattern_from_bits(net, bits)
        affine = affine_coefficients(net, pattern)
        system = _pattern_constraints(net, affine, bits)
        if system is None:
            continue
        A, b = system
        prepared.append((halfspace_lb(A, b), bits, A, b, affine))
    prepared.sort(key=lambda t: (t[0], t[1]))

    best = math.inf
    witness = None
    for lb, bits, A, b, affine in prepared:
        if lb >= best:
            break
        V, a = affine.V[-1], affine.a[-1]
        for s in range(net.num_classes):
            if s == c0:
                continue
            w = V[c0] - V[s]
            const = float(a[c0] - a[s])
            if not w.any():
                if const > 0.0:
                    continue
                system = (A, b)  # whole region already ties or flips
            else:
                system = (np.vstack([A, w[None, :]]) if A.size else w[None, :].copy(),
                          np.concatenate([b, [-const]]))
            Asys = system[0] if system[0].ndim == 2 else system[0][None, :]
            bsys = np.atleast_1d(system[1])
            slb = max(lb, halfspace_lb(Asys, bsys))
            if slb >= best:
                continue
            res = _min_norm_over_region(x, Asys, bsys, p, box)
            if res is None:
                continue
            value, z = res
            if value < best:
                best, witness = value, z
    if witness is None:
        raise NoAdversarialFoundError("no pattern admits a class change")
    witness = _nudge_misclassified(net, x, witness, c0, box)
    return OracleResult(best, witness, PATTERN_ENUM, EXACT_WITHIN_TOL, 1e-5)


def _nudge_misclassified(net, x, z, c0, box):
    """Push a boundary point slightly past the decision surface so the
    returned witness is strictly misclassified whenever possible."""
    if predict(net, z) != c0:
        return z
    direction = z - x
    nrm = vector_norm(direction, 2.0)
    if nrm == 0.0:
        return z
    direction = direction / nrm
    for k in range(9):
        probe = z + (1e-9 * 10 ** k) * direction
        if box is not None:
            probe = box.clip(probe)
        if predict(net, probe) != c0:
            return probe
    return z
