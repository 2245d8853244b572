"""Projected gradient descent attacks on ReLU classifiers.

The attack maximizes cross-entropy inside an lp ball around the input,
optionally intersected with a coordinate box.  It is a heuristic upper
bound machine: a successful attack yields an adversarial point whose
perturbation norm upper-bounds the true minimal one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Box, check_p, vector_norm
from .network import Network, forward

_SUPPORTED_ATTACK_P = (2.0, math.inf)


@dataclass(frozen=True)
class AttackConfig:
    """PGD settings.  ``step`` defaults to 2 * eps / iters."""

    eps: float
    p: float = math.inf
    iters: int = 40
    step: float = None
    restarts: int = 1
    seed: int = 0

    def __post_init__(self):
        # eps = 0 degenerates to a clean-prediction check.
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.iters < 1 or self.restarts < 1:
            raise ValueError("iters and restarts must be at least 1")
        p = check_p(self.p)
        if p not in _SUPPORTED_ATTACK_P:
            raise ValueError("attack supports p in {2, inf} only")
        object.__setattr__(self, "p", p)
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be positive when given")

    @property
    def step_size(self) -> float:
        return self.step if self.step is not None else 2.0 * self.eps / self.iters


@dataclass(frozen=True)
class AttackResult:
    success: bool
    adversarial: np.ndarray
    perturbation_norm: float
    restarts_used: int


def _softmax(logits):
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def input_gradient(net: Network, x, label: int) -> np.ndarray:
    """Gradient of the cross-entropy loss at ``x`` with respect to the input.

    Uses the activation pattern at ``x`` (ReLU derivative 0 at exact zeros).
    """
    trace = forward(net, x)
    delta = _softmax(trace.logits)
    delta[label] -= 1.0
    for k in range(net.num_hidden_layers, 0, -1):
        delta = net.weights[k].T @ delta
        delta = delta * (trace.preactivations[k - 1] > 0.0)
    return net.weights[0].T @ delta


def _project(z, x, eps, p, box):
    """A feasible point of the lp ball around x intersected with the box.

    Scaling into the ball and then clipping to the box lands inside both
    sets: since x itself satisfies the box, clipping never increases any
    coordinate's distance to x.
    """
    if p == math.inf:
        lo = x - eps
        hi = x + eps
    else:
        delta = z - x
        nrm = vector_norm(delta, 2.0)
        if nrm > eps:
            z = x + delta * (eps / nrm)
        if box is None:
            return z
        lo = box.lower
        hi = box.upper
    if box is not None and p == math.inf:
        lo = np.maximum(lo, box.lower)
        hi = np.minimum(hi, box.upper)
    return np.clip(z, lo, hi)


def _start_point(x, eps, p, box, rng):
    d = x.shape[0]
    if p == math.inf:
        z = x + rng.uniform(-eps, eps, d)
    else:
        u = rng.normal(0.0, 1.0, d)
        nrm = vector_norm(u, 2.0)
        if nrm == 0.0:
            return x.copy()
        z = x + eps * rng.uniform(0.0, 1.0) ** (1.0 / d) * u / nrm
    return _project(z, x, eps, p, box)


def pgd_attack(net: Network, x, label: int, cfg: AttackConfig,
               box: Box = None, rng=None) -> AttackResult:
    """Multi-restart PGD; returns the smallest-norm success found.

    Restart 0 starts at ``x`` itself; later restarts start at random
    feasible points.  Every projected iterate is checked, so the reported
    perturbation can be smaller than ``cfg.eps``.
    """
    x = np.asarray(x, dtype=np.float64)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    p, eps, step = cfg.p, cfg.eps, cfg.step_size

    best_norm = math.inf
    best_point = None
    best_restart = 0

    def consider(z, restart):
        nonlocal best_norm, best_point, best_restart
        if int(np.argmax(forward(net, z).logits)) != label:
            nrm = vector_norm(z - x, p)
            if nrm < best_norm:
                best_norm, best_point, best_restart = nrm, z.copy(), restart

    for r in range(cfg.restarts):
        z = x.copy() if r == 0 else _start_point(x, eps, p, box, rng)
        consider(z, r)
        if eps == 0.0:
            break
        for _ in range(cfg.iters):
            g = input_gradient(net, z, label)
            gn = vector_norm(g, 2.0)
            if gn == 0.0:
                g = rng.normal(0.0, 1.0, x.shape[0])
                gn = vector_norm(g, 2.0)
                if gn == 0.0:
                    break
            if p == math.inf:
                direction = np.sign(g)
            else:
                direction = g / gn
            z = _project(z + step * direction, x, eps, p, box)
            consider(z, r)

    if best_point is None:
        return AttackResult(False, None, math.inf, cfg.restarts)
    return AttackResult(True, best_point, best_norm, best_restart + 1)


def empirical_robust_error(net: Network, X, y, cfg: AttackConfig,
                           box: Box = None) -> float:
    """Fraction of points misclassified or successfully attacked at cfg.eps.

    This is an empirical lower bound on the true robust error.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    bad = 0
    for i in range(X.shape[0]):
        if int(np.argmax(forward(net, X[i]).logits)) != int(y[i]):
            bad += 1
            continue
        if pgd_attack(net, X[i], int(y[i]), cfg, box).success:
            bad += 1
    return bad / max(1, X.shape[0])


def min_perturbation_upper_bound(net: Network, x, label: int, p,
                                 box: Box = None, eps0: float = 0.1,
                                 iters: int = 40, restarts: int = 3,
                                 seed: int = 0,
                                 bisect_iters: int = 20) -> float:
    """Smallest adversarial perturbation norm PGD can find, via bisection
    on the attack radius.  Returns inf when no attack ever succeeds."""
    x = np.asarray(x, dtype=np.float64)
    p = check_p(p)
    if int(np.argmax(forward(net, x).logits)) != label:
        return 0.0

    def run(eps):
        cfg = AttackConfig(eps=eps, p=p, iters=iters, restarts=restarts,
                           seed=seed)
        return pgd_attack(net, x, label, cfg, box)

    hi = eps0
    res = run(hi)
    grow = 0
    while not res.success and grow < 20:
        hi *= 2.0
        res = run(hi)
        grow += 1
    if not res.success:
        return math.inf

    best = res.perturbation_norm
    lo = 0.0
    for _ in range(bisect_iters):
        mid = 0.5 * (lo + best)
        if mid <= 0.0:
            break
        res = run(mid)
        if res.success:
            best = min(best, res.perturbation_norm)
        else:
            lo = mid
    return best
