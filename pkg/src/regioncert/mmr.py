"""Margin regularized training for ReLU classifiers.

The regularizer pushes the linear-region boundaries and the decision
boundary away from every training point, measured in an lp norm:

    pen(x) = (1/k_B) sum over the k_B smallest boundary distances of
                 max(0, 1 - d / gamma_B)
           + (1/k_D) sum over the k_D smallest signed decision distances of
                 max(0, 1 - dbar / gamma_D)

where for hidden unit j of layer l with region coefficients V, a

    d_{l,j}  = |f_j(l)(x)| / ||V_j(l)||_q        (q the dual exponent of p)
    dbar_s   = (f_y(x) - f_s(x)) / ||V_y - V_s||_q   for classes s != y.

Distances are piecewise-smooth in the parameters; gradients are computed
manually by splitting each distance into its numerator (a network output,
handled by ordinary masked backpropagation) and its denominator (a dual
norm of region coefficients, handled by backpropagating through the
coefficient recursion V(k) = W(k) S(k-1) V(k-1)).

Training is plain Adam over mean cross-entropy plus ``lam`` times the mean
penalty, with a linear ramp on ``lam``, a linear decay of k_B, and a late
learning-rate drop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attack import AttackConfig, pgd_attack
from .geometry import Box, check_p, dual_exponent, vector_norm
from .network import (
    Network,
    affine_coefficients,
    activation_pattern,
    forward,
    forward_batch,
    predict_batch,
    random_network,
)


@dataclass(frozen=True)
class MMRConfig:
    """Margin regularizer settings.

    ``k_B_start_frac`` / ``k_B_end_frac`` give the fraction of hidden units
    whose boundary terms are penalized, decayed linearly over training.
    ``k_D`` defaults to all competing classes.  ``warmup_epochs`` ramps
    ``lam`` linearly from lam/10 to lam.
    """

    gamma_B: float
    gamma_D: float
    lam: float
    p: float = 2.0
    k_B_start_frac: float = 0.10
    k_B_end_frac: float = 0.02
    k_D: int = None
    warmup_epochs: int = 10

    def __post_init__(self):
        if self.gamma_B <= 0 or self.gamma_D <= 0:
            raise ValueError("margins must be positive")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        object.__setattr__(self, "p", check_p(self.p))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 128
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    adversarial_mix: bool = False
    attack_eps: float = 0.1
    attack_iters: int = 10
    init_scale: float = 1.0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def _softmax(logits):
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def cross_entropy(logits, label: int) -> float:
    logits = np.asarray(logits, dtype=np.float64)
    m = logits.max()
    return float(m + math.log(np.exp(logits - m).sum()) - logits[label])


def _dual_norm_gradient(v, q):
    """A (sub)gradient of ||.||_q at v; zeros when v is the zero vector."""
    if q == 2.0:
        n = vector_norm(v, 2.0)
        return v / n if n > 0 else np.zeros_like(v)
    if q == 1.0:
        return np.sign(v)
    g = np.zeros_like(v)
    if v.any():
        j = int(np.argmax(np.abs(v)))
        g[j] = math.copysign(1.0, v[j])
    return g


def boundary_distances(net: Network, x, p) -> np.ndarray:
    """lp distances from x to every hidden-unit plane of its region,
    flattened in (layer, unit) order.  Dead planes give inf."""
    p = check_p(p)
    q = dual_exponent(p)
    trace = forward(net, x)
    affine = affine_coefficients(net, activation_pattern(trace))
    out = []
    for l in range(net.num_hidden_layers):
        V = affine.V[l]
        norms = np.array([vector_norm(row, q) for row in V])
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(norms > 0, np.abs(trace.preactivations[l]) / norms, math.inf)
        out.append(d)
    return np.concatenate(out) if out else np.zeros(0)


def signed_decision_distances(net: Network, x, y: int, p) -> np.ndarray:
    """Signed lp distances (f_y - f_s) / ||V_y - V_s||_q for all s != y.

    Negative entries mean the region's affine map misclassifies x.  Dead
    differences give +/- inf by the sign of the logit gap."""
    p = check_p(p)
    q = dual_exponent(p)
    trace = forward(net, x)
    affine = affine_coefficients(net, activation_pattern(trace))
    V = affine.V[-1]
    f = trace.logits
    y = int(y)
    out = []
    for s in range(net.num_classes):
        if s == y:
            continue
        w = V[y] - V[s]
        r = vector_norm(w, q)
        gap = f[y] - f[s]
        out.append(gap / r if r > 0 else math.copysign(math.inf, gap) if gap != 0 else 0.0)
    return np.array(out)


def _k_smallest(values, k):
    order = np.argsort(values, kind="stable")
    return order[: max(0, min(k, len(values)))]


def kmmr_penalty(net: Network, x, y: int, cfg: MMRConfig,
                 k_B: int, k_D: int) -> float:
    """Penalty restricted to the k_B / k_D smallest distances (before the
    hinge is applied)."""
    dB = boundary_distances(net, x, cfg.p)
    dD = signed_decision_distances(net, x, y, cfg.p)
    selB = _k_smallest(dB, k_B)
    selD = _k_smallest(dD, k_D)
    pen = 0.0
    if len(selB):
        with np.errstate(invalid="ignore"):
            pen += float(np.maximum(0.0, 1.0 - dB[selB] / cfg.gamma_B).sum()) / len(selB)
    if len(selD):
        hinge = np.maximum(0.0, 1.0 - dD[selD] / cfg.gamma_D)
        hinge = np.where(np.isfinite(hinge), hinge, 0.0)
        pen += float(hinge.sum()) / len(selD)
    return pen


def mmr_penalty(net: Network, x, y: int, cfg: MMRConfig) -> float:
    """Full penalty: every hidden unit and every competing class."""
    n = sum(net.hidden_dims)
    return kmmr_penalty(net, x, y, cfg, n, net.num_classes - 1)


def _resolve_k(net: Network, cfg: MMRConfig, k_B, k_D):
    n = sum(net.hidden_dims)
    if k_B is None:
        k_B = n
    if k_D is None:
        k_D = cfg.k_D if cfg.k_D is not None else net.num_classes - 1
    return max(1, min(int(k_B), n)), max(1, min(int(k_D), net.num_classes - 1))


def objective(net: Network, X, y, cfg: MMRConfig = None,
              k_B: int = None, k_D: int = None, lam: float = None) -> float:
    """Mean cross-entropy plus lam times the mean margin penalty."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    logits = forward_batch(net, X)
    total = sum(cross_entropy(logits[i], int(y[i])) for i in range(X.shape[0]))
    if cfg is not None and cfg.lam >= 0:
        lam = cfg.lam if lam is None else lam
        if lam > 0:
            k_B, k_D = _resolve_k(net, cfg, k_B, k_D)
            total += lam * sum(
                kmmr_penalty(net, X[i], int(y[i]), cfg, k_B, k_D)
                for i in range(X.shape[0])
            )
    return total / max(1, X.shape[0])


def _zeros_like_params(net: Network):
    gW = [np.zeros_like(w) for w in net.weights]
    gb = [np.zeros_like(b) for b in net.biases]
    return gW, gb


def _accumulate_sample(net, x, y, cfg, k_B, k_D, lam, gW, gb):
    """Add one sample's gradient of CE + lam * penalty into gW / gb.

    Returns (ce, penalty).  The penalty gradient has two routes per term:
    preactivation seeds (numerators) and region-coefficient matrices
    (denominators); both are backpropagated below.
    """
    L = net.num_hidden_layers
    trace = forward(net, x)
    pattern = activation_pattern(trace)
    masks = [a.astype(np.float64) for a in pattern.active]

    ce = cross_entropy(trace.logits, y)
    s_out = _softmax(trace.logits)
    s_out[y] -= 1.0

    seeds = [np.zeros(n) for n in net.hidden_dims]
    M = [None] * L
    M_out = None
    pen = 0.0

    if cfg is not None and lam > 0:
        affine = affine_coefficients(net, pattern)
        q = dual_exponent(cfg.p)
        # Boundary terms.
        dists = []
        for l in range(L):
            V = affine.V[l]
            norms = np.array([vector_norm(row, q) for row in V])
            f = trace.preactivations[l]
            with np.errstate(divide="ignore", invalid="ignore"):
                d = np.where(norms > 0, np.abs(f) / norms, math.inf)
            dists.append((d, norms))
        flat = np.concatenate([d for d, _ in dists])
        widths = list(net.hidden_dims)
        offsets = np.cumsum([0] + widths)
        selB = _k_smallest(flat, k_B)
        if len(selB):
            coef = -lam / (len(selB) * cfg.gamma_B)
            for idx in selB:
                l = int(np.searchsorted(offsets, idx, side="right")) - 1
                j = int(idx - offsets[l])
                d, norms = dists[l]
                dj, r = d[j], norms[j]
                if not math.isfinite(dj):
                    continue
                pen += max(0.0, 1.0 - dj / cfg.gamma_B) / len(selB)
                if dj >= cfg.gamma_B:
                    continue
                fj = trace.preactivations[l][j]
                if fj != 0.0:
                    seeds[l][j] += coef * math.copysign(1.0, fj) / r
                if dj > 0.0:
                    u = _dual_norm_gradient(affine.V[l][j], q)
                    if M[l] is None:
                        M[l] = np.zeros_like(affine.V[l])
                    M[l][j] += -coef * dj / r * u

        # Decision terms.
        Vout = affine.V[-1]
        f = trace.logits
        others = [s for s in range(net.num_classes) if s != y]
        dbar = np.empty(len(others))
        rows = []
        for i, s in enumerate(others):
            w = Vout[y] - Vout[s]
            r = vector_norm(w, q)
            gap = f[y] - f[s]
            dbar[i] = gap / r if r > 0 else (math.copysign(math.inf, gap) if gap != 0 else 0.0)
            rows.append((w, r))
        selD = _k_smallest(dbar, k_D)
        if len(selD):
            coef = -lam / (len(selD) * cfg.gamma_D)
            for i in selD:
                db = dbar[i]
                if not math.isfinite(db):
                    continue
                pen += max(0.0, 1.0 - db / cfg.gamma_D) / len(selD)
                if db >= cfg.gamma_D:
                    continue
                s = others[int(i)]
                w, r = rows[int(i)]
                if r <= 0:
                    continue
                s_out[y] += coef / r
                s_out[s] -= coef / r
                u = _dual_norm_gradient(w, q)
                if M_out is None:
                    M_out = np.zeros_like(Vout)
                M_out[y] += -coef * db / r * u
                M_out[s] -= -coef * db / r * u

    # Backpropagate the preactivation seeds (CE plus all numerators).
    posts = [np.asarray(x, dtype=np.float64), *trace.postactivations]
    phi = s_out
    gW[L] += np.outer(phi, posts[L])
    gb[L] += phi
    for l in range(L - 1, -1, -1):
        phi = seeds[l] + masks[l] * (net.weights[l + 1].T @ phi)
        gW[l] += np.outer(phi, posts[l])
        gb[l] += phi

    # Backpropagate the coefficient-matrix route (denominators) through
    # V(k) = W(k) S(k-1) V(k-1).
    if M_out is not None or any(m is not None for m in M):
        G = M_out if M_out is not None else np.zeros_like(affine.V[-1])
        for k in range(L, 0, -1):
            gW[k] += G @ (masks[k - 1][:, None] * affine.V[k - 1]).T
            G = masks[k - 1][:, None] * (net.weights[k].T @ G)
            if M[k - 1] is not None:
                G = G + M[k - 1]
        gW[0] += G

    return ce, pen


def objective_gradient(net: Network, X, y, cfg: MMRConfig = None,
                       k_B: int = None, k_D: int = None, lam: float = None):
    """Value and parameter gradients of :func:`objective`.

    Returns (value, grad_weights, grad_biases) with the gradients averaged
    over the batch.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    n = X.shape[0]
    gW, gb = _zeros_like_params(net)
    use_pen = cfg is not None and (lam if lam is not None else cfg.lam) > 0
    if use_pen:
        k_B, k_D = _resolve_k(net, cfg, k_B, k_D)
        lam = cfg.lam if lam is None else lam
    else:
        lam = 0.0
    total = 0.0
    for i in range(n):
        ce, pen = _accumulate_sample(net, X[i], int(y[i]), cfg if use_pen else None,
                                     k_B, k_D, lam, gW, gb)
        total += ce + lam * pen
    inv = 1.0 / max(1, n)
    return total * inv, [g * inv for g in gW], [g * inv for g in gb]


def flatten_params(net: Network) -> np.ndarray:
    parts = []
    for w, b in zip(net.weights, net.biases):
        parts.append(w.ravel())
        parts.append(b.ravel())
    return np.concatenate(parts)


def network_from_flat(template: Network, vec) -> Network:
    vec = np.asarray(vec, dtype=np.float64)
    weights, biases = [], []
    pos = 0
    for w, b in zip(template.weights, template.biases):
        weights.append(vec[pos:pos + w.size].reshape(w.shape))
        pos += w.size
        biases.append(vec[pos:pos + b.size].reshape(b.shape))
        pos += b.size
    if pos != vec.size:
        raise ValueError("flat vector length does not match the template")
    return Network(tuple(weights), tuple(biases))


def classification_error(net: Network, X, y) -> float:
    y = np.asarray(y)
    return float(np.mean(predict_batch(net, X) != y))


def _schedules(net: Network, mmr: MMRConfig, tcfg: TrainConfig, epoch: int):
    e, E = epoch, tcfg.epochs
    lr = tcfg.learning_rate
    if E >= 10 and e >= E - E // 10:
        lr = lr / 10.0
    if mmr is None:
        return lr, 0.0, 1, 1
    ramp = min(1.0, e / max(1, mmr.warmup_epochs - 1))
    lam = mmr.lam * (0.1 + 0.9 * ramp)
    n = sum(net.hidden_dims)
    t = e / max(1, E - 1)
    frac = mmr.k_B_start_frac + (mmr.k_B_end_frac - mmr.k_B_start_frac) * t
    k_B = max(1, int(round(frac * n)))
    k_D = mmr.k_D if mmr.k_D is not None else net.num_classes - 1
    k_D = max(1, min(k_D, net.num_classes - 1))
    return lr, lam, k_B, k_D


def train(X, y, hidden_dims, tcfg: TrainConfig = TrainConfig(),
          mmr: MMRConfig = None, box: Box = None):
    """Train a fully connected ReLU classifier with Adam.

    When ``mmr`` is given, the margin penalty is added with its lam ramp
    and k_B decay; when ``tcfg.adversarial_mix`` is on, half of every batch
    is replaced by PGD examples at ``tcfg.attack_eps``.  Returns the
    trained network and a per-epoch history of scalars.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("X must be (n, d) and y must be (n,)")
    n, d = X.shape
    num_classes = int(y.max()) + 1 if y.size else 2
    num_classes = max(2, num_classes)

    rng = np.random.default_rng(tcfg.seed)
    net0 = random_network(rng, d, hidden_dims, num_classes, scale=tcfg.init_scale)
    W = [w.copy() for w in net0.weights]
    b = [bi.copy() for bi in net0.biases]

    mW = [np.zeros_like(w) for w in W]
    vW = [np.zeros_like(w) for w in W]
    mb = [np.zeros_like(bi) for bi in b]
    vb = [np.zeros_like(bi) for bi in b]
    step = 0

    history = []
    attack_p = mmr.p if mmr is not None else 2.0

    for epoch in range(tcfg.epochs):
        net = Network(tuple(W), tuple(b))
        lr, lam, k_B, k_D = _schedules(net, mmr, tcfg, epoch)
        order = rng.permutation(n)
        epoch_loss = 0.0
        batches = 0
        for lo in range(0, n, tcfg.batch_size):
            idx = order[lo:lo + tcfg.batch_size]
            Xb, yb = X[idx].copy(), y[idx]
            net = Network(tuple(W), tuple(b))

            if tcfg.adversarial_mix and len(idx) >= 2:
                half = len(idx) // 2
                acfg = AttackConfig(eps=tcfg.attack_eps, p=attack_p,
                                    iters=tcfg.attack_iters, restarts=1,
                                    seed=tcfg.seed)
                for i in range(half):
                    res = pgd_attack(net, Xb[i], int(yb[i]), acfg, box, rng)
                    if res.success:
                        Xb[i] = res.adversarial

            loss, gW, gb = objective_gradient(net, Xb, yb, mmr, k_B, k_D, lam)
            if not (math.isfinite(loss)
                    and all(np.isfinite(g).all() for g in gW)
                    and all(np.isfinite(g).all() for g in gb)):
                continue
            epoch_loss += loss
            batches += 1

            step += 1
            bc1 = 1.0 - tcfg.beta1 ** step
            bc2 = 1.0 - tcfg.beta2 ** step
            for k in range(len(W)):
                mW[k] = tcfg.beta1 * mW[k] + (1 - tcfg.beta1) * gW[k]
                vW[k] = tcfg.beta2 * vW[k] + (1 - tcfg.beta2) * gW[k] ** 2
                W[k] = W[k] - lr * (mW[k] / bc1) / (np.sqrt(vW[k] / bc2) + tcfg.adam_eps)
                mb[k] = tcfg.beta1 * mb[k] + (1 - tcfg.beta1) * gb[k]
                vb[k] = tcfg.beta2 * vb[k] + (1 - tcfg.beta2) * gb[k] ** 2
                b[k] = b[k] - lr * (mb[k] / bc1) / (np.sqrt(vb[k] / bc2) + tcfg.adam_eps)

        net = Network(tuple(W), tuple(b))
        history.append({
            "epoch": epoch,
            "loss": epoch_loss / max(1, batches),
            "train_error": classification_error(net, X, y),
            "lam": lam,
            "k_B": k_B,
            "lr": lr,
        })

    return Network(tuple(W), tuple(b)), history
