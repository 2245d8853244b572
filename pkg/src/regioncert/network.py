"""Fully connected ReLU classifiers and their piecewise-affine structure.

A network with hidden layers l = 1..L and a final linear layer computes

    f(1)(x) = W(1) x + b(1)
    f(k)(x) = W(k) max(0, f(k-1)(x)) + b(k)

and the logits are f(L+1)(x).  On the linear region containing x the map is
affine, f(k)(x) = V(k) x + a(k), where the coefficients are obtained by
freezing the ReLU activation pattern:

    V(1) = W(1),                    a(1) = b(1)
    V(k) = W(k) S(k-1) V(k-1),      a(k) = W(k) S(k-1) a(k-1) + b(k)

with S(l) = diag(1{f(l) > 0}).  Everything here is double precision and
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Preactivations within this tolerance of zero are flagged degenerate: the
# point sits (numerically) on a region face and pattern-based reasoning is
# unreliable there.
DEGENERACY_TOL = 1e-10

REGION = "region"
DECISION = "decision"


def _readonly(arr, dtype=np.float64):
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Network:
    """Parameters of a fully connected ReLU classifier.

    ``weights[k]`` has shape (n_k, n_{k-1}) and ``biases[k]`` shape (n_k,).
    The last layer produces logits (no ReLU).  A single-layer network is a
    linear classifier.
    """

    weights: tuple
    biases: tuple

    def __post_init__(self):
        ws = tuple(_readonly(w) for w in self.weights)
        bs = tuple(_readonly(b) for b in self.biases)
        if len(ws) == 0 or len(ws) != len(bs):
            raise ValueError("need one bias vector per weight matrix")
        for k, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {k}: shapes {w.shape} / {b.shape} inconsistent")
            if k > 0 and w.shape[1] != ws[k - 1].shape[0]:
                raise ValueError(f"layer {k}: input dim {w.shape[1]} != previous width")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {k}: non-finite parameters")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def num_classes(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def num_hidden_layers(self) -> int:
        return len(self.weights) - 1

    @property
    def hidden_dims(self) -> tuple:
        return tuple(w.shape[0] for w in self.weights[:-1])

    @property
    def num_hidden_units(self) -> int:
        return sum(self.hidden_dims)


def random_network(rng, input_dim, hidden_dims, num_classes, scale=1.0) -> Network:
    """He-style random initialization; used by training and by tests."""
    dims = [input_dim, *hidden_dims, num_classes]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.normal(0.0, scale * np.sqrt(2.0 / fan_in), (fan_out, fan_in)))
        biases.append(rng.normal(0.0, 0.1, fan_out))
    return Network(tuple(weights), tuple(biases))


@dataclass(frozen=True)
class ForwardTrace:
    """Per-layer preactivations f(l), postactivations max(0, f(l)), and logits."""

    preactivations: tuple
    postactivations: tuple
    logits: np.ndarray


def forward(net: Network, x) -> ForwardTrace:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_dim,):
        raise ValueError(f"expected input of shape ({net.input_dim},), got {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("non-finite input")
    pre, post = [], []
    h = x
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        f = w @ h + b
        pre.append(_readonly(f))
        h = np.maximum(f, 0.0)
        post.append(_readonly(h))
    logits = net.weights[-1] @ h + net.biases[-1]
    return ForwardTrace(tuple(pre), tuple(post), _readonly(logits))


def forward_batch(net: Network, X) -> np.ndarray:
    """Logits for a batch of rows, shape (n, num_classes)."""
    H = np.asarray(X, dtype=np.float64)
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        H = np.maximum(H @ w.T + b, 0.0)
    return H @ net.weights[-1].T + net.biases[-1]


def predict(net: Network, x) -> int:
    # np.argmax resolves ties toward the lowest class index.
    return int(np.argmax(forward(net, x).logits))


def predict_batch(net: Network, X) -> np.ndarray:
    return np.argmax(forward_batch(net, X), axis=1)


@dataclass(frozen=True)
class ActivationPattern:
    """Per-layer boolean activation masks plus degeneracy flags.

    A unit is ACTIVE iff its preactivation is strictly positive; an exact
    zero counts as INACTIVE.  Units with |preactivation| <= tol are flagged
    degenerate.  Equality and hashing go through :meth:`key`, which encodes
    the active bits only.
    """

    active: tuple
    degenerate: tuple

    def __post_init__(self):
        object.__setattr__(self, "active", tuple(_readonly(a, bool) for a in self.active))
        object.__setattr__(
            self, "degenerate", tuple(_readonly(d, bool) for d in self.degenerate)
        )

    @property
    def is_degenerate(self) -> bool:
        return any(d.any() for d in self.degenerate)

    def key(self) -> bytes:
        return b"".join(np.packbits(a).tobytes() for a in self.active)

    def flip(self, layer: int, unit: int) -> "ActivationPattern":
        """Pattern with one unit's activity toggled (layer is 0-based)."""
        active = [a.copy() for a in self.active]
        active[layer][unit] = not active[layer][unit]
        return ActivationPattern(tuple(active), self.degenerate)


def activation_pattern(trace: ForwardTrace, tol: float = DEGENERACY_TOL) -> ActivationPattern:
    active = tuple(f > 0.0 for f in trace.preactivations)
    degenerate = tuple(np.abs(f) <= tol for f in trace.preactivations)
    return ActivationPattern(active, degenerate)


def pattern_from_bits(net: Network, bits: int) -> ActivationPattern:
    """Pattern built from an integer bit mask over all hidden units, in
    (layer, unit) order with unit 0 of layer 0 as the lowest bit."""
    active = []
    pos = 0
    for width in net.hidden_dims:
        layer = np.zeros(width, dtype=bool)
        for i in range(width):
            layer[i] = (bits >> (pos + i)) & 1
        active.append(layer)
        pos += width
    degenerate = tuple(np.zeros(w, dtype=bool) for w in net.hidden_dims)
    return ActivationPattern(tuple(active), degenerate)


@dataclass(frozen=True)
class AffineMap:
    """Affine coefficients V(k), a(k) of every layer on one linear region."""

    V: tuple
    a: tuple


def affine_coefficients(net: Network, pattern: ActivationPattern) -> AffineMap:
    if len(pattern.active) != net.num_hidden_layers:
        raise ValueError("pattern does not match network depth")
    V = [net.weights[0]]
    a = [net.biases[0]]
    for k in range(1, len(net.weights)):
        mask = pattern.active[k - 1].astype(np.float64)
        if mask.shape != (net.hidden_dims[k - 1],):
            raise ValueError(f"pattern layer {k - 1} has wrong width")
        V.append(net.weights[k] @ (V[k - 1] * mask[:, None]))
        a.append(net.weights[k] @ (a[k - 1] * mask) + net.biases[k])
    return AffineMap(tuple(_readonly(v) for v in V), tuple(_readonly(ai) for ai in a))


def affine_apply(affine: AffineMap, x) -> np.ndarray:
    """Logits of the frozen affine map at x (valid on its region only)."""
    return affine.V[-1] @ np.asarray(x, dtype=np.float64) + affine.a[-1]


@dataclass(frozen=True)
class Hyperplane:
    """Oriented hyperplane {z : normal . z + offset = 0}.

    ``orientation`` is +1/-1; the associated halfspace constraint is
    orientation * (normal . z + offset) >= 0.  ``kind`` is REGION for a
    hidden-unit face (``layer`` 0-based hidden layer, ``unit`` the index
    within it) or DECISION for a class-boundary plane (``unit`` is then the
    competing class; ``layer`` is -1).
    """

    normal: np.ndarray
    offset: float
    orientation: int
    kind: str
    layer: int
    unit: int

    def __post_init__(self):
        object.__setattr__(self, "normal", _readonly(self.normal))
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def is_dead(self) -> bool:
        return not self.normal.any()

    def value_at(self, x) -> float:
        return float(self.normal @ np.asarray(x, dtype=np.float64) + self.offset)


def region_hyperplanes(affine: AffineMap, pattern: ActivationPattern) -> list:
    """One oriented plane per hidden unit; together they cut out the region
    polytope.  Dead planes (zero normal) are included and flagged."""
    planes = []
    for layer, (V, a, act) in enumerate(zip(affine.V[:-1], affine.a[:-1], pattern.active)):
        for unit in range(V.shape[0]):
            orientation = 1 if act[unit] else -1
            planes.append(
                Hyperplane(V[unit], a[unit], orientation, REGION, layer, unit)
            )
    return planes


def decision_hyperplanes(affine: AffineMap, predicted_class: int) -> list:
    """Planes where logit ``predicted_class`` ties each competing class.

    Normals are V(c) - V(s); the halfspace with orientation +1 is where the
    predicted class keeps winning."""
    V, a = affine.V[-1], affine.a[-1]
    c = int(predicted_class)
    if not 0 <= c < V.shape[0]:
        raise ValueError("predicted class out of range")
    planes = []
    for s in range(V.shape[0]):
        if s == c:
            continue
        planes.append(Hyperplane(V[c] - V[s], a[c] - a[s], 1, DECISION, -1, s))
    return planes
