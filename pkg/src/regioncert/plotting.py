"""Linear-region rasters as portable pixmap images.

Each pixel of a 2D slice is colored by a hash of its activation pattern,
so region boundaries appear as color changes; pixels where the predicted
class changes against a neighbor are darkened to outline the decision
boundary.  No graphics dependencies.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .network import Network

_CHUNK = 4096


def write_ppm(path, rgb):
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("rgb must have shape (height, width, 3)")
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(rgb.tobytes())


def _pattern_color(key: bytes) -> np.ndarray:
    digest = hashlib.blake2b(key, digest_size=3).digest()
    # keep colors away from near-black so boundaries stay visible
    return np.array([64 + (b % 192) for b in digest], dtype=np.uint8)


def _slice_points(resolution, lower, upper, anchors, input_dim):
    ss = np.linspace(0.0, 1.0, resolution) if resolution > 1 else np.array([0.5])
    if anchors is None:
        if input_dim != 2:
            raise ValueError("anchors are required unless the input is 2D")
        xs = lower + (upper - lower) * ss
        ys = lower + (upper - lower) * ss
        pts = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
        return pts
    anchors = np.asarray(anchors, dtype=np.float64)
    if anchors.shape != (3, input_dim):
        raise ValueError(f"anchors must have shape (3, {input_dim})")
    S, T = np.meshgrid(ss, ss)
    flat_s, flat_t = S.ravel()[:, None], T.ravel()[:, None]
    return anchors[0] + flat_s * (anchors[1] - anchors[0]) + flat_t * (anchors[2] - anchors[0])


def pattern_raster(net: Network, resolution: int = 200, lower: float = 0.0,
                   upper: float = 1.0, anchors=None):
    """(rgb image, distinct pattern count) over a 2D slice.

    For 2D inputs the slice is the axis box [lower, upper]^2; otherwise
    ``anchors`` (three input points) span the slice affinely.
    """
    if resolution < 1:
        raise ValueError("resolution must be at least 1")
    pts = _slice_points(resolution, lower, upper, anchors, net.input_dim)
    n = pts.shape[0]
    keys = [None] * n
    preds = np.empty(n, dtype=np.int64)
    for lo in range(0, n, _CHUNK):
        chunk = pts[lo:lo + _CHUNK]
        H = chunk
        packed = []
        for w, b in zip(net.weights[:-1], net.biases[:-1]):
            F = H @ w.T + b
            packed.append(np.packbits(F > 0.0, axis=1))
            H = np.maximum(F, 0.0)
        logits = H @ net.weights[-1].T + net.biases[-1]
        preds[lo:lo + chunk.shape[0]] = np.argmax(logits, axis=1)
        allbits = np.concatenate(packed, axis=1) if packed else np.zeros((chunk.shape[0], 0), np.uint8)
        for i in range(chunk.shape[0]):
            keys[lo + i] = allbits[i].tobytes()

    colors = {}
    rgb = np.empty((resolution, resolution, 3), dtype=np.uint8)
    flat = rgb.reshape(-1, 3)
    for i, key in enumerate(keys):
        color = colors.get(key)
        if color is None:
            color = _pattern_color(key)
            colors[key] = color
        flat[i] = color

    pred_grid = preds.reshape(resolution, resolution)
    edge = np.zeros((resolution, resolution), dtype=bool)
    edge[:, 1:] |= pred_grid[:, 1:] != pred_grid[:, :-1]
    edge[1:, :] |= pred_grid[1:, :] != pred_grid[:-1, :]
    rgb[edge] = 0

    return rgb, len(colors)


def plot_regions(net: Network, path, resolution: int = 200, lower: float = 0.0,
                 upper: float = 1.0, anchors=None) -> int:
    """Write the region raster to ``path`` (PPM); returns the number of
    distinct activation patterns seen."""
    rgb, count = pattern_raster(net, resolution, lower, upper, anchors)
    write_ppm(path, rgb)
    return count
