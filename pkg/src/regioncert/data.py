"""Dataset loading and generation.

Covers the big-endian IDX image/label format (magics 0x00000803 and
0x00000801), deterministic 2D synthetic sets in the unit square, and a
synthetic 28x28 two-digit image generator for pipeline tests at realistic
input dimension.
"""

from __future__ import annotations

import struct

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

SYNTHETIC_KINDS = ("two_gaussians", "moons")


class IdxFormatError(Exception):
    """Raised for bad magic numbers, truncation, or count mismatches."""


def _read_exact(fh, count, path):
    buf = fh.read(count)
    if len(buf) != count:
        raise IdxFormatError(f"{path}: truncated file")
    return buf


def _load_idx_array(path, magic, ndim):
    with open(path, "rb") as fh:
        header = _read_exact(fh, 4 * (1 + ndim), path)
        values = struct.unpack(f">{1 + ndim}i", header)
        if values[0] != magic:
            raise IdxFormatError(
                f"{path}: bad magic 0x{values[0]:08x}, expected 0x{magic:08x}"
            )
        shape = values[1:]
        if any(s < 0 for s in shape):
            raise IdxFormatError(f"{path}: negative dimension in header")
        count = int(np.prod(shape, dtype=np.int64))
        data = _read_exact(fh, count, path)
        if fh.read(1):
            raise IdxFormatError(f"{path}: trailing bytes after data")
    return np.frombuffer(data, dtype=np.uint8).reshape(shape)


def load_idx(images_path, labels_path, limit: int = None):
    """Load an IDX image/label pair as (X, y) with X in [0,1]^(rows*cols).

    Images are flattened row-major and scaled by 1/255.
    """
    images = _load_idx_array(images_path, IMAGE_MAGIC, 3)
    labels = _load_idx_array(labels_path, LABEL_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels"
        )
    if limit is not None:
        images = images[:limit]
        labels = labels[:limit]
    X = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return X, labels.astype(np.int64)


def save_idx_images(path, images):
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim != 3:
        raise ValueError("images must have shape (n, rows, cols)")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">4i", IMAGE_MAGIC, *images.shape))
        fh.write(images.tobytes())


def save_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    if labels.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">2i", LABEL_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def gen_synthetic(kind: str, n: int, seed: int = 0):
    """Deterministic balanced 2-class 2D dataset, clipped to [0,1]^2.

    ``two_gaussians``: well separated blobs; ``moons``: two interleaved
    arcs whose decision boundary is curved.
    """
    if kind not in SYNTHETIC_KINDS:
        raise ValueError(f"unknown kind {kind!r}; choose from {SYNTHETIC_KINDS}")
    if n < 2:
        raise ValueError("need at least 2 points")
    rng = np.random.default_rng(seed)
    half = n // 2
    if kind == "two_gaussians":
        a = rng.normal([0.3, 0.3], 0.08, (half, 2))
        b = rng.normal([0.7, 0.7], 0.08, (n - half, 2))
    else:
        t = rng.uniform(0.0, np.pi, half)
        a = np.c_[0.5 + 0.35 * np.cos(t), 0.45 + 0.35 * np.sin(t)]
        a = a + rng.normal(0.0, 0.04, (half, 2))
        t = rng.uniform(0.0, np.pi, n - half)
        b = np.c_[0.5 - 0.35 * np.cos(t), 0.55 - 0.35 * np.sin(t)]
        b = b + rng.normal(0.0, 0.04, (n - half, 2))
    X = np.vstack([a, b])
    y = np.array([0] * half + [1] * (n - half), dtype=np.int64)
    per = rng.permutation(n)
    return np.clip(X[per], 0.0, 1.0), y[per]


def _render_zero(img, rng):
    cy = 14.0 + rng.uniform(-2.0, 2.0)
    cx = 14.0 + rng.uniform(-2.0, 2.0)
    ry = rng.uniform(7.0, 9.5)
    rx = rng.uniform(4.5, 7.0)
    thick = rng.uniform(0.12, 0.2)
    ii, jj = np.mgrid[0:28, 0:28]
    r = np.sqrt(((ii - cy) / ry) ** 2 + ((jj - cx) / rx) ** 2)
    ring = np.clip(1.0 - np.abs(r - 1.0) / thick, 0.0, 1.0)
    img += 255.0 * ring


def _render_one(img, rng):
    c = 14.0 + rng.uniform(-3.0, 3.0)
    width = rng.uniform(1.2, 2.2)
    slant = rng.uniform(-0.15, 0.15)
    top = int(rng.uniform(3, 6))
    bot = int(rng.uniform(22, 25))
    ii, jj = np.mgrid[0:28, 0:28]
    center = c + slant * (ii - 14.0)
    bar = np.clip(1.0 - np.abs(jj - center) / width, 0.0, 1.0)
    bar[(ii < top) | (ii > bot)] = 0.0
    img += 255.0 * bar


def gen_digits(n: int, seed: int = 0):
    """Synthetic 28x28 grayscale digits (class 0: ellipse ring, class 1:
    bar), with jittered geometry and pixel noise.  Returns (images uint8
    of shape (n, 28, 28), labels int64)."""
    if n < 2:
        raise ValueError("need at least 2 points")
    rng = np.random.default_rng(seed)
    half = n // 2
    labels = np.array([0] * half + [1] * (n - half), dtype=np.int64)
    images = np.zeros((n, 28, 28), dtype=np.float64)
    for i in range(n):
        if labels[i] == 0:
            _render_zero(images[i], rng)
        else:
            _render_one(images[i], rng)
        images[i] += rng.normal(0.0, 8.0, (28, 28))
    images = np.clip(images, 0.0, 255.0).astype(np.uint8)
    per = rng.permutation(n)
    return images[per], labels[per]
