"""Model persistence as JSON.

Parameters are stored as row-major float lists; Python's shortest-repr
float serialization makes save -> load reproduce every double bitwise.
"""

from __future__ import annotations

import json

import numpy as np

from .network import Network

FORMAT_VERSION = 1


class ModelFormatError(Exception):
    """Raised for unreadable, malformed, or version-mismatched model files."""


def save_model(path, net: Network, metadata: dict = None):
    layers = []
    for w, b in zip(net.weights, net.biases):
        layers.append({
            "rows": int(w.shape[0]),
            "cols": int(w.shape[1]),
            "weights": w.ravel().tolist(),
            "biases": b.tolist(),
        })
    doc = {
        "format_version": FORMAT_VERSION,
        "input_dim": net.input_dim,
        "num_classes": net.num_classes,
        "layers": layers,
        "metadata": dict(metadata or {}),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> Network:
    net, _ = load_model_with_metadata(path)
    return net


def load_model_with_metadata(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: expected a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: format_version {version!r}, expected {FORMAT_VERSION}"
        )
    try:
        weights, biases = [], []
        for layer in doc["layers"]:
            rows, cols = int(layer["rows"]), int(layer["cols"])
            w = np.array(layer["weights"], dtype=np.float64).reshape(rows, cols)
            b = np.array(layer["biases"], dtype=np.float64)
            if b.shape != (rows,):
                raise ModelFormatError(f"{path}: bias length != rows")
            weights.append(w)
            biases.append(b)
        net = Network(tuple(weights), tuple(biases))
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
    if net.input_dim != doc.get("input_dim") or net.num_classes != doc.get("num_classes"):
        raise ModelFormatError(f"{path}: header dims disagree with layers")
    return net, doc.get("metadata", {})
