"""Weight interchange format (JSON, format_version 1) and random init.

Floats are stored as decimal strings with 17 significant digits, which
round-trips IEEE doubles exactly, so save -> load is bit-identical.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ParseError, ShapeMismatch, VersionMismatch
from .gnn import GCN, GIN, GINLayer, ModelSpec

WEIGHT_FORMAT_VERSION = 1


def _encode(arr: np.ndarray) -> dict:
    return {
        "shape": list(arr.shape),
        "data": [format(float(v), ".17g") for v in arr.reshape(-1)],
    }


def _decode(obj: dict) -> np.ndarray:
    shape = tuple(int(s) for s in obj["shape"])
    data = np.array([float(v) for v in obj["data"]])
    if data.size != int(np.prod(shape)):
        raise ShapeMismatch(
            f"payload length {data.size} does not match shape {shape}")
    return data.reshape(shape)


def save_model(spec: ModelSpec, path) -> None:
    doc = {
        "format_version": WEIGHT_FORMAT_VERSION,
        "architecture": spec.architecture,
        "pooling": spec.pooling,
        "classifier": _encode(spec.classifier),
        "metadata": {
            "n_classes": spec.n_classes,
            "hidden_sizes": _hidden_sizes(spec),
        },
    }
    if spec.architecture == GCN:
        doc["layers"] = [_encode(w) for w in spec.layers]
    else:
        doc["layers"] = [
            {"w1": _encode(l.w1), "w2": _encode(l.w2),
             "eps": format(float(l.eps), ".17g")}
            for l in spec.layers
        ]
    with open(path, "w") as fh:
        json.dump(doc, fh)


def _hidden_sizes(spec: ModelSpec) -> list:
    if spec.architecture == GCN:
        return [int(w.shape[1]) for w in spec.layers]
    return [int(l.w2.shape[1]) for l in spec.layers]


def load_model(path) -> ModelSpec:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, OSError) as exc:
        raise ParseError(f"cannot parse weight file {path}: {exc}") from exc
    version = doc.get("format_version")
    if version != WEIGHT_FORMAT_VERSION:
        raise VersionMismatch(f"unsupported weight format_version {version}")
    try:
        arch = doc["architecture"]
        if arch == GCN:
            layers = tuple(_decode(w) for w in doc["layers"])
        elif arch == GIN:
            layers = tuple(
                GINLayer(_decode(l["w1"]), _decode(l["w2"]), float(l["eps"]))
                for l in doc["layers"])
        else:
            raise ParseError(f"unknown architecture {arch!r}")
        return ModelSpec(architecture=arch, layers=layers,
                         classifier=_decode(doc["classifier"]),
                         pooling=doc["pooling"])
    except ShapeMismatch:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed weight file {path}: {exc}") from exc


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=(fan_in, fan_out))


def random_model(architecture: str, d_in: int, hidden: list | tuple,
                 n_classes: int = 2, seed: int = 0,
                 gin_mlp_hidden: int = 64) -> ModelSpec:
    """Glorot-uniform random weights, deterministic per seed.

    ``hidden`` lists the per-layer output widths; GIN layers use an MLP
    with ``gin_mlp_hidden`` hidden units.
    """
    if n_classes < 2:
        raise ValueError("need at least two classes")
    rng = np.random.default_rng(seed)
    if architecture == GCN:
        dims = [d_in, *hidden]
        layers = tuple(_glorot(rng, a, b) for a, b in zip(dims, dims[1:]))
        pooling = "mean"
    elif architecture == GIN:
        dims = [d_in, *hidden]
        layers = tuple(
            GINLayer(_glorot(rng, a, gin_mlp_hidden),
                     _glorot(rng, gin_mlp_hidden, b),
                     eps=float(rng.uniform(-0.1, 0.1)))
            for a, b in zip(dims, dims[1:]))
        pooling = "sum"
    else:
        raise ValueError(f"unknown architecture {architecture!r}")
    classifier = _glorot(rng, dims[-1], n_classes)
    return ModelSpec(architecture=architecture, layers=layers,
                     classifier=classifier, pooling=pooling)
