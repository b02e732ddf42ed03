"""Weight export in the engine's JSON format (format_version 1).

Floats are written as 17-significant-digit decimal strings, which
round-trips IEEE doubles exactly; a fixed seed therefore produces a
byte-identical file.
"""

from __future__ import annotations

import json

import numpy as np

from .models import GCNClassifier, GINClassifier

WEIGHT_FORMAT_VERSION = 1


def _encode(arr: np.ndarray) -> dict:
    return {
        "shape": list(arr.shape),
        "data": [format(float(v), ".17g") for v in arr.reshape(-1)],
    }


def _validate(doc: dict) -> None:
    """Schema check before write: shapes chain and payloads match."""
    def shape_of(obj):
        assert len(obj["data"]) == int(np.prod(obj["shape"]))
        return tuple(obj["shape"])

    widths = []
    for layer in doc["layers"]:
        if doc["architecture"] == "gcn":
            widths.append(shape_of(layer))
        else:
            s1, s2 = shape_of(layer["w1"]), shape_of(layer["w2"])
            assert s1[1] == s2[0]
            float(layer["eps"])
            widths.append((s1[0], s2[1]))
    for (_, out), (nxt, _) in zip(widths, widths[1:]):
        assert out == nxt
    assert shape_of(doc["classifier"])[0] == widths[-1][1]


def export_weights(model, path, train_accuracy: float) -> None:
    if isinstance(model, GCNClassifier):
        architecture = "gcn"
        layers = [_encode(w.detach().numpy()) for w in model.weights]
        hidden = [int(w.shape[1]) for w in model.weights]
    elif isinstance(model, GINClassifier):
        architecture = "gin"
        layers = [
            {"w1": _encode(w1.detach().numpy()),
             "w2": _encode(w2.detach().numpy()),
             "eps": format(float(model.eps[k].detach()), ".17g")}
            for k, (w1, w2) in enumerate(zip(model.w1, model.w2))
        ]
        hidden = [int(w2.shape[1]) for w2 in model.w2]
    else:
        raise TypeError(f"cannot export {type(model).__name__}")
    classifier = model.classifier.detach().numpy()
    doc = {
        "format_version": WEIGHT_FORMAT_VERSION,
        "architecture": architecture,
        "pooling": model.pooling,
        "classifier": _encode(classifier),
        "metadata": {
            "n_classes": int(classifier.shape[1]),
            "hidden_sizes": hidden,
            "train_accuracy": train_accuracy,
        },
        "layers": layers,
    }
    _validate(doc)
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_weight_doc(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
