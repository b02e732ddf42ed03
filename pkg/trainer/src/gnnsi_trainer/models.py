"""Torch models mirroring the engine's forward pass exactly.

No bias terms anywhere; ReLU after every linear map; mean pooling for
GCN and sum pooling for GIN; logits are the pooled embedding times the
classifier columns.  All parameters are float64 so exported weights
reproduce the engine's numpy forward to well under 1e-6.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn


def normalize_adjacency(adjacency: np.ndarray) -> np.ndarray:
    deg = adjacency.sum(axis=1)
    if np.any(deg == 0):
        raise ValueError("graph has an isolated node")
    inv_sqrt = 1.0 / np.sqrt(deg)
    return adjacency * np.outer(inv_sqrt, inv_sqrt)


def _glorot(generator: torch.Generator, fan_in: int, fan_out: int) -> nn.Parameter:
    s = (6.0 / (fan_in + fan_out)) ** 0.5
    w = torch.empty(fan_in, fan_out, dtype=torch.float64)
    w.uniform_(-s, s, generator=generator)
    return nn.Parameter(w)


class GCNClassifier(nn.Module):
    def __init__(self, d_in: int, hidden: list, n_classes: int,
                 generator: torch.Generator):
        super().__init__()
        dims = [d_in, *hidden]
        self.weights = nn.ParameterList(
            _glorot(generator, a, b) for a, b in zip(dims, dims[1:]))
        self.classifier = _glorot(generator, dims[-1], n_classes)
        self.pooling = "mean"

    def forward(self, prop: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
        h = x
        for w in self.weights:
            h = torch.relu(prop @ h @ w)
        return h.mean(dim=0) @ self.classifier


class GINClassifier(nn.Module):
    def __init__(self, d_in: int, hidden: list, mlp_hidden: int,
                 n_classes: int, generator: torch.Generator):
        super().__init__()
        dims = [d_in, *hidden]
        self.w1 = nn.ParameterList(
            _glorot(generator, a, mlp_hidden) for a in dims[:-1])
        self.w2 = nn.ParameterList(
            _glorot(generator, mlp_hidden, b) for b in dims[1:])
        eps0 = torch.empty(len(hidden), dtype=torch.float64)
        eps0.uniform_(-0.1, 0.1, generator=generator)
        self.eps = nn.Parameter(eps0)
        self.classifier = _glorot(generator, dims[-1], n_classes)
        self.pooling = "sum"

    def forward(self, prop: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
        h = x
        for k, (w1, w2) in enumerate(zip(self.w1, self.w2)):
            agg = (1.0 + self.eps[k]) * h + prop @ h
            h = torch.relu(torch.relu(agg @ w1) @ w2)
        return h.sum(dim=0) @ self.classifier


def build_model(architecture: str, d_in: int, hidden: list,
                mlp_hidden: int, n_classes: int, seed: int) -> nn.Module:
    generator = torch.Generator().manual_seed(seed)
    if architecture == "gcn":
        return GCNClassifier(d_in, hidden, n_classes, generator)
    if architecture == "gin":
        return GINClassifier(d_in, hidden, mlp_hidden, n_classes, generator)
    raise ValueError(f"unknown architecture {architecture!r}")


def propagation(architecture: str, adjacency: np.ndarray) -> torch.Tensor:
    mat = (normalize_adjacency(adjacency) if architecture == "gcn"
           else adjacency)
    return torch.tensor(mat, dtype=torch.float64)
