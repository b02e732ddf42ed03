"""Synthetic labeled graphs and the shared graph file format."""

from __future__ import annotations

import itertools
import json

import numpy as np

from .config import DatasetConfig

GRAPH_FORMAT_VERSION = 1


def random_adjacency(n: int, avg_degree: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Uniform simple graph with floor(n * avg_degree / 2) edges and no
    isolated nodes (repaired by attaching them to a random neighbor)."""
    pairs = list(itertools.combinations(range(n), 2))
    m = int(n * avg_degree // 2)
    if m > len(pairs):
        raise ValueError(f"avg_degree {avg_degree} infeasible for n = {n}")
    adj = np.zeros((n, n))
    for idx in rng.choice(len(pairs), size=m, replace=False):
        i, j = pairs[idx]
        adj[i, j] = adj[j, i] = 1.0
    deg = adj.sum(1)
    for v in np.flatnonzero(deg == 0):
        u = int(rng.integers(n - 1))
        u = u if u < v else u + 1
        adj[v, u] = adj[u, v] = 1.0
    return adj


def make_dataset(cfg: DatasetConfig, rng: np.random.Generator):
    """List of (adjacency, features, label) with balanced classes."""
    samples = []
    for index in range(cfg.n_graphs):
        label = index % 2
        adj = random_adjacency(cfg.n_nodes, cfg.avg_degree, rng)
        mu = np.zeros((cfg.n_nodes, cfg.d))
        if label == 1:
            mask = rng.random((cfg.n_nodes, cfg.d)) < cfg.flip_prob
            mu[mask] = cfg.delta
        x = mu + rng.standard_normal((cfg.n_nodes, cfg.d))
        samples.append((adj, x, label))
    split = int(round(cfg.n_graphs * (1.0 - cfg.eval_fraction)))
    return samples[:split], samples[split:]


def save_graph_file(path, adjacency: np.ndarray, features: np.ndarray) -> None:
    """Write the engine's JSON graph format (format_version 1)."""
    n, d = features.shape
    edges = [[int(i), int(j)]
             for i, j in np.argwhere(np.triu(adjacency, 1) == 1)]
    doc = {
        "format_version": GRAPH_FORMAT_VERSION,
        "n": n,
        "d": d,
        "edges": edges,
        "features": [float(v) for v in features.reshape(-1)],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
