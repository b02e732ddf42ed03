"""Graph and feature containers, covariance models, and file I/O.

Vectorization is node-major everywhere: vec(X) stacks the feature rows
x_1, ..., x_n into a single vector of length n*d.  Kronecker covariances
follow the same convention, Sigma = Sigma_space (x) Sigma_feature.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, IsolatedNode, ParseError, VersionMismatch

GRAPH_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Graph:
    """Undirected unweighted graph given by a dense 0/1 adjacency matrix."""

    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"adjacency must be square, got {a.shape}")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("adjacency entries must be 0 or 1")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency diagonal must be zero")
        object.__setattr__(self, "adjacency", a)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @staticmethod
    def from_edges(n: int, edges) -> "Graph":
        a = np.zeros((n, n))
        for i, j in edges:
            if i == j:
                raise ValueError("self loops are not allowed")
            a[i, j] = a[j, i] = 1.0
        return Graph(a)


@dataclass(frozen=True)
class FeatureMatrix:
    """Node feature matrix, rows are nodes."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DimensionMismatch(f"features must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("features must be finite")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def vec(self) -> np.ndarray:
        """Node-major vectorization (x_1^T, ..., x_n^T)^T."""
        return self.values.reshape(-1).copy()


def unvec(x: np.ndarray, n: int, d: int) -> np.ndarray:
    """Inverse of FeatureMatrix.vec for given n and d."""
    x = np.asarray(x, dtype=float)
    if x.size != n * d:
        raise DimensionMismatch(f"vector of size {x.size} is not n*d = {n * d}")
    return x.reshape(n, d)


@dataclass(frozen=True)
class CovarianceModel:
    """Covariance of vec(X): either a dense nd x nd matrix or a Kronecker pair.

    Kronecker factors follow the node-major convention:
    Sigma = space (n x n) kron feature (d x d).
    """

    dense: np.ndarray | None = None
    space: np.ndarray | None = None
    feature: np.ndarray | None = None
    _chol: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if (self.dense is None) == (self.space is None or self.feature is None):
            raise ValueError("provide either dense or both Kronecker factors")
        for name in ("dense", "space", "feature"):
            m = getattr(self, name)
            if m is not None:
                m = np.asarray(m, dtype=float)
                if m.ndim != 2 or m.shape[0] != m.shape[1]:
                    raise DimensionMismatch(f"{name} factor must be square")
                if not np.allclose(m, m.T, atol=1e-12):
                    raise ValueError(f"{name} factor must be symmetric")
                object.__setattr__(self, name, m)

    @staticmethod
    def from_dense(matrix: np.ndarray) -> "CovarianceModel":
        return CovarianceModel(dense=np.asarray(matrix, dtype=float))

    @staticmethod
    def kronecker(space: np.ndarray, feature: np.ndarray) -> "CovarianceModel":
        return CovarianceModel(space=np.asarray(space, float),
                               feature=np.asarray(feature, float))

    @staticmethod
    def identity(n: int, d: int) -> "CovarianceModel":
        return CovarianceModel.kronecker(np.eye(n), np.eye(d))

    @property
    def is_kronecker(self) -> bool:
        return self.dense is None

    @property
    def dim(self) -> int:
        if self.is_kronecker:
            return self.space.shape[0] * self.feature.shape[0]
        return self.dense.shape[0]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Sigma @ v without materializing the Kronecker product."""
        v = np.asarray(v, dtype=float)
        if v.size != self.dim:
            raise DimensionMismatch(f"vector size {v.size} != {self.dim}")
        if not self.is_kronecker:
            return self.dense @ v
        n, d = self.space.shape[0], self.feature.shape[0]
        m = v.reshape(n, d)
        return (self.space @ m @ self.feature).reshape(-1)

    def materialize(self) -> np.ndarray:
        if self.is_kronecker:
            return np.kron(self.space, self.feature)
        return self.dense.copy()

    def cholesky(self):
        """Lower factors; cached since covariances are immutable."""
        if self._chol is None:
            if self.is_kronecker:
                fac = (np.linalg.cholesky(self.space),
                       np.linalg.cholesky(self.feature))
            else:
                fac = (np.linalg.cholesky(self.dense),)
            object.__setattr__(self, "_chol", fac)
        return self._chol

    def color(self, white: np.ndarray) -> np.ndarray:
        """Apply the lower Cholesky factor to an nd white-noise vector."""
        white = np.asarray(white, dtype=float)
        if white.size != self.dim:
            raise DimensionMismatch(f"vector size {white.size} != {self.dim}")
        fac = self.cholesky()
        if self.is_kronecker:
            ls, lf = fac
            n, d = ls.shape[0], lf.shape[0]
            return (ls @ white.reshape(n, d) @ lf.T).reshape(-1)
        return fac[0] @ white


def cov_matvec(cov: CovarianceModel, v: np.ndarray) -> np.ndarray:
    return cov.matvec(v)


def materialize_covariance(cov: CovarianceModel) -> np.ndarray:
    return cov.materialize()


def normalize_adjacency(g: Graph) -> np.ndarray:
    """Symmetric degree normalization D^{-1/2} A D^{-1/2}."""
    deg = g.degrees()
    if np.any(deg == 0):
        bad = np.flatnonzero(deg == 0).tolist()
        raise IsolatedNode(f"nodes with degree zero: {bad}")
    inv_sqrt = 1.0 / np.sqrt(deg)
    return g.adjacency * np.outer(inv_sqrt, inv_sqrt)


@dataclass(frozen=True)
class SpatioTemporalLayout:
    """Sensor array unrolled over consecutive time segments."""

    sensor_adjacency: np.ndarray
    segment_count: int
    segment_length: int

    def __post_init__(self):
        a = np.asarray(self.sensor_adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch("sensor_adjacency must be square")
        if not np.array_equal(a, a.T) or not np.all((a == 0) | (a == 1)):
            raise ValueError("sensor_adjacency must be a symmetric 0/1 matrix")
        if self.segment_count < 1 or self.segment_length < 1:
            raise ValueError("segment_count and segment_length must be positive")
        object.__setattr__(self, "sensor_adjacency", a)

    @property
    def sensor_count(self) -> int:
        return self.sensor_adjacency.shape[0]

    @property
    def node_count(self) -> int:
        return self.sensor_count * self.segment_count


def build_spatiotemporal_graph(
    layout: SpatioTemporalLayout, series: np.ndarray
) -> tuple[Graph, FeatureMatrix]:
    """Turn multichannel time series into a graph of per-segment nodes.

    Node (s, t) gets index s * segment_count + t.  Edges connect
    consecutive segments of the same sensor and adjacent sensors at the
    same time step.  Features are the raw segment samples; no
    standardization is applied.
    """
    series = np.asarray(series, dtype=float)
    s_cnt, t_cnt, seg = layout.sensor_count, layout.segment_count, layout.segment_length
    if series.shape != (s_cnt, t_cnt * seg):
        raise DimensionMismatch(
            f"series shape {series.shape} != ({s_cnt}, {t_cnt * seg})")
    n = layout.node_count

    def node(s, t):
        return s * t_cnt + t

    a = np.zeros((n, n))
    for s in range(s_cnt):
        for t in range(t_cnt - 1):
            a[node(s, t), node(s, t + 1)] = a[node(s, t + 1), node(s, t)] = 1.0
    adj_pairs = np.argwhere(np.triu(layout.sensor_adjacency, k=1) == 1)
    for s1, s2 in adj_pairs:
        for t in range(t_cnt):
            a[node(s1, t), node(s2, t)] = a[node(s2, t), node(s1, t)] = 1.0

    feats = np.empty((n, seg))
    for s in range(s_cnt):
        for t in range(t_cnt):
            feats[node(s, t)] = series[s, t * seg:(t + 1) * seg]
    return Graph(a), FeatureMatrix(feats)


def save_graph(path, g: Graph, x: FeatureMatrix) -> None:
    """Write the documented JSON graph format (format_version 1)."""
    if x.n != g.n:
        raise DimensionMismatch("feature rows must match node count")
    edges = [[int(i), int(j)] for i, j in np.argwhere(np.triu(g.adjacency, 1) == 1)]
    doc = {
        "format_version": GRAPH_FORMAT_VERSION,
        "n": g.n,
        "d": x.d,
        "edges": edges,
        "features": [float(v) for v in x.vec()],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_graph(path) -> tuple[Graph, FeatureMatrix]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, OSError) as exc:
        raise ParseError(f"cannot parse graph file {path}: {exc}") from exc
    version = doc.get("format_version")
    if version != GRAPH_FORMAT_VERSION:
        raise VersionMismatch(f"unsupported graph format_version {version}")
    try:
        n, d = int(doc["n"]), int(doc["d"])
        g = Graph.from_edges(n, doc["edges"])
        x = FeatureMatrix(unvec(np.array(doc["features"], float), n, d))
    except (KeyError, TypeError, ValueError, DimensionMismatch) as exc:
        raise ParseError(f"malformed graph file {path}: {exc}") from exc
    return g, x
