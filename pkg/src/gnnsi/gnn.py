"""Forward evaluation of GCN/GIN classifiers and exact affine propagation.

Along the line X(z) = a + b*z every activation is affine in z as long as
the ReLU sign pattern and the predicted class stay fixed.  The affine
pass records, for the query point z, both the affine coefficients of
every activation and the interval of z values on which the recorded
sign pattern is valid.

ReLU at exactly zero pre-activation counts as inactive (output 0,
constraint <= 0); this is a deterministic tie-break for a measure-zero
event under the continuous noise model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .graphs import Graph, normalize_adjacency

GCN = "gcn"
GIN = "gin"

_INF = math.inf


@dataclass(frozen=True)
class Interval:
    """Closed interval on the extended real line."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def intersect(self, other: "Interval") -> "Interval":
        return Interval(max(self.lo, other.lo), min(self.hi, other.hi))

    def contains(self, z: float) -> bool:
        return self.lo <= z <= self.hi

    @staticmethod
    def full() -> "Interval":
        return Interval(-_INF, _INF)


# The piece interval [L'_z, U'_z] around a query point is an Interval.
PieceInterval = Interval


@dataclass(frozen=True)
class AffineTensor:
    """Elementwise affine map z -> offset + slope * z."""

    offset: np.ndarray
    slope: np.ndarray

    def __post_init__(self):
        if np.shape(self.offset) != np.shape(self.slope):
            raise DimensionMismatch("offset and slope shapes differ")

    def at(self, z: float) -> np.ndarray:
        return self.offset + self.slope * z


@dataclass(frozen=True)
class GINLayer:
    """One GIN block: sum aggregation followed by a two-layer ReLU MLP."""

    w1: np.ndarray
    w2: np.ndarray
    eps: float

    @property
    def d_in(self) -> int:
        return self.w1.shape[0]

    @property
    def d_out(self) -> int:
        return self.w2.shape[1]


@dataclass(frozen=True)
class ModelSpec:
    """GCN or GIN graph classifier with a linear head.

    GCN layers are weight matrices W_l applied as ReLU(A_norm X W_l);
    GIN layers aggregate (1+eps) h_v + sum_{u in N(v)} h_u and apply a
    two-layer MLP with ReLU after each sublayer.  No bias terms.  The
    classifier maps the pooled embedding (mean for GCN, sum for GIN) to
    per-class logits with the column vectors w_c.
    """

    architecture: str
    layers: tuple
    classifier: np.ndarray
    pooling: str

    def __post_init__(self):
        if self.architecture not in (GCN, GIN):
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.pooling not in ("mean", "sum"):
            raise ValueError(f"unknown pooling {self.pooling!r}")
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "classifier", np.asarray(self.classifier, float))
        if self.classifier.ndim != 2 or self.classifier.shape[1] < 2:
            raise DimensionMismatch("classifier must be d_L x C with C >= 2")
        if not layers:
            raise DimensionMismatch("at least one layer required")
        pairs = []
        if self.architecture == GCN:
            for w in layers:
                pairs.append((w.shape[0], w.shape[1]))
        else:
            for lay in layers:
                pairs.append((lay.w1.shape[0], lay.w1.shape[1]))
                pairs.append((lay.w2.shape[0], lay.w2.shape[1]))
        for (_, out), (nxt, _) in zip(pairs, pairs[1:]):
            if out != nxt:
                raise DimensionMismatch("layer dimensions do not chain")
        if pairs[-1][1] != self.classifier.shape[0]:
            raise DimensionMismatch("classifier does not match final layer width")

    @property
    def d_in(self) -> int:
        if self.architecture == GCN:
            return self.layers[0].shape[0]
        return self.layers[0].d_in

    @property
    def d_out(self) -> int:
        return self.classifier.shape[0]

    @property
    def n_classes(self) -> int:
        return self.classifier.shape[1]

    def propagation_matrix(self, g: Graph) -> np.ndarray:
        """Neighborhood operator: normalized adjacency for GCN, raw for GIN."""
        if self.architecture == GCN:
            return normalize_adjacency(g)
        return g.adjacency


def pool(model: ModelSpec, h: np.ndarray) -> np.ndarray:
    if model.pooling == "mean":
        return h.mean(axis=0)
    return h.sum(axis=0)


def forward(model: ModelSpec, g: Graph, x) -> tuple[np.ndarray, list]:
    """Evaluate the classifier; returns (logits, per-layer activations).

    For GIN the returned activations are the block outputs (post second
    ReLU); hidden MLP activations are internal.
    """
    values = x.values if hasattr(x, "values") else np.asarray(x, float)
    if values.shape[0] != g.n or values.shape[1] != model.d_in:
        raise DimensionMismatch(
            f"features {values.shape} incompatible with n={g.n}, d={model.d_in}")
    prop = model.propagation_matrix(g)
    h = values
    acts = []
    if model.architecture == GCN:
        for w in model.layers:
            h = np.maximum(prop @ h @ w, 0.0)
            acts.append(h)
    else:
        for lay in model.layers:
            agg = (1.0 + lay.eps) * h + prop @ h
            h = np.maximum(np.maximum(agg @ lay.w1, 0.0) @ lay.w2, 0.0)
            acts.append(h)
    logits = pool(model, h) @ model.classifier
    return logits, acts


class _AffineState:
    """Result of one affine pass: coefficients, masks, piece bounds.

    Plain arrays rather than AffineTensor wrappers; this sits in the hot
    loop of the parametric search.
    """

    __slots__ = ("layer_offsets", "layer_slopes", "masks",
                 "logit_offset", "logit_slope", "lo", "hi")

    def __init__(self):
        self.layer_offsets = []
        self.layer_slopes = []
        self.masks = []
        self.lo = -_INF
        self.hi = _INF

    def tighten(self, u: np.ndarray, v: np.ndarray, active: np.ndarray):
        """Fold the half-line constraints of one ReLU bank into [lo, hi].

        Active units require u + v r >= 0, inactive ones u + v r <= 0.
        Units with v == 0 contribute no bound.
        """
        moving = v != 0.0
        if not moving.any():
            return
        t = -u[moving] / v[moving]
        lower = (v[moving] > 0.0) == active[moving]
        if lower.any():
            self.lo = max(self.lo, t[lower].max())
        if not lower.all():
            self.hi = min(self.hi, t[~lower].min())


def _relu_affine(state: _AffineState, u: np.ndarray, v: np.ndarray, z: float):
    active = (u + v * z) > 0.0
    state.tighten(u, v, active)
    state.masks.append(active)
    return np.where(active, u, 0.0), np.where(active, v, 0.0)


def affine_state(model: ModelSpec, prop: np.ndarray,
                 u0: np.ndarray, v0: np.ndarray, z: float) -> _AffineState:
    """Propagate the affine line U + V z through the network at z.

    `prop` is the precomputed propagation matrix; u0, v0 are n x d.
    """
    st = _AffineState()
    u, v = u0, v0
    if model.architecture == GCN:
        for w in model.layers:
            pu = prop @ u @ w
            pv = prop @ v @ w
            u, v = _relu_affine(st, pu, pv, z)
            st.layer_offsets.append(u)
            st.layer_slopes.append(v)
    else:
        for lay in model.layers:
            scale = 1.0 + lay.eps
            au = scale * u + prop @ u
            av = scale * v + prop @ v
            hu, hv = _relu_affine(st, au @ lay.w1, av @ lay.w1, z)
            u, v = _relu_affine(st, hu @ lay.w2, hv @ lay.w2, z)
            st.layer_offsets.append(u)
            st.layer_slopes.append(v)
    if model.pooling == "mean":
        eu = u.mean(axis=0)
        ev = v.mean(axis=0)
    else:
        eu = u.sum(axis=0)
        ev = v.sum(axis=0)
    st.logit_offset = eu @ model.classifier
    st.logit_slope = ev @ model.classifier
    return st


def forward_affine(model: ModelSpec, g: Graph, a: np.ndarray, b: np.ndarray,
                   z: float) -> tuple[list, AffineTensor, PieceInterval]:
    """Affine coefficients of all activations and logits at z.

    Returns (per-layer AffineTensor list, logit AffineTensor, piece),
    where piece is the interval of r values on which the ReLU pattern
    observed at z persists.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    n, d = g.n, model.d_in
    if a.size != n * d or b.size != n * d:
        raise DimensionMismatch(f"a, b must have size n*d = {n * d}")
    prop = model.propagation_matrix(g)
    st = affine_state(model, prop, a.reshape(n, d), b.reshape(n, d), z)
    layers = [AffineTensor(u, v)
              for u, v in zip(st.layer_offsets, st.layer_slopes)]
    logits = AffineTensor(st.logit_offset, st.logit_slope)
    return layers, logits, Interval(st.lo, st.hi)


def argmax_class_interval(logits: AffineTensor, z: float) -> tuple[int, Interval]:
    """Predicted class at z and the interval on which it stays predicted.

    Ties at z break toward the lowest class index.  The interval is the
    intersection of the pairwise inequalities y_c(r) >= y_j(r).
    """
    u, v = logits.offset, logits.slope
    if u.size < 2:
        raise DimensionMismatch("need at least two classes")
    c = int(np.argmax(u + v * z))
    du = u[c] - u
    dv = v[c] - v
    lo, hi = -_INF, _INF
    for j in range(u.size):
        if j == c or dv[j] == 0.0:
            continue
        t = -du[j] / dv[j]
        if dv[j] > 0.0:
            lo = max(lo, t)
        else:
            hi = min(hi, t)
    return c, Interval(lo, hi)
