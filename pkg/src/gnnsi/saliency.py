"""Saliency maps, subgraph selection, and their intervals along the line.

Four piecewise-linear saliency methods are supported:

* ``cam``       ReLU(X_L w_c) from the final embeddings and classifier.
* ``gradcam``   channel-weighted activations of an intermediate layer,
                with analytic channel weights through the fixed ReLU
                pattern.
* ``grad``      per-node sum of the input gradient.
* ``gradinput`` per-node sum of input gradient times input.

Along the line X(z) = a + b z every saliency value is affine in z on
the piece where the network's sign pattern (plus the saliency method's
own ReLU, for CAM and Grad-CAM) and the predicted class are constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSaliency, DimensionMismatch, EmptySide
from .gnn import (GCN, GIN, AffineTensor, Interval, ModelSpec, _AffineState,
                  affine_state, argmax_class_interval)
from .graphs import Graph

METHODS = ("cam", "gradcam", "grad", "gradinput")


@dataclass(frozen=True)
class SaliencyMap:
    """Raw per-node saliency scores."""

    raw: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "raw", np.asarray(self.raw, float).reshape(-1))

    @property
    def degenerate(self) -> bool:
        return self.raw.max() == self.raw.min()

    def normalized(self) -> np.ndarray:
        """Min-max normalization to [0, 1]."""
        lo, hi = self.raw.min(), self.raw.max()
        if hi == lo:
            raise DegenerateSaliency("all saliency values are equal")
        return (self.raw - lo) / (hi - lo)


@dataclass(frozen=True)
class SubgraphSelection:
    """Salient and non-salient node sets for a threshold pair."""

    salient: frozenset
    nonsalient: frozenset
    tau_l: float
    tau_u: float

    def __post_init__(self):
        if not self.tau_l < self.tau_u:
            raise ValueError("tau_l must be below tau_u")
        object.__setattr__(self, "salient", frozenset(self.salient))
        object.__setattr__(self, "nonsalient", frozenset(self.nonsalient))
        if self.salient & self.nonsalient:
            raise ValueError("salient and non-salient sets overlap")

    def same_nodes(self, other: "SubgraphSelection") -> bool:
        return (self.salient == other.salient
                and self.nonsalient == other.nonsalient)


@dataclass(frozen=True)
class SaliencyAffine:
    """Per-node affine saliency s_i(r) = offsets_i + slopes_i * r.

    Valid on ``valid_interval``, which already folds in the network
    piece, the predicted-class inequalities, and any saliency-level
    ReLU constraints.
    """

    offsets: np.ndarray
    slopes: np.ndarray
    valid_interval: Interval

    def at(self, r: float) -> np.ndarray:
        return self.offsets + self.slopes * r


def _membership(values: np.ndarray, tau_l: float, tau_u: float):
    salient = frozenset(np.flatnonzero(values > tau_u).tolist())
    nonsalient = frozenset(np.flatnonzero(values <= tau_l).tolist())
    return salient, nonsalient


def select_subgraphs(s: SaliencyMap, tau_l: float, tau_u: float,
                     normalize: bool = True) -> SubgraphSelection:
    """Threshold the (optionally min-max normalized) saliency map."""
    values = s.normalized() if normalize else s.raw
    salient, nonsalient = _membership(values, tau_l, tau_u)
    if not salient or not nonsalient:
        raise EmptySide("one of the selected node sets is empty")
    return SubgraphSelection(salient, nonsalient, tau_l, tau_u)


def _pool_seed_gradient(model: ModelSpec, n: int, class_index: int) -> np.ndarray:
    """Gradient of the class logit with respect to the final embeddings."""
    coef = 1.0 / n if model.pooling == "mean" else 1.0
    return np.tile(coef * model.classifier[:, class_index], (n, 1))


def _backprop(model: ModelSpec, prop: np.ndarray, masks: list,
              grad_out: np.ndarray, down_to_layer: int) -> np.ndarray:
    """Backpropagate grad_out from the final block output.

    Returns the gradient with respect to the output of block
    ``down_to_layer`` (0-based), or with respect to the input when
    ``down_to_layer == -1``.  The fixed masks make this exact within
    the current linearity piece.
    """
    g = grad_out
    if model.architecture == GCN:
        for k in range(len(model.layers) - 1, down_to_layer, -1):
            g = prop.T @ (g * masks[k]) @ model.layers[k].T
    else:
        for k in range(len(model.layers) - 1, down_to_layer, -1):
            lay = model.layers[k]
            g2 = g * masks[2 * k + 1]
            g1 = (g2 @ lay.w2.T) * masks[2 * k]
            ga = g1 @ lay.w1.T
            g = (1.0 + lay.eps) * ga + prop.T @ ga
    return g


def _relu_saliency(u: np.ndarray, v: np.ndarray, z: float,
                   interval: Interval) -> tuple[np.ndarray, np.ndarray, Interval]:
    """Apply ReLU to an affine node score and fold its sign constraints."""
    st = _AffineState()
    st.lo, st.hi = interval.lo, interval.hi
    active = (u + v * z) > 0.0
    st.tighten(u, v, active)
    return (np.where(active, u, 0.0), np.where(active, v, 0.0),
            Interval(st.lo, st.hi))


def line_saliency(model: ModelSpec, prop: np.ndarray, u0: np.ndarray,
                  v0: np.ndarray, z: float, method: str,
                  layer_index: int | None = None) -> tuple[SaliencyAffine, int]:
    """Affine saliency along the line at query point z.

    Returns the saliency coefficients together with the predicted class
    at z.  The valid interval intersects the network piece, the
    predicted-class interval, and the saliency ReLU constraints.
    """
    if method not in METHODS:
        raise ValueError(f"unknown saliency method {method!r}")
    st = affine_state(model, prop, u0, v0, z)
    cls, cls_interval = argmax_class_interval(
        AffineTensor(st.logit_offset, st.logit_slope), z)
    interval = Interval(st.lo, st.hi).intersect(cls_interval)
    n = u0.shape[0]

    if method == "cam":
        w = model.classifier[:, cls]
        u = st.layer_offsets[-1] @ w
        v = st.layer_slopes[-1] @ w
        c, beta, interval = _relu_saliency(u, v, z, interval)
    elif method == "gradcam":
        if layer_index is None or not 0 <= layer_index < len(model.layers):
            raise ValueError("gradcam requires a valid layer_index")
        grad_l = _backprop(model, prop, st.masks,
                           _pool_seed_gradient(model, n, cls), layer_index)
        alpha = grad_l.mean(axis=0)
        u = st.layer_offsets[layer_index] @ alpha
        v = st.layer_slopes[layer_index] @ alpha
        c, beta, interval = _relu_saliency(u, v, z, interval)
    else:
        g0 = _backprop(model, prop, st.masks,
                       _pool_seed_gradient(model, n, cls), -1)
        if method == "grad":
            c = g0.sum(axis=1)
            beta = np.zeros(n)
        else:
            c = (g0 * u0).sum(axis=1)
            beta = (g0 * v0).sum(axis=1)
    return SaliencyAffine(c, beta, interval), cls


def _pointwise(model: ModelSpec, g: Graph, x, method: str, class_index: int,
               layer_index: int | None = None) -> SaliencyMap:
    values = x.values if hasattr(x, "values") else np.asarray(x, float)
    prop = model.propagation_matrix(g)
    st = affine_state(model, prop, values, np.zeros_like(values), 0.0)
    n = g.n
    if method == "cam":
        pre = st.layer_offsets[-1] @ model.classifier[:, class_index]
        return SaliencyMap(np.maximum(pre, 0.0))
    if method == "gradcam":
        grad_l = _backprop(model, prop, st.masks,
                           _pool_seed_gradient(model, n, class_index), layer_index)
        alpha = grad_l.mean(axis=0)
        return SaliencyMap(np.maximum(st.layer_offsets[layer_index] @ alpha, 0.0))
    g0 = _backprop(model, prop, st.masks,
                   _pool_seed_gradient(model, n, class_index), -1)
    if method == "grad":
        return SaliencyMap(g0.sum(axis=1))
    return SaliencyMap((g0 * values).sum(axis=1))


def cam(activations: list, classifier: np.ndarray, class_index: int) -> SaliencyMap:
    """ReLU(X_L w_c) from the final-layer activations."""
    return SaliencyMap(np.maximum(activations[-1] @ classifier[:, class_index], 0.0))


def grad_cam(model: ModelSpec, g: Graph, x, layer_index: int,
             class_index: int) -> SaliencyMap:
    if not 0 <= layer_index < len(model.layers):
        raise DimensionMismatch(f"layer_index {layer_index} out of range")
    return _pointwise(model, g, x, "gradcam", class_index, layer_index)


def grad(model: ModelSpec, g: Graph, x, class_index: int) -> SaliencyMap:
    return _pointwise(model, g, x, "grad", class_index)


def grad_input(model: ModelSpec, g: Graph, x, class_index: int) -> SaliencyMap:
    return _pointwise(model, g, x, "gradinput", class_index)


def input_gradient(model: ModelSpec, g: Graph, x, class_index: int) -> np.ndarray:
    """Analytic d(logit)/d(input) through the ReLU pattern fixed at x."""
    values = x.values if hasattr(x, "values") else np.asarray(x, float)
    prop = model.propagation_matrix(g)
    st = affine_state(model, prop, values, np.zeros_like(values), 0.0)
    return _backprop(model, prop, st.masks,
                     _pool_seed_gradient(model, g.n, class_index), -1)


def gradcam_channel_weights(model: ModelSpec, g: Graph, x, layer_index: int,
                            class_index: int) -> np.ndarray:
    """Channel weights: per-channel mean of d(logit)/d(layer activations)."""
    values = x.values if hasattr(x, "values") else np.asarray(x, float)
    prop = model.propagation_matrix(g)
    st = affine_state(model, prop, values, np.zeros_like(values), 0.0)
    grad_l = _backprop(model, prop, st.masks,
                       _pool_seed_gradient(model, g.n, class_index), layer_index)
    return grad_l.mean(axis=0)


def _bound(interval: Interval, t: np.ndarray, lower: np.ndarray) -> Interval:
    lo, hi = interval.lo, interval.hi
    if lower.any():
        lo = max(lo, t[lower].max())
    if not lower.all():
        hi = min(hi, t[~lower].min())
    return Interval(lo, hi)


def subgraph_interval_raw(sa: SaliencyAffine, sel: SubgraphSelection,
                          z: float) -> Interval:
    """Interval around z on which raw-threshold membership is unchanged.

    Per-node threshold crossings (tau - c_i)/beta_i bound the interval
    on the side determined by the slope sign and current membership;
    nodes with beta_i = 0 never cross.
    """
    c, beta = sa.offsets, sa.slopes
    interval = sa.valid_interval
    moving = beta != 0.0
    if not moving.any():
        return interval
    idx = np.flatnonzero(moving)
    b = beta[idx]
    in_plus = np.isin(idx, list(sel.salient))
    in_minus = np.isin(idx, list(sel.nonsalient))
    # upper threshold: node stays above/below tau_u
    t_u = (sel.tau_u - c[idx]) / b
    lower = (b > 0.0) == in_plus
    interval = _bound(interval, t_u, lower)
    # lower threshold: node stays inside/outside the non-salient set
    t_l = (sel.tau_l - c[idx]) / b
    lower = (b > 0.0) == ~in_minus
    interval = _bound(interval, t_l, lower)
    return interval


def _anchor_preserving_interval(c: np.ndarray, beta: np.ndarray, p: int,
                                q: int, interval: Interval) -> Interval:
    """Interval on which p stays the argmin and q stays the argmax."""
    for anchor, sign in ((p, 1.0), (q, -1.0)):
        du = sign * (c - c[anchor])
        dv = sign * (beta - beta[anchor])
        moving = dv != 0.0
        if moving.any():
            t = -du[moving] / dv[moving]
            interval = _bound(interval, t, dv[moving] > 0.0)
    return interval


def subgraph_interval_normalized(sa: SaliencyAffine, sel: SubgraphSelection,
                                 z: float) -> Interval:
    """Interval of constant membership under min-max normalization.

    Membership of node i against threshold tau compares the affine
    score s_i(r) with the moving threshold line
    (1 - tau) s_p(r) + tau s_q(r), where p and q are the argmin and
    argmax at z; the interval additionally keeps p and q extremal.
    """
    c, beta = sa.offsets, sa.slopes
    s = sa.at(z)
    p = int(np.argmin(s))
    q = int(np.argmax(s))
    if s[p] == s[q]:
        raise DegenerateSaliency("saliency range collapses at query point")
    interval = _anchor_preserving_interval(c, beta, p, q, sa.valid_interval)

    n = c.size
    for tau, members, member_is_above in (
            (sel.tau_u, sel.salient, True),
            (sel.tau_l, sel.nonsalient, False)):
        c_star = (1.0 - tau) * c[p] + tau * c[q]
        b_star = (1.0 - tau) * beta[p] + tau * beta[q]
        du = c - c_star
        dv = beta - b_star
        in_set = np.zeros(n, dtype=bool)
        in_set[list(members)] = True
        above = in_set if member_is_above else ~in_set
        moving = dv != 0.0
        if moving.any():
            t = -du[moving] / dv[moving]
            lower = (dv[moving] > 0.0) == above[moving]
            interval = _bound(interval, t, lower)
    return interval
