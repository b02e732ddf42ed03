"""Forward evaluation and exact affine propagation along a line."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnnsi import (AffineTensor, GINLayer, Graph, Interval, ModelSpec,
                   argmax_class_interval, forward, forward_affine,
                   random_graph, random_model, trial_rng)
from gnnsi.errors import DimensionMismatch, IsolatedNode


def _reference_forward(model, g, x):
    """Independent straight-line evaluator used as an oracle."""
    deg = g.adjacency.sum(1)
    prop = (g.adjacency / np.sqrt(np.outer(deg, deg))
            if model.architecture == "gcn" else g.adjacency)
    h = np.array(x, float)
    if model.architecture == "gcn":
        for w in model.layers:
            pre = np.zeros((g.n, w.shape[1]))
            for i in range(g.n):
                for j in range(g.n):
                    pre[i] += prop[i, j] * (h[j] @ w)
            h = np.where(pre > 0, pre, 0.0)
    else:
        for lay in model.layers:
            agg = np.zeros_like(h)
            for i in range(g.n):
                agg[i] = (1 + lay.eps) * h[i]
                for j in range(g.n):
                    agg[i] += prop[i, j] * h[j]
            h1 = np.maximum(agg @ lay.w1, 0.0)
            h = np.maximum(h1 @ lay.w2, 0.0)
    e = h.mean(0) if model.pooling == "mean" else h.sum(0)
    return e @ model.classifier


def _random_instance(seed, n=8, d=5, arch="gcn"):
    rng = trial_rng(seed, 0)
    g = random_graph(n, 3.0, rng)
    model = random_model(arch, d, [10, 10, 10], seed=seed,
                         gin_mlp_hidden=8)
    x = rng.standard_normal((n, d))
    return g, model, x


class TestForward:
    def test_zero_features_zero_logits(self):
        g, model, _ = _random_instance(0)
        logits, acts = forward(model, g, np.zeros((g.n, model.d_in)))
        assert np.all(logits == 0.0)
        assert all(np.all(a == 0.0) for a in acts)

    def test_isolated_node_error(self):
        g = Graph(np.zeros((1, 1)))
        model = ModelSpec("gcn", (np.eye(2),), np.eye(2), "mean")
        with pytest.raises(IsolatedNode):
            forward(model, g, np.ones((1, 2)))

    @pytest.mark.parametrize("arch", ["gcn", "gin"])
    def test_matches_reference_evaluator(self, arch):
        for seed in range(5):
            g, model, x = _random_instance(seed, arch=arch)
            logits, _ = forward(model, g, x)
            np.testing.assert_allclose(logits,
                                       _reference_forward(model, g, x),
                                       rtol=0, atol=1e-10)

    def test_dimension_mismatch(self):
        g, model, _ = _random_instance(1)
        with pytest.raises(DimensionMismatch):
            forward(model, g, np.zeros((g.n, model.d_in + 1)))

    def test_gin_sum_pooling(self):
        g, model, x = _random_instance(2, arch="gin")
        logits, acts = forward(model, g, x)
        np.testing.assert_allclose(logits, acts[-1].sum(0) @ model.classifier)


class TestForwardAffine:
    def test_zero_slope_full_piece(self):
        g, model, x = _random_instance(3)
        a = x.reshape(-1)
        layers, logits, piece = forward_affine(model, g, a, np.zeros_like(a), 0.0)
        assert piece == Interval.full()
        assert all(np.all(t.slope == 0.0) for t in layers)
        direct, _ = forward(model, g, x)
        np.testing.assert_allclose(logits.at(0.0), direct, atol=1e-12)

    def test_single_relu_unit_piece(self):
        # one node with a self-contained GIN layer behaves like a plain
        # ReLU on the pre-activation z (a = 0, b chosen so agg @ w1 = z)
        g = Graph.from_edges(2, [(0, 1)])
        lay = GINLayer(np.eye(1), np.eye(1), eps=0.0)
        model = ModelSpec("gin", (lay,), np.ones((1, 2)), "sum")
        a = np.zeros(2)
        b = np.array([1.0, 0.0])
        _, _, piece = forward_affine(model, g, a, b, 1.0)
        assert piece.lo == pytest.approx(0.0)
        assert piece.hi == np.inf

    @pytest.mark.parametrize("arch", ["gcn", "gin"])
    def test_affine_matches_direct_inside_piece(self, arch):
        max_err = 0.0
        for seed in range(10):
            g, model, x = _random_instance(seed, arch=arch)
            rng = trial_rng(seed, 1)
            a = x.reshape(-1)
            b = rng.standard_normal(a.size)
            z = float(rng.standard_normal())
            layers, logits, piece = forward_affine(model, g, a, b, z)
            lo = max(piece.lo, z - 3.0)
            hi = min(piece.hi, z + 3.0)
            for r in rng.uniform(lo, hi, size=20):
                xr = (a + b * r).reshape(g.n, model.d_in)
                direct_logits, direct_acts = forward(model, g, xr)
                for t, da in zip(layers, direct_acts):
                    max_err = max(max_err, np.abs(t.at(r) - da).max())
                max_err = max(max_err,
                              np.abs(logits.at(r) - direct_logits).max())
        assert max_err < 1e-8

    @pytest.mark.parametrize("arch", ["gcn", "gin"])
    def test_piece_boundary_flips_a_sign(self, arch):
        flips = 0
        checked = 0
        for seed in range(10):
            g, model, x = _random_instance(seed, arch=arch)
            rng = trial_rng(seed, 2)
            a = x.reshape(-1)
            b = rng.standard_normal(a.size)
            z = float(rng.standard_normal())
            _, _, piece = forward_affine(model, g, a, b, z)

            def pattern(r):
                h = (a + b * r).reshape(g.n, model.d_in)
                prop = model.propagation_matrix(g)
                signs = []
                if arch == "gcn":
                    for w in model.layers:
                        pre = prop @ h @ w
                        signs.append((pre > 0).reshape(-1))
                        h = np.maximum(pre, 0.0)
                else:
                    for lay in model.layers:
                        agg = (1 + lay.eps) * h + prop @ h
                        pre1 = agg @ lay.w1
                        signs.append((pre1 > 0).reshape(-1))
                        pre2 = np.maximum(pre1, 0.0) @ lay.w2
                        signs.append((pre2 > 0).reshape(-1))
                        h = np.maximum(pre2, 0.0)
                return np.concatenate(signs)

            for endpoint, outside in ((piece.hi, piece.hi + 1e-6),
                                      (piece.lo, piece.lo - 1e-6)):
                if np.isinf(endpoint):
                    continue
                checked += 1
                if not np.array_equal(pattern(z), pattern(outside)):
                    flips += 1
        assert checked > 0
        assert flips == checked

    def test_gin_aggregation_affine_in_z(self):
        g, model, x = _random_instance(4, arch="gin")
        rng = trial_rng(4, 3)
        a = x.reshape(-1)
        b = rng.standard_normal(a.size)
        lay = model.layers[0]
        prop = g.adjacency

        def agg(r):
            h = (a + b * r).reshape(g.n, model.d_in)
            return (1 + lay.eps) * h + prop @ h

        h_step = 1e-6
        slope_fd = (agg(h_step) - agg(-h_step)) / (2 * h_step)
        slope_exact = agg(1.0) - agg(0.0)
        np.testing.assert_allclose(slope_fd, slope_exact, atol=1e-4)


class TestArgmaxClassInterval:
    def test_constant_logits(self):
        logits = AffineTensor(np.array([1.0, 0.0]), np.zeros(2))
        c, iv = argmax_class_interval(logits, 0.0)
        assert c == 0
        assert iv == Interval.full()

    def test_crossing_at_half(self):
        logits = AffineTensor(np.array([0.0, 1.0]), np.array([1.0, -1.0]))
        c, iv = argmax_class_interval(logits, 1.0)
        assert c == 0
        assert iv.lo == pytest.approx(0.5)
        assert iv.hi == np.inf

    def test_tie_breaks_to_lowest_index(self):
        logits = AffineTensor(np.array([2.0, 2.0]), np.zeros(2))
        c, _ = argmax_class_interval(logits, 0.0)
        assert c == 0

    @given(st.integers(0, 10 ** 9))
    @settings(max_examples=30, deadline=None)
    def test_matches_grid_scan(self, seed):
        rng = np.random.default_rng(seed)
        logits = AffineTensor(rng.standard_normal(3), rng.standard_normal(3))
        z = float(rng.uniform(-2, 2))
        c, iv = argmax_class_interval(logits, z)
        grid = np.arange(-5.0, 5.0, 1e-4)
        winners = np.argmax(logits.offset[None, :]
                            + logits.slope[None, :] * grid[:, None], axis=1)
        inside = (grid >= iv.lo) & (grid <= iv.hi)
        margin = (np.abs(grid - iv.lo) > 1e-4) & (np.abs(grid - iv.hi) > 1e-4)
        same = winners == c
        assert np.all(same[inside & margin])
        assert not np.any(same[(~inside) & margin])
