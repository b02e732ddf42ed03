"""Saliency maps, thresholded selection, and membership intervals."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnnsi import (Graph, Interval, SaliencyAffine, SaliencyMap,
                   cam, forward, grad, grad_cam, grad_input,
                   gradcam_channel_weights, input_gradient, random_graph,
                   random_model, select_subgraphs, subgraph_interval_normalized,
                   subgraph_interval_raw, trial_rng)
from gnnsi.errors import DegenerateSaliency, EmptySide
from gnnsi.saliency import SubgraphSelection, _membership, line_saliency


def _instance(seed, n=10, d=4, arch="gcn"):
    rng = trial_rng(seed, 0)
    g = random_graph(n, 3.0, rng)
    model = random_model(arch, d, [6, 6], seed=seed, gin_mlp_hidden=6)
    x = rng.standard_normal((n, d))
    return g, model, x


class TestCam:
    def test_all_negative_scores_degenerate(self):
        acts = [np.full((3, 2), 1.0)]
        classifier = np.array([[-1.0, 0.0], [-1.0, 0.0]])
        smap = cam(acts, classifier, 0)
        assert np.all(smap.raw == 0.0)
        assert smap.degenerate

    def test_single_node_unit_basis(self):
        acts = [np.ones((1, 3))]
        classifier = np.zeros((3, 2))
        classifier[0, 0] = 1.0
        smap = cam(acts, classifier, 0)
        np.testing.assert_array_equal(smap.raw, [1.0])

    def test_matches_independent_recomputation(self):
        g, model, x = _instance(0)
        _, acts = forward(model, g, x)
        smap = cam(acts, model.classifier, 1)
        expected = np.maximum(acts[-1] @ model.classifier[:, 1], 0.0)
        np.testing.assert_allclose(smap.raw, expected, atol=1e-12)

    def test_nonnegative(self):
        for seed in range(5):
            g, model, x = _instance(seed)
            _, acts = forward(model, g, x)
            assert np.all(cam(acts, model.classifier, 0).raw >= 0.0)


class TestGradCam:
    def test_final_layer_proportional_to_cam(self):
        # with a mean-pooled head the channel weights equal w_c / n, so
        # the map is cam scaled by 1/n; equal after normalization
        g, model, x = _instance(1)
        _, acts = forward(model, g, x)
        c = cam(acts, model.classifier, 0)
        gc = grad_cam(model, g, x, len(model.layers) - 1, 0)
        np.testing.assert_allclose(gc.raw, c.raw / g.n, atol=1e-12)
        if not c.degenerate:
            np.testing.assert_allclose(gc.normalized(), c.normalized(),
                                       atol=1e-10)

    def test_zero_input(self):
        g, model, _ = _instance(2)
        smap = grad_cam(model, g, np.zeros((g.n, model.d_in)), 0, 0)
        assert np.all(smap.raw == 0.0)

    def test_channel_weights_match_finite_differences(self):
        g, model, x = _instance(3)
        layer = 0
        alpha = gradcam_channel_weights(model, g, x, layer, 0)
        prop = model.propagation_matrix(g)
        h = 1e-6

        def logit_with_bumped_activation(i, k, bump):
            # replay the forward pass, perturbing one activation entry
            hid = np.array(x, float)
            for idx, w in enumerate(model.layers):
                hid = np.maximum(prop @ hid @ w, 0.0)
                if idx == layer:
                    hid = hid.copy()
                    hid[i, k] += bump
            return (hid.mean(0) @ model.classifier)[0]

        width = model.layers[layer].shape[1]
        fd = np.zeros(width)
        for k in range(width):
            for i in range(g.n):
                fd[k] += (logit_with_bumped_activation(i, k, h)
                          - logit_with_bumped_activation(i, k, -h)) / (2 * h)
        fd /= g.n
        np.testing.assert_allclose(alpha, fd, atol=1e-4)


class TestGradSaliency:
    def test_linear_model_gradient_is_weight_sum(self):
        # single GCN layer with identity weights on a 2-node path:
        # logit = mean of propagated features (all positive), so the
        # input gradient is constant and grad sums classifier weights
        g = Graph.from_edges(2, [(0, 1)])
        model = random_model("gcn", 2, [2], seed=0)
        x = np.full((2, 2), 3.0)
        gvec = input_gradient(model, g, x, 0)
        smap = grad(model, g, x, 0)
        np.testing.assert_allclose(smap.raw, gvec.sum(1), atol=1e-12)

    def test_grad_input_zero_at_origin(self):
        g, model, _ = _instance(4)
        smap = grad_input(model, g, np.zeros((g.n, model.d_in)), 0)
        assert np.all(smap.raw == 0.0)

    @pytest.mark.parametrize("arch", ["gcn", "gin"])
    def test_gradient_matches_finite_differences(self, arch):
        for seed in range(5):
            g, model, x = _instance(seed, arch=arch)
            gvec = input_gradient(model, g, x, 1)
            h = 1e-6
            fd = np.zeros_like(gvec)
            for i in range(g.n):
                for j in range(model.d_in):
                    for sign in (1.0, -1.0):
                        xp = np.array(x)
                        xp[i, j] += sign * h
                        logits, _ = forward(model, g, xp)
                        fd[i, j] += sign * logits[1] / (2 * h)
            np.testing.assert_allclose(gvec, fd, atol=1e-4)


class TestSelectSubgraphs:
    def test_three_level_example(self):
        smap = SaliencyMap(np.array([0.0, 0.5, 1.0]))
        sel = select_subgraphs(smap, 0.3, 0.7)
        assert sel.salient == {2}
        assert sel.nonsalient == {0}

    def test_all_equal_degenerate(self):
        with pytest.raises(DegenerateSaliency):
            select_subgraphs(SaliencyMap(np.full(4, 2.0)), 0.3, 0.7)

    def test_empty_side(self):
        # normalized values (0, 1): nothing strictly between thresholds
        # on the non-salient side if tau_l < 0
        smap = SaliencyMap(np.array([0.4, 0.5, 0.6]))
        with pytest.raises(EmptySide):
            select_subgraphs(smap, 0.3, 0.7, normalize=False)

    @given(st.integers(0, 10 ** 9),
           st.floats(0.05, 0.45), st.floats(0.55, 0.95))
    @settings(max_examples=40, deadline=None)
    def test_extremes_always_assigned(self, seed, tau_l, tau_u):
        rng = np.random.default_rng(seed)
        raw = rng.standard_normal(6)
        if raw.max() == raw.min():
            return
        sel = select_subgraphs(SaliencyMap(raw), tau_l, tau_u)
        assert int(np.argmin(raw)) in sel.nonsalient
        assert int(np.argmax(raw)) in sel.salient

    @given(st.integers(0, 10 ** 9), st.floats(0.1, 5.0),
           st.floats(-3.0, 3.0))
    @settings(max_examples=40, deadline=None)
    def test_invariant_to_positive_affine_rescaling(self, seed, scale, shift):
        rng = np.random.default_rng(seed)
        raw = rng.standard_normal(8)
        sel1 = select_subgraphs(SaliencyMap(raw), 0.3, 0.7)
        sel2 = select_subgraphs(SaliencyMap(scale * raw + shift), 0.3, 0.7)
        assert sel1.same_nodes(sel2)


def _affine_selection(c, beta, z, tau_l, tau_u, normalized,
                      valid=Interval.full()):
    sa = SaliencyAffine(np.asarray(c, float), np.asarray(beta, float), valid)
    s = sa.at(z)
    values = (s - s.min()) / (s.max() - s.min()) if normalized else s
    salient, nonsalient = _membership(values, tau_l, tau_u)
    return sa, SubgraphSelection(salient, nonsalient, tau_l, tau_u)


class TestSubgraphIntervalRaw:
    def test_constant_saliency_full_interval(self):
        sa, sel = _affine_selection([0.1, 0.9], [0.0, 0.0], 0.0, 0.3, 0.7,
                                    normalized=False)
        assert subgraph_interval_raw(sa, sel, 0.0) == Interval.full()

    def test_single_crossing_upper_bound(self):
        sa, sel = _affine_selection([0.5, 0.1], [1.0, 0.0], 0.0, 0.3, 0.7,
                                    normalized=False)
        iv = subgraph_interval_raw(sa, sel, 0.0)
        assert iv.hi == pytest.approx(0.2)

    @given(st.integers(0, 10 ** 9))
    @settings(max_examples=40, deadline=None)
    def test_matches_grid_scan(self, seed):
        rng = np.random.default_rng(seed)
        c = rng.uniform(0, 1, size=6)
        beta = rng.standard_normal(6) * 0.5
        z = 0.0
        s = c + beta * z
        salient, nonsalient = _membership(s, 0.3, 0.7)
        if not salient or not nonsalient:
            return
        sa = SaliencyAffine(c, beta, Interval.full())
        sel = SubgraphSelection(salient, nonsalient, 0.3, 0.7)
        iv = subgraph_interval_raw(sa, sel, z)
        grid = np.arange(-4.0, 4.0, 1e-4)
        vals = c[None, :] + beta[None, :] * grid[:, None]
        sal_mask = np.zeros(6, bool)
        sal_mask[list(salient)] = True
        non_mask = np.zeros(6, bool)
        non_mask[list(nonsalient)] = True
        same = (np.all((vals > 0.7) == sal_mask[None, :], axis=1)
                & np.all((vals <= 0.3) == non_mask[None, :], axis=1))
        inside = (grid >= iv.lo) & (grid <= iv.hi)
        margin = (np.abs(grid - iv.lo) > 2e-4) & (np.abs(grid - iv.hi) > 2e-4)
        assert np.all(same[inside & margin])
        assert not np.any(same[(~inside) & margin])


class TestSubgraphIntervalNormalized:
    def test_parallel_lines_anchor_interval(self):
        sa, sel = _affine_selection([0.0, 0.4, 1.0], [0.5, 0.5, 0.5],
                                    0.0, 0.3, 0.7, normalized=True)
        assert subgraph_interval_normalized(sa, sel, 0.0) == Interval.full()

    def test_two_nodes_always_extremes(self):
        sa, sel = _affine_selection([0.0, 1.0], [0.3, -0.2], 0.0, 0.3, 0.7,
                                    normalized=True)
        iv = subgraph_interval_normalized(sa, sel, 0.0)
        # membership can only change when the min/max swap (crossing)
        cross = (1.0 - 0.0) / (0.3 - (-0.2))
        assert iv.hi == pytest.approx(cross)

    def test_degenerate_at_query(self):
        sa = SaliencyAffine(np.array([0.5, 0.5]), np.array([0.1, 0.1]),
                            Interval.full())
        sel = SubgraphSelection(frozenset({1}), frozenset({0}), 0.3, 0.7)
        with pytest.raises(DegenerateSaliency):
            subgraph_interval_normalized(sa, sel, 0.0)

    @given(st.integers(0, 10 ** 9))
    @settings(max_examples=40, deadline=None)
    def test_matches_grid_scan(self, seed):
        rng = np.random.default_rng(seed)
        c = rng.uniform(0, 1, size=10)
        beta = rng.standard_normal(10) * 0.3
        z = 0.0
        s = c + beta * z
        if s.max() == s.min():
            return
        norm = (s - s.min()) / (s.max() - s.min())
        salient, nonsalient = _membership(norm, 0.3, 0.7)
        if not salient or not nonsalient:
            return
        sa = SaliencyAffine(c, beta, Interval.full())
        sel = SubgraphSelection(salient, nonsalient, 0.3, 0.7)
        iv = subgraph_interval_normalized(sa, sel, z)
        p, q = int(np.argmin(s)), int(np.argmax(s))
        grid = np.arange(-4.0, 4.0, 1e-4)
        vals = c[None, :] + beta[None, :] * grid[:, None]
        lo_v, hi_v = vals.min(axis=1), vals.max(axis=1)
        nondeg = hi_v > lo_v
        nv = (vals - lo_v[:, None]) / np.where(nondeg, hi_v - lo_v, 1.0)[:, None]
        sal_mask = np.zeros(10, bool)
        sal_mask[list(salient)] = True
        non_mask = np.zeros(10, bool)
        non_mask[list(nonsalient)] = True
        same = (nondeg
                & np.all((nv > 0.7) == sal_mask[None, :], axis=1)
                & np.all((nv <= 0.3) == non_mask[None, :], axis=1)
                & (np.argmin(vals, axis=1) == p)
                & (np.argmax(vals, axis=1) == q))
        inside = (grid >= iv.lo) & (grid <= iv.hi)
        margin = (np.abs(grid - iv.lo) > 2e-4) & (np.abs(grid - iv.hi) > 2e-4)
        assert np.all(same[inside & margin])
        assert not np.any(same[(~inside) & margin])


class TestLineSaliency:
    @pytest.mark.parametrize("arch,method", [
        ("gcn", "cam"), ("gcn", "gradcam"),
        ("gin", "grad"), ("gin", "gradinput")])
    def test_affine_matches_pointwise_inside_interval(self, arch, method):
        for seed in range(5):
            g, model, x = _instance(seed, arch=arch)
            rng = trial_rng(seed, 5)
            a = x.reshape(-1)
            b = rng.standard_normal(a.size)
            z = 0.1
            layer = len(model.layers) - 1 if method == "gradcam" else None
            sa, cls = line_saliency(model, model.propagation_matrix(g),
                                    x, b.reshape(g.n, model.d_in), z,
                                    method, layer)
            lo = max(sa.valid_interval.lo, z - 2.0)
            hi = min(sa.valid_interval.hi, z + 2.0)
            for r in rng.uniform(lo, hi, size=10):
                xr = (a + b * r).reshape(g.n, model.d_in)
                if method == "cam":
                    _, acts = forward(model, g, xr)
                    direct = cam(acts, model.classifier, cls).raw
                elif method == "gradcam":
                    direct = grad_cam(model, g, xr, layer, cls).raw
                elif method == "grad":
                    direct = grad(model, g, xr, cls).raw
                else:
                    direct = grad_input(model, g, xr, cls).raw
                np.testing.assert_allclose(sa.at(r), direct, atol=1e-8)
