"""Test statistic, line search over selection events, and p-values.

The test compares mean feature values between the salient and the
non-salient node sets.  Conditioning on the selection and on the
nuisance statistic collapses the data space to a line X(z) = a + b z;
the null distribution of the statistic is the standard normal truncated
to the set of z values that reproduce the observed selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.special import log_ndtr, logsumexp, ndtr

from .errors import (DegenerateSaliency, EmptySide, SearchStalled,
                     ZeroVariance)
from .gnn import Interval, ModelSpec, forward
from .graphs import CovarianceModel, Graph
from .saliency import (SaliencyMap, SubgraphSelection, _membership,
                       _pointwise, line_saliency, select_subgraphs,
                       subgraph_interval_normalized, subgraph_interval_raw)

_INF = math.inf
VARIANCE_FLOOR = 1e-30

STATUS_TESTED = "tested"
STATUS_SKIPPED_DEGENERATE = "skipped:DegenerateSaliency"
STATUS_SKIPPED_EMPTY_SIDE = "skipped:EmptySide"


def build_eta(sel: SubgraphSelection, n: int, d: int) -> np.ndarray:
    """Contrast direction: +1/|V+| on salient blocks, -1/|V-| on
    non-salient blocks, node-major layout."""
    if not sel.salient or not sel.nonsalient:
        raise EmptySide("both node sets must be nonempty")
    eta = np.zeros((n, d))
    eta[sorted(sel.salient)] = 1.0 / len(sel.salient)
    eta[sorted(sel.nonsalient)] = -1.0 / len(sel.nonsalient)
    return eta.reshape(-1)


def test_statistic(eta: np.ndarray, x: np.ndarray, cov: CovarianceModel) -> float:
    """Standardized mean-difference statistic eta'x / sqrt(eta'Sigma eta)."""
    sigma_eta = cov.matvec(eta)
    var = float(eta @ sigma_eta)
    if var <= VARIANCE_FLOOR:
        raise ZeroVariance(f"statistic variance {var} at or below floor")
    return float(eta @ np.asarray(x, float).reshape(-1)) / math.sqrt(var)


@dataclass(frozen=True)
class LineParametrization:
    """The line a + b z spanned by varying the statistic with the
    nuisance component held fixed; a + b z_obs reproduces x_obs."""

    a: np.ndarray
    b: np.ndarray
    z_obs: float

    @staticmethod
    def from_observation(eta: np.ndarray, x: np.ndarray,
                         cov: CovarianceModel) -> "LineParametrization":
        x = np.asarray(x, float).reshape(-1)
        sigma_eta = cov.matvec(eta)
        var = float(eta @ sigma_eta)
        if var <= VARIANCE_FLOOR:
            raise ZeroVariance(f"statistic variance {var} at or below floor")
        sd = math.sqrt(var)
        b = sigma_eta / sd
        z_obs = float(eta @ x) / sd
        a = x - b * z_obs
        return LineParametrization(a=a, b=b, z_obs=z_obs)


@dataclass(frozen=True)
class TruncationSet:
    """Sorted, pairwise-disjoint closed intervals on the real line."""

    intervals: tuple

    @staticmethod
    def from_pieces(pieces, merge_gap: float = 0.0) -> "TruncationSet":
        items = sorted((float(lo), float(hi)) for lo, hi in pieces)
        merged = []
        for lo, hi in items:
            if merged and lo - merged[-1][1] <= merge_gap:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        return TruncationSet(tuple((lo, hi) for lo, hi in merged))

    def contains(self, z: float) -> bool:
        return any(lo <= z <= hi for lo, hi in self.intervals)


def _log_gauss_mass(lo: float, hi: float) -> float:
    """log P(lo <= N(0,1) <= hi), stable in both tails."""
    if hi <= lo:
        return -_INF
    if lo > 0.0:
        a, b = log_ndtr(-lo), log_ndtr(-hi)
    elif hi < 0.0:
        a, b = log_ndtr(hi), log_ndtr(lo)
    else:
        mass = ndtr(hi) - ndtr(lo)
        return math.log(mass) if mass > 0.0 else -_INF
    diff = b - a
    if diff >= 0.0:
        return -_INF
    return float(a + math.log1p(-math.exp(diff)))


def _log_set_mass(intervals) -> float:
    if not intervals:
        return -_INF
    return float(logsumexp([_log_gauss_mass(lo, hi) for lo, hi in intervals]))


def _clip_to_tails(intervals, threshold: float):
    """Intersect intervals with {t : |t| > threshold}."""
    out = []
    for lo, hi in intervals:
        if hi > threshold:
            out.append((max(lo, threshold), hi))
        if lo < -threshold:
            out.append((lo, min(hi, -threshold)))
    return out


def naive_p(t_obs: float) -> float:
    """Two-sided p-value against an untruncated standard normal.

    Shares the log-space CDF path with selective_p, so it equals
    selective_p on the full line bit for bit.
    """
    log_num = _log_set_mass(_clip_to_tails(((-_INF, _INF),), abs(t_obs)))
    if log_num == -_INF:
        return 0.0
    return min(1.0, math.exp(log_num))


def bonferroni_p(p_naive: float, n: int) -> float:
    """min(1, 3^n * p_naive), computed in log space."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if p_naive <= 0.0:
        return 0.0
    log_p = n * math.log(3.0) + math.log(p_naive)
    return 1.0 if log_p >= 0.0 else math.exp(log_p)


def selective_p(t_obs: float, z_set: TruncationSet) -> tuple[float, bool]:
    """Two-sided truncated-normal p-value on the truncation set.

    Returns (p, underflow_flag); the flag marks a truncation set whose
    Gaussian measure underflowed, in which case p defaults to 1.0.
    """
    log_den = _log_set_mass(z_set.intervals)
    if log_den == -_INF:
        return 1.0, True
    log_num = _log_set_mass(_clip_to_tails(z_set.intervals, abs(t_obs)))
    if log_num == -_INF:
        return 0.0, False
    return min(1.0, math.exp(log_num - log_den)), False


def wo_pp_p(t_obs: float, single_interval: Interval) -> float:
    """Over-conditioned p-value using only the piece containing z_obs."""
    if not single_interval.contains(t_obs):
        raise ValueError("interval must contain the observed statistic")
    p, _ = selective_p(
        t_obs, TruncationSet(((single_interval.lo, single_interval.hi),)))
    return p


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the piecewise line scan."""

    method: str = "cam"
    layer_index: int | None = None
    normalize: bool = True
    gamma: float = 1e-10
    gamma_min: float = 1e-12
    z_margin: float = 10.0
    z_max_floor: float = 20.0

    def z_max(self, z_obs: float) -> float:
        return max(self.z_max_floor, abs(z_obs) + self.z_margin)


def _selection_interval(sa, sel, z, normalize):
    if normalize:
        return subgraph_interval_normalized(sa, sel, z)
    return subgraph_interval_raw(sa, sel, z)


def _step(model, prop, u0, v0, z, sel_obs, config):
    """One scan step: (interval of constant selection, selection matches)."""
    sa, _cls = line_saliency(model, prop, u0, v0, z,
                             config.method, config.layer_index)
    s = sa.at(z)
    if config.normalize and s.max() == s.min():
        constant = (np.all(sa.offsets == sa.offsets[0])
                    and np.all(sa.slopes == sa.slopes[0]))
        interval = sa.valid_interval if constant else Interval(z, z)
        return interval, False
    values = (s - s.min()) / (s.max() - s.min()) if config.normalize else s
    salient, nonsalient = _membership(values, sel_obs.tau_l, sel_obs.tau_u)
    sel_z = SubgraphSelection(salient, nonsalient, sel_obs.tau_l, sel_obs.tau_u)
    interval = _selection_interval(sa, sel_z, z, config.normalize)
    return interval, sel_z.same_nodes(sel_obs)


def parametric_search(model: ModelSpec, g: Graph, cov: CovarianceModel,
                      sel_obs: SubgraphSelection, line: LineParametrization,
                      config: SearchConfig = SearchConfig()
                      ) -> tuple[TruncationSet, Interval]:
    """Scan the line for all intervals reproducing the observed selection.

    Returns the truncation set and the single constant-selection
    interval containing z_obs (the over-conditioned ablation).
    """
    n, d = g.n, model.d_in
    prop = model.propagation_matrix(g)
    if n >= 32:
        # adjacency-based propagation is sparse at the spec's scales
        prop = sparse.csr_array(prop)
    u0 = line.a.reshape(n, d)
    v0 = line.b.reshape(n, d)

    obs_interval, obs_match = _step(model, prop, u0, v0, line.z_obs,
                                    sel_obs, config)
    if not obs_match:
        raise AssertionError(
            "selection at z_obs does not reproduce the observed selection")

    z_max = config.z_max(line.z_obs)
    z = -z_max
    pieces = []
    while z < z_max:
        interval, match = _step(model, prop, u0, v0, z, sel_obs, config)
        if match:
            pieces.append((interval.lo, interval.hi))
        z_next = interval.hi + config.gamma
        if not z_next - z >= config.gamma_min:
            raise SearchStalled(f"no progress at z = {z}")
        z = z_next

    z_set = TruncationSet.from_pieces(pieces, merge_gap=2 * config.gamma)
    if not z_set.contains(line.z_obs):
        # endpoint rounding can shave the observed piece; re-add it
        pieces.append((obs_interval.lo, obs_interval.hi))
        z_set = TruncationSet.from_pieces(pieces, merge_gap=2 * config.gamma)
    return z_set, obs_interval


@dataclass(frozen=True)
class TestResult:
    """Outcome of one selective test."""

    status: str
    t_obs: float = math.nan
    p_selective: float = math.nan
    p_naive: float = math.nan
    p_bonferroni: float = math.nan
    p_wo_pp: float = math.nan
    selection: SubgraphSelection | None = None
    truncation: TruncationSet | None = None
    predicted_class: int = -1
    truncation_underflow: bool = False

    @property
    def tested(self) -> bool:
        return self.status == STATUS_TESTED


def estimated_covariance(x, n: int, d: int) -> CovarianceModel:
    """Plug-in isotropic covariance: sample variance of all entries."""
    flat = np.asarray(x, float).reshape(-1)
    s2 = float(flat.var(ddof=1))
    return CovarianceModel.kronecker(s2 * np.eye(n), np.eye(d))


def run_test(model: ModelSpec, g: Graph, x_obs, cov: CovarianceModel,
             tau_l: float, tau_u: float,
             config: SearchConfig = SearchConfig()) -> TestResult:
    """Full pipeline: saliency, selection, line search, all four p-values."""
    values = x_obs.values if hasattr(x_obs, "values") else np.asarray(x_obs, float)
    n, d = g.n, model.d_in
    logits, _acts = forward(model, g, values)
    cls = int(np.argmax(logits))
    smap = _pointwise(model, g, values, config.method, cls, config.layer_index)
    try:
        sel = select_subgraphs(smap, tau_l, tau_u, config.normalize)
    except DegenerateSaliency:
        return TestResult(status=STATUS_SKIPPED_DEGENERATE, predicted_class=cls)
    except EmptySide:
        return TestResult(status=STATUS_SKIPPED_EMPTY_SIDE, predicted_class=cls)

    eta = build_eta(sel, n, d)
    x_vec = values.reshape(-1)
    t_obs = test_statistic(eta, x_vec, cov)
    line = LineParametrization.from_observation(eta, x_vec, cov)
    z_set, obs_interval = parametric_search(model, g, cov, sel, line, config)

    p_sel, underflow = selective_p(t_obs, z_set)
    p_nv = naive_p(t_obs)
    return TestResult(
        status=STATUS_TESTED,
        t_obs=t_obs,
        p_selective=p_sel,
        p_naive=p_nv,
        p_bonferroni=bonferroni_p(p_nv, n),
        p_wo_pp=wo_pp_p(t_obs, obs_interval),
        selection=sel,
        truncation=z_set,
        predicted_class=cls,
        truncation_underflow=underflow,
    )
