"""Synthetic instance generation for the Monte Carlo experiments.

All generators are deterministic given (seed, trial_index) through
``trial_rng``: trial substreams come from
``SeedSequence(seed, spawn_key=(trial_index,))``, so campaigns
reproduce bit-identically regardless of worker count.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.sparse.csgraph import shortest_path

from .errors import (CalibrationFailed, CholeskyFailure, DimensionMismatch,
                     InfeasibleDegree, RankDeficient)
from .graphs import CovarianceModel, FeatureMatrix, Graph

_SCIPY_FAMILY = {
    "skewnorm": stats.skewnorm,
    "exponnorm": stats.exponnorm,
    "gennorm_steep": stats.gennorm,
    "gennorm_flat": stats.gennorm,
    "student_t": stats.t,
}

# (bracket_lo, bracket_hi) for the shape search of each family; the
# 1-Wasserstein distance from N(0,1) is monotone on each bracket.
_BRACKETS = {
    "skewnorm": (1e-6, 60.0),
    "exponnorm": (1e-4, 20.0),
    "gennorm_steep": (0.2, 2.0 - 1e-9),
    "gennorm_flat": (2.0 + 1e-9, 60.0),
    "student_t": (2.1, 1e6),
}


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Per-trial substream; independent of execution order."""
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(trial_index,)))


@dataclass(frozen=True)
class NoiseFamily:
    """A standardized (mean 0, variance 1) non-Gaussian noise family."""

    kind: str
    shape_param: float

    def __post_init__(self):
        if self.kind not in _SCIPY_FAMILY:
            raise ValueError(f"unknown noise family {self.kind!r}")
        if self.kind == "gennorm_steep" and not self.shape_param < 2.0:
            raise ValueError("gennorm_steep requires shape < 2")
        if self.kind == "gennorm_flat" and not self.shape_param > 2.0:
            raise ValueError("gennorm_flat requires shape > 2")

    def _frozen(self):
        return _SCIPY_FAMILY[self.kind](self.shape_param)

    def _moments(self) -> tuple[float, float]:
        m, v = self._frozen().stats(moments="mv")
        return float(m), float(v)

    def rvs(self, size, rng: np.random.Generator) -> np.ndarray:
        m, v = self._moments()
        raw = self._frozen().rvs(size=size, random_state=rng)
        return (raw - m) / math.sqrt(v)

    def ppf(self, u: np.ndarray) -> np.ndarray:
        m, v = self._moments()
        return (self._frozen().ppf(u) - m) / math.sqrt(v)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(2048)
_GL_U = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


def wasserstein_to_gaussian(family: NoiseFamily) -> float:
    """W1 distance between the standardized family and N(0,1), by
    Gauss-Legendre quadrature on the quantile functions."""
    gap = np.abs(family.ppf(_GL_U) - stats.norm.ppf(_GL_U))
    return float(_GL_W @ gap)


def calibrate_noise(kind: str, target_wasserstein: float,
                    iterations: int = 60, tol: float = 1e-4) -> NoiseFamily:
    """Find the shape parameter with W1 distance ``target_wasserstein``.

    Monotone bisection on the family's bracket; asserts the
    monotonicity assumption via the bracket endpoint values.
    """
    if not 0.0 < target_wasserstein <= 0.2:
        raise ValueError("target distance must be in (0, 0.2]")
    lo, hi = _BRACKETS[kind]
    w_lo = wasserstein_to_gaussian(NoiseFamily(kind, lo))
    w_hi = wasserstein_to_gaussian(NoiseFamily(kind, hi))
    increasing = w_hi > w_lo
    w_min, w_max = sorted((w_lo, w_hi))
    if not w_min <= target_wasserstein <= w_max:
        raise CalibrationFailed(
            f"{kind}: target {target_wasserstein} outside bracket "
            f"[{w_min:.4g}, {w_max:.4g}]")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        w_mid = wasserstein_to_gaussian(NoiseFamily(kind, mid))
        if (w_mid < target_wasserstein) == increasing:
            lo = mid
        else:
            hi = mid
    family = NoiseFamily(kind, 0.5 * (lo + hi))
    achieved = wasserstein_to_gaussian(family)
    if abs(achieved - target_wasserstein) >= tol:
        raise CalibrationFailed(
            f"{kind}: converged to W1 = {achieved}, target {target_wasserstein}")
    return family


def random_graph(n: int, avg_degree: float,
                 rng: np.random.Generator) -> Graph:
    """Uniform random graph with floor(n * avg_degree / 2) edges.

    Post-hoc repair rewires one endpoint per isolated node so the
    degree-normalized adjacency stays well defined.
    """
    if n < 2:
        raise InfeasibleDegree("need at least two nodes")
    m = int(n * avg_degree // 2)
    n_pairs = n * (n - 1) // 2
    if avg_degree >= n or m > n_pairs or 2 * m < n:
        raise InfeasibleDegree(
            f"avg_degree {avg_degree} infeasible for n = {n}")
    chosen = rng.choice(n_pairs, size=m, replace=False)
    # pair index k -> (i, j), i < j, row-major over the strict upper triangle
    rows = (n - 0.5 - np.sqrt((n - 0.5) ** 2 - 2.0 * chosen)).astype(int)

    def _offset(r):
        return r * n - r * (r + 1) // 2

    rows = np.clip(rows, 0, n - 2)
    rows = np.where(_offset(rows) > chosen, rows - 1, rows)
    rows = np.where(_offset(rows + 1) <= chosen, rows + 1, rows)
    cols = chosen - _offset(rows) + rows + 1
    adj = np.zeros((n, n))
    adj[rows, cols] = adj[cols, rows] = 1.0

    deg = adj.sum(axis=1)
    for v in np.flatnonzero(deg == 0):
        donors = np.flatnonzero(deg >= 2)
        rng.shuffle(donors)
        done = False
        for i in donors:
            for j in np.flatnonzero(adj[i]):
                if deg[j] >= 2 and adj[v, j] == 0 and v != j:
                    adj[i, j] = adj[j, i] = 0.0
                    adj[v, j] = adj[j, v] = 1.0
                    deg[i] -= 1
                    deg[v] += 1
                    done = True
                    break
            if done:
                break
        if not done:
            raise InfeasibleDegree("could not repair isolated node")
    return Graph(adj)


def kronecker_cov(kind: str, g: Graph, d: int) -> CovarianceModel:
    """Independence (identity factors) or shortest-path-decay covariance."""
    n = g.n
    if kind == "independence":
        return CovarianceModel.kronecker(np.eye(n), np.eye(d))
    if kind != "correlation":
        raise ValueError(f"unknown covariance kind {kind!r}")
    dist = shortest_path(g.adjacency, method="D", unweighted=True)
    with np.errstate(over="ignore"):
        space = np.where(np.isinf(dist), 0.0, 0.1 ** dist)
    idx = np.arange(d)
    feature = 0.1 ** np.abs(idx[:, None] - idx[None, :])
    return CovarianceModel.kronecker(space, feature)


def sample_features(mu: np.ndarray, cov: CovarianceModel,
                    rng: np.random.Generator, n: int, d: int,
                    noise: NoiseFamily | None = None) -> FeatureMatrix:
    """Draw X = mu + L nu with L the (factor-wise) Cholesky of Sigma.

    Gaussian by default; a NoiseFamily supplies i.i.d. standardized
    innovations that are then colored by the same factor.
    """
    mu = np.asarray(mu, float).reshape(-1)
    if mu.size != n * d or cov.dim != n * d:
        raise DimensionMismatch("mu/covariance dimensions inconsistent")
    if noise is None:
        white = rng.standard_normal(n * d)
    else:
        white = noise.rvs(n * d, rng)
    try:
        colored = cov.color(white)
    except np.linalg.LinAlgError as exc:
        raise CholeskyFailure(str(exc)) from exc
    return FeatureMatrix((mu + colored).reshape(n, d))


def make_alternative_mu(n: int, d: int, delta: float, flip_prob: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Sparse mean: each entry flips from 0 to delta with flip_prob."""
    if not 0.0 <= flip_prob <= 1.0:
        raise ValueError("flip_prob must lie in [0, 1]")
    return (rng.random(n * d) < flip_prob) * float(delta)


def modified_real_generator(pos_samples: np.ndarray, neg_samples: np.ndarray,
                            mode: str, gamma: float
                            ) -> tuple[np.ndarray, CovarianceModel, bool]:
    """Mean from positive samples, covariance from negative samples.

    ``full`` scales the negative-sample covariance to unit spectral norm
    and multiplies by gamma; ``eye`` uses gamma * I.  Returns
    (mu_plus, covariance, ridge_flag); the flag marks a rank-deficient
    sample covariance repaired with a 1e-8 ridge.
    """
    pos = np.atleast_2d(np.asarray(pos_samples, float))
    neg = np.atleast_2d(np.asarray(neg_samples, float))
    if pos.shape[1] != neg.shape[1]:
        raise DimensionMismatch("positive/negative sample widths differ")
    mu_plus = pos.mean(axis=0)
    dim = pos.shape[1]
    if mode == "eye":
        return mu_plus, CovarianceModel.kronecker(gamma * np.eye(dim),
                                                  np.eye(1)), False
    if mode != "full":
        raise ValueError(f"unknown mode {mode!r}")
    cov = np.cov(neg, rowvar=False)
    cov = np.atleast_2d(cov)
    eigs = np.linalg.eigvalsh(cov)
    top = eigs[-1]
    if top <= 0.0:
        raise RankDeficient("sample covariance has no positive eigenvalue")
    cov = gamma * cov / top
    ridged = False
    if eigs[0] / top <= 1e-12:
        cov = cov + 1e-8 * np.eye(dim)
        ridged = True
    return mu_plus, CovarianceModel.from_dense(cov), ridged


@dataclass
class ExperimentConfig:
    """Campaign configuration; JSON-compatible, defaults match the
    synthetic experiment design."""

    n: int = 256
    d: int = 5
    avg_degree: float = 3.0
    cov_kind: str = "independence"
    delta: float = 0.0
    flip_prob: float = 0.1
    tau_l: float = 0.3
    tau_u: float = 0.7
    alpha: float = 0.05
    trials: int = 1000
    seed: int = 0
    architecture: str = "gcn"
    saliency_method: str = "cam"
    gradcam_layer: int = 1
    hidden: list = field(default_factory=lambda: [10, 10, 10])
    gin_mlp_hidden: int = 64
    noise_kind: str | None = None
    noise_shape: float | None = None
    cov_mode: str = "known"
    fixed_model: bool = False

    def __post_init__(self):
        if not self.tau_l < self.tau_u:
            raise ValueError("tau_l must be below tau_u")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.cov_mode not in ("known", "estimated"):
            raise ValueError("cov_mode must be known or estimated")

    def noise_family(self) -> NoiseFamily | None:
        if self.noise_kind is None:
            return None
        return NoiseFamily(self.noise_kind, self.noise_shape)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2)

    @staticmethod
    def from_json(path) -> "ExperimentConfig":
        with open(path) as fh:
            return ExperimentConfig(**json.load(fh))
