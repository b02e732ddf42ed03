"""Monte Carlo campaign harness: Type I error, power, robustness to
non-Gaussian noise, and threshold sweeps.

Each trial draws its randomness from an independent substream keyed by
(seed, trial_index), so results are bit-identical no matter how many
workers run the campaign or in which order trials finish.
"""

from __future__ import annotations

import concurrent.futures
import csv
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .inference import (SearchConfig, TestResult, estimated_covariance,
                        run_test)
from .model_io import random_model
from .synthgen import (ExperimentConfig, NoiseFamily, calibrate_noise,
                       kronecker_cov, make_alternative_mu, random_graph,
                       sample_features, trial_rng)

METHODS = ("proposed", "naive", "bonferroni", "wo_pp")

TAU_GRID_LOWER = (0.1, 0.3, 0.5, 0.7)
TAU_GRID_UPPER = (0.2, 0.4, 0.6, 0.8)

CSV_COLUMNS = ("trial", "method", "p_value", "rejected", "status",
               "T_obs", "n_intervals")


@dataclass(frozen=True)
class TrialRecord:
    """One trial's outcome, self-describing enough to replay standalone:
    re-running with ``trial_rng(seed, trial)`` reproduces it."""

    trial: int
    seed: int
    status: str
    t_obs: float
    p_values: dict
    n_intervals: int

    def rows(self, alpha: float):
        for method in METHODS:
            p = self.p_values.get(method, math.nan)
            yield {
                "trial": self.trial,
                "method": method,
                "p_value": "" if math.isnan(p) else format(p, ".17g"),
                "rejected": int(p <= alpha) if not math.isnan(p) else "",
                "status": self.status,
                "T_obs": "" if math.isnan(self.t_obs)
                         else format(self.t_obs, ".17g"),
                "n_intervals": self.n_intervals,
            }


@dataclass(frozen=True)
class CampaignResult:
    """Aggregate of one campaign: per-method rejection rates with
    binomial standard errors, plus the raw per-trial records."""

    config: ExperimentConfig
    records: tuple
    rates: dict
    standard_errors: dict
    n_tested: int
    n_skipped: dict
    wall_seconds: float

    def __post_init__(self):
        assert len(self.records) == self.config.trials
        assert all(0.0 <= r <= 1.0 for r in self.rates.values())

    def summary(self) -> dict:
        return {
            "trials": self.config.trials,
            "tested": self.n_tested,
            "skipped": self.n_skipped,
            "rates": self.rates,
            "standard_errors": self.standard_errors,
            "wall_seconds": self.wall_seconds,
        }


def search_config(config: ExperimentConfig) -> SearchConfig:
    layer = (config.gradcam_layer
             if config.saliency_method == "gradcam" else None)
    return SearchConfig(method=config.saliency_method, layer_index=layer)


def run_trial(config: ExperimentConfig, trial_index: int) -> TrialRecord:
    """Graph, model, sample, and test for one substream."""
    rng = trial_rng(config.seed, trial_index)
    n, d = config.n, config.d
    g = random_graph(n, config.avg_degree, rng)
    model_seed = (config.seed if config.fixed_model
                  else int(rng.integers(2 ** 63)))
    model = random_model(config.architecture, d, config.hidden,
                         seed=model_seed,
                         gin_mlp_hidden=config.gin_mlp_hidden)
    mu = (make_alternative_mu(n, d, config.delta, config.flip_prob, rng)
          if config.delta != 0.0 else np.zeros(n * d))
    cov_true = kronecker_cov(config.cov_kind, g, d)
    x = sample_features(mu, cov_true, rng, n, d, noise=config.noise_family())
    cov_used = (cov_true if config.cov_mode == "known"
                else estimated_covariance(x.values, n, d))
    result = run_test(model, g, x.values, cov_used,
                      config.tau_l, config.tau_u, search_config(config))
    return _record(result, trial_index, config.seed)


def _record(result: TestResult, trial_index: int, seed: int) -> TrialRecord:
    if result.tested:
        p_values = {
            "proposed": result.p_selective,
            "naive": result.p_naive,
            "bonferroni": result.p_bonferroni,
            "wo_pp": result.p_wo_pp,
        }
        n_intervals = len(result.truncation.intervals)
    else:
        p_values = {}
        n_intervals = 0
    return TrialRecord(trial=trial_index, seed=seed, status=result.status,
                       t_obs=result.t_obs, p_values=p_values,
                       n_intervals=n_intervals)


def _trial_task(args) -> TrialRecord:
    config, trial_index = args
    return run_trial(config, trial_index)


def run_campaign(config: ExperimentConfig, threads: int = 1,
                 progress=None) -> CampaignResult:
    """Run all trials (optionally in a process pool) and aggregate.

    Aggregation sorts by trial index, so the output does not depend on
    worker count or completion order.
    """
    start = time.monotonic()
    tasks = [(config, t) for t in range(config.trials)]
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(threads) as pool:
            records = []
            for rec in pool.map(_trial_task, tasks, chunksize=8):
                records.append(rec)
                if progress is not None:
                    progress(len(records), config.trials)
    else:
        records = []
        for task in tasks:
            records.append(_trial_task(task))
            if progress is not None:
                progress(len(records), config.trials)
    records.sort(key=lambda r: r.trial)
    return _aggregate(config, tuple(records),
                      time.monotonic() - start)


def _aggregate(config: ExperimentConfig, records: tuple,
               wall: float) -> CampaignResult:
    tested = [r for r in records if r.status == "tested"]
    skipped = {}
    for r in records:
        if r.status != "tested":
            skipped[r.status] = skipped.get(r.status, 0) + 1
    rates, ses = {}, {}
    for method in METHODS:
        if tested:
            k = sum(r.p_values[method] <= config.alpha for r in tested)
            rate = k / len(tested)
            se = math.sqrt(rate * (1.0 - rate) / len(tested))
        else:
            rate, se = math.nan, math.nan
        rates[method] = rate
        ses[method] = se
    return CampaignResult(config=config, records=records, rates=rates,
                          standard_errors=ses, n_tested=len(tested),
                          n_skipped=skipped, wall_seconds=wall)


def write_records_csv(path, result: CampaignResult,
                      extra: dict | None = None,
                      append: bool = False) -> None:
    """Long-format per-trial CSV, one row per (trial, method).

    ``extra`` adds constant leading columns (e.g. sweep coordinates);
    ``append`` adds rows without a header for multi-setting sweeps.
    """
    extra = extra or {}
    with open(path, "a" if append else "w", newline="") as fh:
        writer = csv.writer(fh)
        if not append:
            writer.writerow([*extra.keys(), *CSV_COLUMNS])
        for rec in result.records:
            for row in rec.rows(result.config.alpha):
                writer.writerow([*extra.values(),
                                 *(row[c] for c in CSV_COLUMNS)])


def tau_sweep(config: ExperimentConfig, threads: int = 1,
              lower_grid=TAU_GRID_LOWER, upper_grid=TAU_GRID_UPPER,
              progress=None) -> list:
    """One campaign per valid (tau_l, tau_u) pair with tau_l < tau_u."""
    out = []
    for tau_l in lower_grid:
        for tau_u in upper_grid:
            if not tau_l < tau_u:
                continue
            sub = replace(config, tau_l=tau_l, tau_u=tau_u)
            out.append((tau_l, tau_u, run_campaign(sub, threads, progress)))
    return out


def robustness_campaigns(config: ExperimentConfig, kinds,
                         targets, threads: int = 1, progress=None) -> list:
    """Noise campaigns: for each family and Wasserstein target, find the
    shape parameter and run a campaign with that innovation law."""
    out = []
    for kind in kinds:
        for target in targets:
            family = calibrate_noise(kind, target)
            sub = replace(config, noise_kind=family.kind,
                          noise_shape=family.shape_param)
            out.append((kind, target, family,
                        run_campaign(sub, threads, progress)))
    return out


def gaussian_reference(family_kind: str) -> NoiseFamily | None:
    """The family member closest to N(0,1), for baseline sanity runs."""
    lo, hi = {
        "skewnorm": (1e-6, None),
        "exponnorm": (1e-4, None),
        "gennorm_steep": (None, 2.0 - 1e-9),
        "gennorm_flat": (2.0 + 1e-9, None),
        "student_t": (None, 1e6),
    }[family_kind]
    shape = lo if lo is not None else hi
    return NoiseFamily(family_kind, shape)
