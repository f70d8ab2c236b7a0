"""Simulation studies estimating the component-wise MSE of the LSE.

One *study* generates ``n_mod`` datasets, fits the LSE on each and averages
the squared coefficient errors.  The true MSE is approximated the same way
with many more datasets drawn from the true model.

Because the LSE is linear in the outcome, ``lse(X, X @ beta + eps) - beta``
equals ``lse(X, eps)``.  Studies compute the coefficient error directly from
the noise, which makes the estimate exactly independent of the assumed
coefficients and exactly proportional to the squared error scale when the
standardized noise draws are shared.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng as streams
from .dgp import DgpSpec, normal_dgp, sample_designs
from .ogm import OgmSpec, fit_lse_batch, standardized_errors
from .resampling import ResamplePlan, resample_many

# Rough memory budget for one batch of stacked design matrices.
_BATCH_BYTES = 32 * 2 ** 20
TRUTH_CHUNK = 10_000


class RankDeficiencyError(RuntimeError):
    """Every generated design in a study was rank deficient."""


@dataclass
class StudyConfig:
    """Everything needed to run one simulation study repeatedly.

    ``mode`` is ``"parametric"`` (designs from ``assumed_dgp``), ``"plugin"``
    (designs from a normal DGP whose mean and covariance are estimated from
    ``plugin_sample_size`` rows of the true DGP) or ``"plasmode"`` (designs
    resampled from one source drawn from the true DGP, following ``plan``).
    """

    truth_dgp: DgpSpec
    truth_ogm: OgmSpec
    assumed_ogm: OgmSpec
    n: int
    n_mse: int = 100
    n_mod: int = 1000
    mode: str = "parametric"
    assumed_dgp: Optional[DgpSpec] = None
    plan: Optional[ResamplePlan] = None
    plugin_sample_size: int = 1000
    master_seed: int = 0

    def __post_init__(self):
        if self.mode not in ("parametric", "plugin", "plasmode"):
            raise ValueError(f"unknown study mode {self.mode!r}")
        if self.n <= self.truth_dgp.p:
            raise ValueError("need more observations than features")
        if self.n_mse < 1 or self.n_mod < 1:
            raise ValueError("n_mse and n_mod must be positive")
        if self.mode == "parametric" and self.assumed_dgp is None:
            raise ValueError("parametric studies need an assumed DGP")
        if self.mode == "plasmode" and self.plan is None:
            raise ValueError("plasmode studies need a resampling plan")
        if len(self.assumed_ogm.beta) != self.truth_dgp.p + 1:
            raise ValueError("assumed coefficients do not match the number of features")


@dataclass
class MseEstimate:
    per_coefficient: np.ndarray
    successful: int
    rank_deficient: int


@dataclass
class TrueMse:
    per_coefficient: np.ndarray
    standard_errors: np.ndarray
    replications: int
    rank_deficient: int = 0


def batch_size(n: int, k: int) -> int:
    return max(1, _BATCH_BYTES // (8 * n * k))


class _Accumulator:
    def __init__(self, k):
        self.total = np.zeros(k)
        self.total_sq = np.zeros(k)
        self.count = 0
        self.skipped = 0

    def add(self, designs, noise):
        delta, deficient = fit_lse_batch(designs, noise)
        delta = delta[~deficient]
        sq = delta * delta
        self.total += sq.sum(axis=0)
        self.total_sq += (sq * sq).sum(axis=0)
        self.count += len(delta)
        self.skipped += int(deficient.sum())


def _squared_error_mean(design_batches, ogm: OgmSpec, noise_rng, k):
    acc = _Accumulator(k)
    for designs in design_batches:
        noise = ogm.error.sd * standardized_errors(ogm.error, designs.shape[:2], noise_rng)
        acc.add(designs, noise)
    if acc.count == 0:
        raise RankDeficiencyError("all generated designs were rank deficient")
    return MseEstimate(acc.total / acc.count, acc.count, acc.skipped)


def _chunks(total, size):
    done = 0
    while done < total:
        step = min(size, total - done)
        yield step
        done += step


def estimate_plugin_dgp(truth: DgpSpec, sample_size: int, rng: np.random.Generator) -> DgpSpec:
    """All-normal DGP with mean and covariance estimated from one true-DGP sample."""
    if sample_size <= truth.p + 1:
        raise ValueError("plug-in sample must have more rows than p + 1")
    data = sample_designs(truth, sample_size, 1, rng, intercept=False)[0]
    return normal_dgp(data.mean(axis=0), np.cov(data, rowvar=False).reshape(truth.p, truth.p))


def run_parametric_study(config: StudyConfig, repetition: int) -> MseEstimate:
    """One parametric (or plug-in parametric) study for repetition ``repetition``."""
    seed = config.master_seed
    base = (streams.NS_STUDY, repetition)
    if config.mode == "plugin":
        dgp = estimate_plugin_dgp(config.truth_dgp, config.plugin_sample_size,
                                  streams.derive_stream(seed, base + (streams.ROLE_PLUGIN,)))
    else:
        dgp = config.assumed_dgp
    k = dgp.p + 1
    design_rng = streams.derive_stream(seed, base + (streams.ROLE_DESIGN,))
    noise_rng = streams.derive_stream(seed, base + (streams.ROLE_NOISE,))
    size = batch_size(config.n, k)
    batches = (sample_designs(dgp, config.n, c, design_rng) for c in _chunks(config.n_mod, size))
    return _squared_error_mean(batches, config.assumed_ogm, noise_rng, k)


def run_plasmode_study(config: StudyConfig, repetition: int) -> MseEstimate:
    """One Plasmode study: a fresh source from the true DGP, then resampling."""
    plan = config.plan
    seed = config.master_seed
    base = (streams.NS_STUDY, repetition)
    source = sample_designs(config.truth_dgp, plan.source_size, 1,
                            streams.derive_stream(seed, base + (streams.ROLE_SOURCE,)))[0]
    k = source.shape[1]
    resample_rng = streams.derive_stream(seed, base + (streams.ROLE_RESAMPLE,))
    noise_rng = streams.derive_stream(seed, base + (streams.ROLE_NOISE,))
    size = batch_size(plan.target_n, k)
    batches = (resample_many(plan, source, c, resample_rng) for c in _chunks(config.n_mod, size))
    return _squared_error_mean(batches, config.assumed_ogm, noise_rng, k)


def run_study(config: StudyConfig, repetition: int) -> MseEstimate:
    if config.mode == "plasmode":
        return run_plasmode_study(config, repetition)
    return run_parametric_study(config, repetition)


def _study_task(args):
    config, repetition = args
    return run_study(config, repetition)


def run_repetitions(config: StudyConfig, workers: int = 1) -> list:
    """All ``n_mse`` repetitions of a study, in repetition order."""
    tasks = [(config, k) for k in range(config.n_mse)]
    if workers <= 1:
        return [_study_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_study_task, tasks))


def _truth_chunk(args):
    dgp, ogm, n, count, seed, index, intercept = args
    k = dgp.p + (1 if intercept else 0)
    design_rng = streams.derive_stream(seed, (streams.NS_TRUTH, index, streams.ROLE_DESIGN))
    noise_rng = streams.derive_stream(seed, (streams.NS_TRUTH, index, streams.ROLE_NOISE))
    acc = _Accumulator(k)
    for c in _chunks(count, batch_size(n, k)):
        designs = sample_designs(dgp, n, c, design_rng, intercept=intercept)
        noise = ogm.error.sd * standardized_errors(ogm.error, designs.shape[:2], noise_rng)
        acc.add(designs, noise)
    return acc


def estimate_true_mse(dgp: DgpSpec, ogm: OgmSpec, n: int, replications: int, seed: int,
                      workers: int = 1, intercept: bool = True) -> TrueMse:
    """Monte Carlo approximation of the true component-wise MSE.

    Replications are split into fixed chunks of ``TRUTH_CHUNK`` datasets, each
    with its own stream, so the result does not depend on ``workers``.
    ``intercept=False`` fits the model without the constant column.
    """
    if replications < 1000:
        raise ValueError("the true-MSE oracle needs at least 1000 replications")
    tasks = [(dgp, ogm, n, c, seed, i, intercept)
             for i, c in enumerate(_chunks(replications, TRUTH_CHUNK))]
    if workers <= 1:
        parts = [_truth_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_truth_chunk, tasks))
    total = sum(p.total for p in parts)
    total_sq = sum(p.total_sq for p in parts)
    count = sum(p.count for p in parts)
    skipped = sum(p.skipped for p in parts)
    if count == 0:
        raise RankDeficiencyError("all oracle draws were rank deficient")
    mean = total / count
    if count > 1:
        var = np.maximum(total_sq / count - mean * mean, 0.0) * count / (count - 1)
        se = np.sqrt(var / count)
    else:
        se = np.zeros_like(mean)
    return TrueMse(mean, se, count, skipped)


def analytic_slope_mse(covariance, error_variance: float, n: int, p: int) -> np.ndarray:
    """Expected slope MSE for a centered Gaussian design fitted without intercept.

    ``X^T X`` is Wishart(n, Sigma), so ``E[(X^T X)^-1] = Sigma^-1 / (n - p - 1)``.
    """
    if n <= p + 1:
        raise ValueError("need n > p + 1 for a finite inverse-Wishart mean")
    cov = np.atleast_2d(np.asarray(covariance, dtype=float))
    if cov.shape != (p, p):
        raise ValueError(f"covariance must be {p} x {p}")
    return error_variance * np.diag(np.linalg.inv(cov)) / (n - p - 1)
