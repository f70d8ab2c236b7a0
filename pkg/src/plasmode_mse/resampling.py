"""Plasmode resampling of a source design matrix.

All strategies keep the intercept column (column 0) as ones and operate on
the feature columns only.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import ceil
from typing import Optional

import numpy as np

STRATEGIES = ("mOutOfN", "nOutOfN", "subsampling", "smoothed", "wild", "none")
_PROPORTIONAL = ("mOutOfN", "subsampling")


class ResamplingError(ValueError):
    pass


def source_size_for(n: int, proportion: float) -> int:
    """Rows of the source dataset: ``ceil(n / proportion)``."""
    # round first so 100 / 0.1 does not land one row high on representation error
    return int(ceil(round(n / proportion, 9)))


@dataclass(frozen=True)
class ResamplePlan:
    """Resampling strategy, proportion and sizes.

    ``proportion`` is only meaningful for ``mOutOfN`` and ``subsampling``.
    ``pinned_source`` fixes the source size regardless of the proportion,
    which expresses studies where the resampled size differs from the
    available data.
    """

    strategy: str
    target_n: int
    proportion: float = 1.0
    pinned_source: Optional[int] = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown resampling strategy {self.strategy!r}")
        if not 0.0 < self.proportion <= 1.0:
            raise ValueError(f"proportion must lie in (0, 1], got {self.proportion}")
        if self.strategy not in _PROPORTIONAL and self.proportion != 1.0:
            raise ValueError(f"{self.strategy} does not take a resampling proportion")
        if self.target_n < 1:
            raise ValueError("target_n must be positive")
        if self.pinned_source is not None:
            if self.pinned_source < 1:
                raise ValueError("pinned source size must be positive")
            if self.strategy == "subsampling" and self.target_n > self.pinned_source:
                raise ValueError("subsampling cannot draw more rows than the source holds")
            if self.strategy in ("none", "wild") and self.target_n != self.pinned_source:
                raise ValueError(f"{self.strategy} keeps the source size")

    @property
    def source_size(self) -> int:
        if self.pinned_source is not None:
            return self.pinned_source
        if self.strategy in _PROPORTIONAL:
            return source_size_for(self.target_n, self.proportion)
        return self.target_n

    @property
    def label(self) -> str:
        if self.strategy in _PROPORTIONAL:
            return f"{self.strategy}({self.proportion:g})"
        return self.strategy


def silverman_bandwidth(features: np.ndarray) -> np.ndarray:
    """Silverman's rule-of-thumb bandwidth matrix for a Gaussian kernel.

    ``H = (4 / (d + 2))**(2 / (d + 4)) * m**(-2 / (d + 4)) * S`` with ``S`` the
    sample covariance of the ``m x d`` feature matrix (no intercept column).
    """
    features = np.asarray(features, dtype=float)
    if features.ndim == 1:
        features = features[:, None]
    m, d = features.shape
    if m < 2:
        raise ValueError("bandwidth estimation needs at least two rows")
    factor = (4 / (d + 2)) ** (2 / (d + 4)) * m ** (-2 / (d + 4))
    return factor * np.atleast_2d(np.cov(features, rowvar=False))


def _psd_factor(H):
    vals, vecs = np.linalg.eigh((H + H.T) / 2)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def resample_many(plan: ResamplePlan, source: np.ndarray, count: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` resampled designs, shape ``(count, target_n, p+1)``.

    The bandwidth (smoothed) and column moments (wild) are computed once
    from ``source``.
    """
    source = np.asarray(source, dtype=float)
    m = source.shape[0]
    if m != plan.source_size:
        raise ResamplingError(f"source has {m} rows, plan expects {plan.source_size}")
    n = plan.target_n
    s = plan.strategy

    if s == "none":
        return np.broadcast_to(source, (count,) + source.shape).copy()
    if s in ("mOutOfN", "nOutOfN", "smoothed"):
        idx = rng.integers(0, m, size=(count, n))
        out = source[idx]
        if s == "smoothed":
            factor = _psd_factor(silverman_bandwidth(source[:, 1:]))
            noise = rng.standard_normal((count, n, factor.shape[0])) @ factor.T
            out[..., 1:] += noise
        return out
    if s == "subsampling":
        idx = np.stack([rng.choice(m, size=n, replace=False) for _ in range(count)])
        return source[idx]
    # wild
    feats = source[:, 1:]
    centered = feats - feats.mean(axis=0)
    sd = feats.std(axis=0, ddof=1)
    if np.any(sd == 0):
        raise ResamplingError("wild bootstrap needs non-constant feature columns")
    scaled = centered / sd
    a = rng.standard_normal((count, 1, feats.shape[1]))
    out = np.empty((count,) + source.shape)
    out[..., 0] = source[:, 0]
    out[..., 1:] = feats + a * scaled
    return out


def resample(plan: ResamplePlan, source: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one resampled design from ``source`` according to ``plan``."""
    return resample_many(plan, source, 1, rng)[0]
