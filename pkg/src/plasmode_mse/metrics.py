"""Errors of estimated MSEs, repetition summaries and crossover analysis."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np


@dataclass
class ErrorReport:
    """Component-wise errors of one estimated MSE vector against the truth.

    ``run_aggregate`` is the mean absolute relative error over coefficients,
    ``signed_run_aggregate`` the plain mean of the relative errors.
    Relative entries are NaN where the true MSE is zero but the estimate is not.
    """

    absolute: np.ndarray
    relative: np.ndarray
    run_aggregate: float
    signed_run_aggregate: float
    absolute_aggregate: float
    signed_absolute_aggregate: float


def component_errors(estimate, truth) -> ErrorReport:
    est = np.asarray(getattr(estimate, "per_coefficient", estimate), dtype=float)
    true = np.asarray(getattr(truth, "per_coefficient", truth), dtype=float)
    if est.shape != true.shape:
        raise ValueError(f"estimate has shape {est.shape}, truth {true.shape}")
    absolute = est - true
    with np.errstate(divide="ignore", invalid="ignore"):
        relative = np.where(true != 0, absolute / true, np.where(absolute == 0, 0.0, np.nan))
    return ErrorReport(
        absolute=absolute,
        relative=relative,
        run_aggregate=float(np.mean(np.abs(relative))),
        signed_run_aggregate=float(np.mean(relative)),
        absolute_aggregate=float(np.mean(np.abs(absolute))),
        signed_absolute_aggregate=float(np.mean(absolute)),
    )


@dataclass
class RepetitionSummary:
    """Boxplot statistics over repetitions (type-7 quartiles, 1.5 IQR whiskers)."""

    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    minimum: float
    maximum: float
    n: int
    outliers: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"n": self.n, "median": self.median, "q1": self.q1, "q3": self.q3,
                "whisker_low": self.whisker_low, "whisker_high": self.whisker_high,
                "min": self.minimum, "max": self.maximum, "n_outliers": len(self.outliers)}


def summarize_repetitions(values: Sequence[float]) -> RepetitionSummary:
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise ValueError("cannot summarize an empty sample")
    q1, median, q3 = np.quantile(x, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = x[(x >= lo_fence) & (x <= hi_fence)]
    outliers = x[(x < lo_fence) | (x > hi_fence)]
    return RepetitionSummary(
        median=float(median), q1=float(q1), q3=float(q3),
        whisker_low=float(inside.min()), whisker_high=float(inside.max()),
        minimum=float(x[0]), maximum=float(x[-1]), n=int(x.size),
        outliers=[float(v) for v in outliers],
    )


@dataclass
class CrossoverResult:
    axis: list
    first_worse: dict


def crossover(parametric: Sequence, baselines: Mapping[str, RepetitionSummary]) -> CrossoverResult:
    """First deviation at which parametric simulation does worse than each baseline.

    ``parametric`` is a sequence of ``(deviation value, RepetitionSummary)``
    already ordered by increasing deviation magnitude.  For every baseline
    variant the result holds the first value whose parametric median exceeds
    the baseline median, or ``None`` if none does.
    """
    parametric = list(parametric)
    if not parametric:
        raise ValueError("deviation axis is empty")
    axis = [value for value, _ in parametric]
    first: dict = {}
    for name, base in baselines.items():
        hit: Optional[object] = None
        for value, summary in parametric:
            if summary.median > base.median:
                hit = value
                break
        first[name] = hit
    return CrossoverResult(axis=axis, first_worse=first)
