"""Dataset ingestion and result files."""
from __future__ import annotations

import csv
import json
import os
import platform
from dataclasses import dataclass

import numpy as np
import pandas as pd

CORRELATION_BOUND = 0.95

RUNS_HEADER = ["scenario", "variant", "deviation_group", "deviation_value", "deviation",
               "repetition", "coefficient", "estimated_mse", "true_mse", "absolute_error",
               "relative_error", "rank_deficient"]
SUMMARY_HEADER = ["scenario", "variant", "deviation_group", "deviation_value", "deviation",
                  "statistic", "coefficient", "n", "median", "q1", "q3", "whisker_low",
                  "whisker_high", "min", "max", "n_outliers", "psd_repaired"]
CROSSOVER_FIXED = ["scenario", "deviation_group", "side", "true_value", "axis"]


class DatasetError(ValueError):
    """Base class for rejected datasets."""


class MissingValuesError(DatasetError):
    pass


class NonNumericError(DatasetError):
    pass


class CorrelationBoundError(DatasetError):
    def __init__(self, message, pair=None, value=None):
        super().__init__(message)
        self.pair = pair
        self.value = value


@dataclass
class DatasetSummary:
    feature_count: int
    row_count: int
    dropped_constant_columns: list
    columns: list
    correlation: np.ndarray
    max_abs_pairwise_correlation: float
    standardized: np.ndarray

    def to_dict(self) -> dict:
        return {"feature_count": self.feature_count, "row_count": self.row_count,
                "dropped_constant_columns": list(self.dropped_constant_columns),
                "columns": list(self.columns),
                "max_abs_pairwise_correlation": self.max_abs_pairwise_correlation,
                "correlation": self.correlation.tolist()}


def ingest_dataset(path, bound: float = CORRELATION_BOUND) -> DatasetSummary:
    """Read a numeric CSV with a header row and estimate its correlation matrix.

    Constant columns are dropped; missing values, non-numeric cells and any
    absolute pairwise correlation above ``bound`` reject the file.
    """
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if frame.shape[0] < 2 or frame.shape[1] < 1:
        raise DatasetError(f"{path}: need a header row and at least two data rows")
    stripped = frame.apply(lambda col: col.str.strip())
    missing = stripped.isin(["", "NA", "NaN", "nan", "null", "NULL", "?"])
    if missing.any().any():
        row, col = np.argwhere(missing.to_numpy())[0]
        raise MissingValuesError(f"{path}: missing value in column {frame.columns[col]!r}, "
                                 f"data row {row + 1} ({int(missing.to_numpy().sum())} in total)")
    numeric = stripped.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna()
    if bad.any().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        raise NonNumericError(f"{path}: non-numeric cell {frame.iat[row, col]!r} in column "
                              f"{frame.columns[col]!r}, data row {row + 1}")
    values = numeric.to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        raise NonNumericError(f"{path}: non-finite values present")

    constant = [c for c, col in zip(frame.columns, values.T) if np.ptp(col) == 0]
    keep = [i for i, c in enumerate(frame.columns) if c not in constant]
    if not keep:
        raise DatasetError(f"{path}: every column is constant")
    data = values[:, keep]
    standardized = (data - data.mean(axis=0)) / data.std(axis=0, ddof=1)
    corr = np.atleast_2d(np.corrcoef(standardized, rowvar=False))
    corr = (corr + corr.T) / 2
    np.fill_diagonal(corr, 1.0)
    off = np.abs(corr - np.eye(len(keep)))
    max_abs = float(off.max()) if len(keep) > 1 else 0.0
    if max_abs > bound:
        i, j = np.unravel_index(np.argmax(off), off.shape)
        names = [frame.columns[keep[i]], frame.columns[keep[j]]]
        raise CorrelationBoundError(
            f"{path}: |correlation| of columns {names[0]!r} and {names[1]!r} is "
            f"{max_abs:.4f} > {bound}", pair=tuple(names), value=max_abs)
    return DatasetSummary(
        feature_count=len(keep), row_count=data.shape[0], dropped_constant_columns=constant,
        columns=[frame.columns[i] for i in keep], correlation=corr,
        max_abs_pairwise_correlation=max_abs, standardized=standardized,
    )


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _deviation_cells(dev):
    value = dev.value
    return [dev.group, _fmt(value), dev.label]


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(c) for c in row])


def runs_rows(bundle):
    for res in bundle.results:
        true = bundle.truths[res.scenario]["true_mse"].per_coefficient
        dev = _deviation_cells(res.deviation)
        for k, (est, rep) in enumerate(zip(res.estimates, res.reports)):
            for j in range(len(true)):
                yield [res.scenario, res.variant, *dev, k, j, est.per_coefficient[j], true[j],
                       rep.absolute[j], rep.relative[j], est.rank_deficient]


def summary_rows(bundle):
    for res in bundle.results:
        dev = _deviation_cells(res.deviation)
        items = [("aggregate_abs_relative", "", res.aggregate),
                 ("aggregate_signed_relative", "", res.signed)]
        items += [("relative", j, s) for j, s in enumerate(res.coefficient_summaries)]
        for stat, coef, s in items:
            yield [res.scenario, res.variant, *dev, stat, coef, s.n, s.median, s.q1, s.q3,
                   s.whisker_low, s.whisker_high, s.minimum, s.maximum, len(s.outliers),
                   res.psd_repaired]


def crossover_header(bundle):
    baselines = [v for v in bundle.variants if v != "parametric"]
    return CROSSOVER_FIXED + baselines


def crossover_rows(bundle):
    baselines = [v for v in bundle.variants if v != "parametric"]
    for row in bundle.crossovers:
        axis = " ".join(_fmt(v) for v in row.axis)
        yield [row.scenario, row.group, row.side, row.reference, axis] + \
              [row.first_worse.get(b) for b in baselines]


def manifest(bundle) -> dict:
    from . import __version__

    truths = {}
    for name, entry in bundle.truths.items():
        tm = entry["true_mse"]
        truths[name] = {
            "key": entry["key"],
            "truth": entry["truth"].to_dict(),
            "replications": tm.replications,
            "rank_deficient": tm.rank_deficient,
            "true_mse": [float(v) for v in tm.per_coefficient],
            "standard_errors": [float(v) for v in tm.standard_errors],
        }
    return {
        "package": "plasmode_mse",
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "runtime": bundle.runtime,
        "seeds": {"master_seed": bundle.runtime.get("master_seed")},
        "config": bundle.config,
        "variants": bundle.variants,
        "truths": truths,
        "skipped": bundle.skipped,
    }


def emit_results(bundle, out_dir) -> dict:
    """Write runs.csv, summary.csv, crossover.csv and manifest.json; return their paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {name: os.path.join(out_dir, name) for name in
             ("runs.csv", "summary.csv", "crossover.csv", "manifest.json")}
    _write_csv(paths["runs.csv"], RUNS_HEADER, runs_rows(bundle))
    _write_csv(paths["summary.csv"], SUMMARY_HEADER, summary_rows(bundle))
    _write_csv(paths["crossover.csv"], crossover_header(bundle), crossover_rows(bundle))
    with open(paths["manifest.json"], "w", encoding="utf-8") as fh:
        json.dump(manifest(bundle), fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return paths


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")
