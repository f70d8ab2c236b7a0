"""Configuration-driven sweeps over truths, deviations and simulation variants."""
from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from .dgp import CorrelationSpec, InfeasibleCorrelationError
from .engine import RankDeficiencyError, StudyConfig, estimate_true_mse, run_study
from .io import DatasetError, ingest_dataset
from .metrics import RepetitionSummary, component_errors, crossover, summarize_repetitions
from .resampling import ResamplePlan
from .scenarios import (
    BUILTIN_TRUTHS,
    TRUE_MODEL,
    Deviation,
    Truth,
    dataset_truth,
)

log = logging.getLogger(__name__)

WORKERS_ENV = "PLASMODE_MSE_WORKERS"
DEFAULT_RUNTIME = {
    "n_mse": 100,
    "n_mod": 1000,
    "truth_replications": 1_000_000,
    "master_seed": 0,
    "workers": 1,
    "plugin_sample_size": 1000,
}


class ConfigError(ValueError):
    pass


class OracleError(RuntimeError):
    """The true-MSE oracle failed; a sweep cannot continue without it."""


# ---------------------------------------------------------------------------
# Config model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Variant:
    """A simulation type: parametric, plug-in parametric or Plasmode with a plan."""

    kind: str
    strategy: Optional[str] = None
    proportion: float = 1.0
    sample_size: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("parametric", "plugin", "plasmode"):
            raise ConfigError(f"unknown simulation type {self.kind!r}")
        if self.kind == "plasmode" and self.strategy is None:
            raise ConfigError("plasmode simulations need a resampling strategy")

    @property
    def label(self) -> str:
        if self.kind == "plasmode":
            return "plasmode:" + ResamplePlan(self.strategy, 1, self.proportion).label
        return self.kind

    def plan(self, n: int) -> Optional[ResamplePlan]:
        if self.kind != "plasmode":
            return None
        return ResamplePlan(self.strategy, n, self.proportion)

    def to_dict(self) -> dict:
        out = {"type": self.kind}
        if self.kind == "plasmode":
            out.update(strategy=self.strategy, proportion=self.proportion)
        if self.sample_size is not None:
            out["sample_size"] = self.sample_size
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Variant":
        kind = d.get("type")
        proportion = float(d.get("proportion", 1.0))
        try:
            variant = cls(kind, d.get("strategy"), proportion,
                          None if d.get("sample_size") is None else int(d["sample_size"]))
            variant.plan(100)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return variant


@dataclass
class Scenario:
    truth: Truth
    deviations: list
    source: dict = field(default_factory=dict)


@dataclass
class SweepConfig:
    scenarios: list
    variants: list
    runtime: dict
    raw: dict = field(default_factory=dict)

    @property
    def workers(self) -> int:
        return int(self.runtime["workers"])


def expand_values(values) -> list:
    """Expand a value grid; ``{"from", "to", "step"}`` objects become ranges."""
    out = []
    for item in values:
        if isinstance(item, dict) and {"from", "to", "step"} <= set(item):
            start, stop, step = float(item["from"]), float(item["to"]), float(item["step"])
            if step <= 0 or stop < start:
                raise ConfigError(f"bad range {item}")
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            out.extend(float(np.round(start + k * step, 10)) for k in range(count))
        else:
            out.append(item)
    if not out:
        raise ConfigError("value grids must not be empty")
    return out


def parse_deviations(entries) -> list:
    """Turn ``{"kind", "values", ...}`` entries into a flat list of deviations."""
    out = []
    for entry in entries:
        if "kind" not in entry or "values" not in entry:
            raise ConfigError(f"deviation entries need 'kind' and 'values': {entry}")
        shared = {k: v for k, v in entry.items() if k not in ("values",)}
        for item in expand_values(entry["values"]):
            d = dict(shared)
            if isinstance(item, dict):
                d.update(item)
            else:
                d["value"] = item
            try:
                out.append(Deviation.from_dict(d))
            except (ValueError, KeyError) as exc:
                raise ConfigError(str(exc)) from exc
    return out


def load_preset(name: str) -> dict:
    if name != "full_grid":
        raise ConfigError(f"unknown preset {name!r}")
    text = resources.files("plasmode_mse").joinpath("presets", "full_grid.json").read_text("utf-8")
    return json.loads(text)["scenarios"]


def _parse_truth(entry: dict, base_dir: str) -> Truth:
    if "truth" in entry:
        name = entry["truth"]
        if name not in BUILTIN_TRUTHS:
            raise ConfigError(f"unknown built-in truth {name!r}; known: {sorted(BUILTIN_TRUTHS)}")
        return BUILTIN_TRUTHS[name]
    name = entry.get("name")
    if not name:
        raise ConfigError("scenario needs either 'truth' or a 'name'")
    if "n" not in entry:
        raise ConfigError(f"scenario {name} needs 'n'")
    if "dataset" in entry:
        path = entry["dataset"]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        summary = ingest_dataset(path)
        return dataset_truth(name, summary.correlation, entry["n"])
    corr = entry.get("correlation")
    if corr is None or "p" not in entry:
        raise ConfigError(f"scenario {name} needs 'p' and 'correlation', or a 'dataset'")
    kind = corr.get("kind")
    if kind == "fixed":
        spec = CorrelationSpec.fixed(corr["rho"])
    elif kind == "power_block":
        spec = CorrelationSpec.power_block(corr["rho"], corr["block_size"], corr.get("block_count", 1))
    elif kind == "explicit":
        spec = CorrelationSpec.explicit(corr["matrix"])
    else:
        raise ConfigError(f"unknown correlation kind {kind!r}")
    return Truth(name, int(entry["p"]), int(entry["n"]), spec,
                 float(entry.get("error_sd", 0.3)))


def parse_config(raw: dict, base_dir: str = ".", preset: Optional[str] = None,
                 overrides: Optional[dict] = None) -> SweepConfig:
    """Validate a config mapping.

    ``preset`` fills in the deviation grid of every scenario that lists none;
    ``overrides`` replaces runtime entries (command-line flags).
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    entries = raw.get("scenarios")
    if entries is None and "truth" in raw:
        entries = [raw]
    if not entries:
        raise ConfigError("config needs a non-empty 'scenarios' list")
    preset = preset or raw.get("preset")
    grids = load_preset(preset) if preset else {}

    scenarios = []
    for entry in entries:
        try:
            truth = _parse_truth(entry, base_dir)
        except (ConfigError, DatasetError):
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        dev_entries = entry.get("deviations")
        if dev_entries is None:
            dev_entries = grids.get(truth.name, [])
        scenarios.append(Scenario(truth, parse_deviations(dev_entries), dict(entry)))

    variants = [Variant.from_dict(v) for v in raw.get("simulations", [{"type": "parametric"}])]
    if not variants:
        raise ConfigError("config needs at least one simulation")
    if len({v.label for v in variants}) != len(variants):
        raise ConfigError("duplicate simulation entries")

    runtime = dict(DEFAULT_RUNTIME)
    unknown = set(raw.get("runtime", {})) - set(DEFAULT_RUNTIME)
    if unknown:
        raise ConfigError(f"unknown runtime keys {sorted(unknown)}")
    runtime.update(raw.get("runtime", {}))
    if os.environ.get(WORKERS_ENV):
        runtime["workers"] = int(os.environ[WORKERS_ENV])
    for key, val in (overrides or {}).items():
        if val is not None:
            runtime[key] = val
    for key in ("n_mse", "n_mod", "truth_replications", "workers", "plugin_sample_size"):
        runtime[key] = int(runtime[key])
        if runtime[key] < 1:
            raise ConfigError(f"runtime {key} must be positive")
    runtime["master_seed"] = int(runtime["master_seed"])
    echo = dict(raw)
    if preset:
        echo["preset"] = preset
    return SweepConfig(scenarios, variants, runtime, echo)


def load_config(path: str, **kwargs) -> SweepConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw, os.path.dirname(os.path.abspath(path)), **kwargs)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass
class StudyResult:
    scenario: str
    variant: str
    deviation: Deviation
    estimates: list
    reports: list
    aggregate: RepetitionSummary
    signed: RepetitionSummary
    coefficient_summaries: list
    psd_repaired: bool = False


@dataclass
class CrossoverRow:
    scenario: str
    group: str
    side: str
    reference: float
    axis: list
    first_worse: dict


@dataclass
class ResultsBundle:
    config: dict
    runtime: dict
    truths: dict = field(default_factory=dict)
    results: list = field(default_factory=list)
    crossovers: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    variants: list = field(default_factory=list)


def truth_key(dgp, ogm, n: int, replications: int, seed: int) -> str:
    payload = json.dumps({"dgp": dgp.to_dict(), "ogm": ogm.to_dict(), "n": n,
                          "replications": replications, "seed": seed}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class TruthCache:
    """True-MSE oracle results keyed by a content hash of their inputs."""

    def __init__(self):
        self._store = {}

    def get(self, truth: Truth, replications: int, seed: int, workers: int = 1):
        dgp, ogm = truth.dgp(), truth.ogm()
        key = truth_key(dgp, ogm, truth.n, replications, seed)
        if key not in self._store:
            log.info("computing true MSE for %s (%d replications)", truth.name, replications)
            self._store[key] = estimate_true_mse(dgp, ogm, truth.n, replications, seed,
                                                 workers=workers)
        return key, self._store[key]


def _study_task(args):
    config, k = args
    try:
        return run_study(config, k)
    except RankDeficiencyError as exc:
        return exc


def _applies(variant: Variant, deviation: Deviation) -> bool:
    # Only the parametric route takes an assumed feature distribution.
    return variant.kind == "parametric" or not deviation.affects_dgp


def _summaries(reports: list, p1: int):
    agg = summarize_repetitions([r.run_aggregate for r in reports])
    signed = summarize_repetitions([r.signed_run_aggregate for r in reports])
    per_coef = [summarize_repetitions([r.relative[j] for r in reports]) for j in range(p1)]
    return agg, signed, per_coef


def _crossover_rows(scenario: Scenario, results: list, baselines: dict) -> list:
    rows = []
    if not baselines:
        return rows
    groups = {}
    for res in results:
        if res.variant != "parametric" or res.deviation.kind == "true_model":
            continue
        ref = res.deviation.crossover_reference(scenario.truth)
        if ref is None or not isinstance(res.deviation.value, float):
            continue
        groups.setdefault((res.deviation.group, ref), []).append(res)
    for (group, ref), members in groups.items():
        below = sorted((r for r in members if r.deviation.value < ref),
                       key=lambda r: -r.deviation.value)
        above = sorted((r for r in members if r.deviation.value > ref),
                       key=lambda r: r.deviation.value)
        for side, axis in (("below", below), ("above", above)):
            if not axis:
                continue
            out = crossover([(r.deviation.value, r.aggregate) for r in axis], baselines)
            rows.append(CrossoverRow(scenario.truth.name, group, side, ref, out.axis,
                                     out.first_worse))
    return rows


def run_sweep(config: SweepConfig, cache: Optional[TruthCache] = None) -> ResultsBundle:
    """Run every (scenario, deviation, variant) study of ``config``.

    Infeasible or fully rank-deficient entries are recorded in
    ``bundle.skipped``; a failing oracle raises :class:`OracleError`.
    """
    rt = config.runtime
    cache = cache or TruthCache()
    bundle = ResultsBundle(config=config.raw, runtime=dict(rt),
                           variants=[v.label for v in config.variants])
    jobs = []
    for scenario in config.scenarios:
        truth = scenario.truth
        try:
            key, true_mse = cache.get(truth, rt["truth_replications"], rt["master_seed"],
                                      rt["workers"])
        except (RankDeficiencyError, ValueError, np.linalg.LinAlgError) as exc:
            raise OracleError(f"true MSE for {truth.name} failed: {exc}") from exc
        bundle.truths[truth.name] = {"key": key, "truth": truth, "true_mse": true_mse}

        deviations = [TRUE_MODEL] + [d for d in scenario.deviations if d.kind != "true_model"]
        seen = set()
        for deviation in deviations:
            if deviation.label in seen:
                continue
            seen.add(deviation.label)
            try:
                assumed_dgp, assumed_ogm = deviation.resolve(truth)
            except (InfeasibleCorrelationError, ValueError, np.linalg.LinAlgError) as exc:
                bundle.skipped.append({"scenario": truth.name, "deviation": deviation.label,
                                       "variant": "*", "reason": str(exc)})
                continue
            for variant in config.variants:
                if not _applies(variant, deviation):
                    continue
                study = StudyConfig(
                    truth_dgp=truth.dgp(), truth_ogm=truth.ogm(), assumed_ogm=assumed_ogm,
                    n=truth.n, n_mse=rt["n_mse"], n_mod=rt["n_mod"], mode=variant.kind,
                    assumed_dgp=assumed_dgp if variant.kind == "parametric" else None,
                    plan=variant.plan(truth.n),
                    plugin_sample_size=variant.sample_size or rt["plugin_sample_size"],
                    master_seed=rt["master_seed"])
                jobs.append((scenario, deviation, variant, study,
                             assumed_dgp.psd_repaired and variant.kind == "parametric"))

    tasks = [(job[3], k) for job in jobs for k in range(rt["n_mse"])]
    if rt["workers"] <= 1:
        outputs = [_study_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=rt["workers"]) as pool:
            outputs = list(pool.map(_study_task, tasks, chunksize=max(1, rt["n_mse"] // 4)))

    by_scenario = {}
    for idx, (scenario, deviation, variant, study, repaired) in enumerate(jobs):
        chunk = outputs[idx * rt["n_mse"]:(idx + 1) * rt["n_mse"]]
        failure = next((o for o in chunk if isinstance(o, Exception)), None)
        if failure is not None:
            bundle.skipped.append({"scenario": scenario.truth.name, "deviation": deviation.label,
                                   "variant": variant.label, "reason": str(failure)})
            continue
        true_mse = bundle.truths[scenario.truth.name]["true_mse"]
        reports = [component_errors(est, true_mse) for est in chunk]
        agg, signed, per_coef = _summaries(reports, scenario.truth.p + 1)
        res = StudyResult(scenario.truth.name, variant.label, deviation, chunk, reports,
                          agg, signed, per_coef, repaired)
        bundle.results.append(res)
        by_scenario.setdefault(id(scenario), (scenario, []))[1].append(res)

    for scenario, results in by_scenario.values():
        baselines = {r.variant: r.aggregate for r in results
                     if r.deviation.kind == "true_model" and r.variant != "parametric"}
        bundle.crossovers.extend(_crossover_rows(scenario, results, baselines))
    return bundle


def run_truth_only(config: SweepConfig, cache: Optional[TruthCache] = None) -> dict:
    """True MSEs of every scenario in ``config``, keyed by scenario name."""
    cache = cache or TruthCache()
    rt = config.runtime
    out = {}
    for scenario in config.scenarios:
        try:
            key, tm = cache.get(scenario.truth, rt["truth_replications"], rt["master_seed"],
                                rt["workers"])
        except (RankDeficiencyError, ValueError, np.linalg.LinAlgError) as exc:
            raise OracleError(f"true MSE for {scenario.truth.name} failed: {exc}") from exc
        out[scenario.truth.name] = {"key": key, "true_mse": tm}
    return out

