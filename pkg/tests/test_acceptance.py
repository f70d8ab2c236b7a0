"""One test per acceptance criterion; each prints a single PASS/FAIL line."""
import numpy as np
import pytest

from plasmode_mse.cli import main
from plasmode_mse.dgp import (
    CorrelationSpec,
    InfeasibleCorrelationError,
    MarginalSpec,
    normal_dgp,
    resolve_underlying_covariance,
    sample_designs,
    solve_bernoulli_pair,
)
from plasmode_mse.engine import StudyConfig, analytic_slope_mse, estimate_true_mse, run_study
from plasmode_mse.metrics import component_errors
from plasmode_mse.ogm import ErrorDistSpec, OgmSpec
from plasmode_mse.scenarios import BUILTIN_TRUTHS
from plasmode_mse.sweep import parse_config, run_sweep

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def _report(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        assert ok, f"{criterion}: {detail}"
    return _report


def _results(bundle):
    return {(r.variant, r.deviation.label): r for r in bundle.results}


def test_ac01_analytic_oracle(report):
    tm = estimate_true_mse(normal_dgp(np.zeros(2), np.eye(2)),
                           OgmSpec(np.ones(2), ErrorDistSpec.normal(0.3)), 100, 1_000_000, 1,
                           intercept=False)
    expected = analytic_slope_mse(np.eye(2), 0.09, 100, 2)
    z = (tm.per_coefficient - expected) / tm.standard_errors
    report("AC1 analytic oracle", bool(np.all(np.abs(z) < 3)),
           f"MC {tm.per_coefficient} vs {expected[0]:.6e}, z = {np.round(z, 3)}")


def test_ac02_tetrachoric_identity(report):
    rhos = [-0.7, -0.5, -0.3, -0.1, 0.1, 0.3, 0.5, 0.7]
    dev = max(abs(solve_bernoulli_pair(0.5, 0.5, r) - np.sin(np.pi * r / 2)) for r in rhos)
    report("AC2 tetrachoric identity", dev <= 2e-4, f"max |solve - sin(pi rho/2)| = {dev:.2e}")


ROUND_TRIP_PAIRS = {
    "bernoulli-bernoulli": (MarginalSpec.bernoulli(0.4), MarginalSpec.bernoulli(0.5)),
    "bernoulli-normal": (MarginalSpec.bernoulli(0.3), MarginalSpec.normal(1.0, 2.0)),
    "lognormal-lognormal": (MarginalSpec.lognormal(0.0, 1.0), MarginalSpec.lognormal(0.5, 0.5)),
    "lognormal-normal": (MarginalSpec.lognormal(0.0, 1.0), MarginalSpec.normal(0.0, 1.0)),
    "mixture-normal": (MarginalSpec.mixture(0.3, (3.0, 1.0), (0.0, 1.0)), MarginalSpec.normal()),
    "mixture-mixture": (MarginalSpec.mixture(0.3, (3.0, 1.0), (0.0, 1.0)),
                        MarginalSpec.mixture(0.5, (0.0, 10.0), (0.0, 1.0))),
}


def test_ac03_round_trips(report):
    rng = np.random.default_rng(33)
    worst, lines, checked = 0.0, [], 0
    for name, pair in ROUND_TRIP_PAIRS.items():
        for target in (-0.2, 0.2, 0.5):
            try:
                spec = resolve_underlying_covariance(list(pair), CorrelationSpec.fixed(target))
            except InfeasibleCorrelationError:
                lines.append(f"{name}@{target:+.1f}:infeasible")
                continue
            x = sample_designs(spec, 1_000_000, 1, rng, intercept=False)[0]
            err = abs(np.corrcoef(x, rowvar=False)[0, 1] - target)
            worst = max(worst, err)
            checked += 1
            lines.append(f"{name}@{target:+.1f}:{err:.4f}")
    report("AC3 round trips", worst < 0.01 and checked >= 15,
           f"{checked} feasible targets, max error {worst:.4f} ({' '.join(lines)})")


def test_ac04_beta_invariance(report):
    raw = {"scenarios": [{"truth": "p10n100rho0.2", "deviations": [
        {"kind": "coefficients", "values": ["I", "II", "III", "IV"]}]}],
        "simulations": [{"type": "parametric"}],
        "runtime": {"n_mse": 5, "n_mod": 200, "truth_replications": 1000, "master_seed": 4}}
    res = _results(run_sweep(parse_config(raw)))
    ref = np.array([e.per_coefficient for e in res[("parametric", "true_model")].estimates])
    same = all(np.array_equal(ref, [e.per_coefficient for e in
                                    res[("parametric", f"coefficients={v}")].estimates])
               for v in ("I", "II", "III", "IV"))
    report("AC4 beta invariance", same, "coefficient vectors ones, I-IV bit-identical" if same
           else "estimates differ")


def test_ac05_sigma_scaling(report):
    truth = BUILTIN_TRUTHS["p2n100rho0.2"]
    out = {}
    for sd in (0.3, 3.0):
        ogm = OgmSpec(np.ones(3), ErrorDistSpec.normal(sd))
        tm = estimate_true_mse(truth.dgp(), ogm, 100, 10_000, 5)
        cfg = StudyConfig(truth.dgp(), ogm, ogm, 100, n_mse=5, n_mod=500,
                          assumed_dgp=truth.dgp(), master_seed=5)
        est = [run_study(cfg, k) for k in range(5)]
        out[sd] = (np.array([e.per_coefficient for e in est]),
                   np.array([component_errors(e, tm).relative for e in est]))
    ratio = out[3.0][0] / out[0.3][0]
    ratio_dev = np.abs(ratio - 100).max() / 100
    rel_dev = np.abs(out[3.0][1] - out[0.3][1]).max()
    report("AC5 sigma scaling", ratio_dev < 1e-12 and rel_dev < 1e-12,
           f"max |ratio/100 - 1| = {ratio_dev:.1e}, max relative-error difference {rel_dev:.1e}")


def test_ac06_error_sd_direction(report):
    raw = {"scenarios": [{"truth": "p10n100rho0.2", "deviations": [
        {"kind": "error_sd", "values": [0.1, 0.5]}]}],
        "simulations": [{"type": "parametric"}],
        "runtime": {"n_mse": 30, "n_mod": 500, "truth_replications": 100_000, "master_seed": 6}}
    res = _results(run_sweep(parse_config(raw)))
    low = res[("parametric", "error_sd=0.1")].signed.median
    high = res[("parametric", "error_sd=0.5")].signed.median
    report("AC6 error sd direction", low < 0 < high,
           f"median signed error {low:+.3f} at sd 0.1, {high:+.3f} at sd 0.5")


def test_ac07_correlation_parabola(report):
    raw = {"scenarios": [{"truth": "p2n100rho0.5", "deviations": [
        {"kind": "correlation", "values": [-0.5, 0.2, 0.5, 0.8]}]}],
        "simulations": [{"type": "parametric"}],
        "runtime": {"n_mse": 30, "n_mod": 1000, "truth_replications": 1_000_000,
                    "master_seed": 7}}
    res = _results(run_sweep(parse_config(raw)))
    band = 3 * res[("parametric", "true_model")].aggregate.median

    def slopes(value):
        r = res[("parametric", f"correlation={value:g}")]
        return [r.coefficient_summaries[j].median for j in (1, 2)]

    s02, s08, sm05, s05 = slopes(0.2), slopes(0.8), slopes(-0.5), slopes(0.5)
    ok = (max(s02) < 0 < min(s08)
          and max(abs(v) for v in sm05 + s05) < band)
    report("AC7 correlation parabola", ok,
           f"slope medians rho=0.2 {np.round(s02, 3)}, rho=0.8 {np.round(s08, 3)}, "
           f"rho=-0.5 {np.round(sm05, 3)}, rho=0.5 {np.round(s05, 3)}, band {band:.3f}")


def test_ac08_mean_reparametrization(report):
    raw = {"scenarios": [{"truth": "p2n100rho0.2", "deviations": [
        {"kind": "mean_second_half", "values": [1.0]}]}],
        "simulations": [{"type": "parametric"}],
        "runtime": {"n_mse": 30, "n_mod": 1000, "truth_replications": 1_000_000,
                    "master_seed": 8}}
    res = _results(run_sweep(parse_config(raw)))
    true, shifted = res[("parametric", "true_model")], res[("parametric", "mean_second_half=1")]
    a = np.array([r.relative[1:] for r in true.reports])
    b = np.array([r.relative[1:] for r in shifted.reports])
    slope_dev = np.abs(a - b).max()
    i_true = true.coefficient_summaries[0].median
    i_shift = shifted.coefficient_summaries[0].median
    ok = slope_dev < 1e-9 and i_shift > i_true + 0.5
    report("AC8 mean reparametrization", ok,
           f"max slope relative-error change {slope_dev:.1e}; intercept median "
           f"{i_true:+.3f} -> {i_shift:+.3f}")


def test_ac09_resampler_ordering(report):
    raw = {"scenarios": [{"truth": "p50n100rho0.2", "deviations": []}],
           "simulations": [{"type": "parametric"},
                           {"type": "plasmode", "strategy": "subsampling", "proportion": 0.01},
                           {"type": "plasmode", "strategy": "subsampling", "proportion": 0.632},
                           {"type": "plasmode", "strategy": "nOutOfN"}],
           "runtime": {"n_mse": 30, "n_mod": 500, "truth_replications": 200_000,
                       "master_seed": 3}}
    bundle = run_sweep(parse_config(raw))
    res = {r.variant: r.aggregate for r in bundle.results}
    par = res["parametric"]
    s001 = res["plasmode:subsampling(0.01)"].median
    s632 = res["plasmode:subsampling(0.632)"].median
    boot = res["plasmode:nOutOfN"].median
    iqr = par.q3 - par.q1
    ok = abs(s001 - par.median) < iqr and max(par.median, s001) < s632 < boot \
        and 1.5 <= boot <= 3.5
    se = bundle.truths["p50n100rho0.2"]["true_mse"]
    rel_se = np.max(se.standard_errors / se.per_coefficient)
    report("AC9 resampler ordering", ok,
           f"medians parametric {par.median:.4f} (IQR {iqr:.4f}), subsampling(0.01) {s001:.4f}, "
           f"subsampling(0.632) {s632:.4f}, nOutOfN {boot:.3f}; oracle max rel SE {rel_se:.4f}")


def test_ac10_crossover(report):
    raw = {"scenarios": [{"truth": "p2n100rho0.2", "deviations": [
        {"kind": "mean_second_half", "values": [{"from": 0.05, "to": 1.0, "step": 0.05}]}]}],
        "simulations": [{"type": "parametric"},
                        {"type": "plasmode", "strategy": "mOutOfN", "proportion": 0.1},
                        {"type": "plasmode", "strategy": "smoothed"}],
        "runtime": {"n_mse": 50, "n_mod": 1000, "truth_replications": 1_000_000,
                    "master_seed": 1}}
    bundle = run_sweep(parse_config(raw))
    row = next(c for c in bundle.crossovers
               if c.group == "mean_second_half" and c.side == "above")
    m = row.first_worse["plasmode:mOutOfN(0.1)"]
    s = row.first_worse["plasmode:smoothed"]
    ok = m is not None and s is not None and abs(m - 0.25) <= 0.1 + 1e-9 \
        and abs(s - 0.55) <= 0.1 + 1e-9
    report("AC10 crossover", ok, f"first worse: mOutOfN(0.1) {m} (reference 0.25), "
                                 f"smoothed {s} (reference 0.55), tolerance 2 steps of 0.05")


def test_ac11_determinism(report, tmp_path):
    import json
    raw = {"scenarios": [{"truth": "p2n50rho0.2", "deviations": [
        {"kind": "mean_second_half", "values": [0.5]}, {"kind": "error_sd", "values": [0.5]}]}],
        "simulations": [{"type": "parametric"},
                        {"type": "plasmode", "strategy": "smoothed"},
                        {"type": "plasmode", "strategy": "wild"}, {"type": "plugin"}],
        "runtime": {"n_mse": 6, "n_mod": 100, "truth_replications": 30_000, "master_seed": 11}}
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(raw))
    codes = [main(["run", str(cfg), "--out", str(tmp_path / f"w{w}"), "--workers", str(w)])
             for w in (1, 2, 1)]
    blobs = [(tmp_path / f"w{w}" / "runs.csv").read_bytes() for w in (1, 2)]
    ok = codes == [0, 0, 0] and blobs[0] == blobs[1] and len(blobs[0]) > 0
    report("AC11 determinism", ok, f"runs.csv for 1 and 2 workers identical: {blobs[0] == blobs[1]}"
                                   f" ({len(blobs[0])} bytes)")
