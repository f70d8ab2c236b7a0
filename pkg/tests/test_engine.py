import numpy as np
import pytest

from plasmode_mse.dgp import CorrelationSpec, MarginalSpec, normal_dgp, resolve_underlying_covariance
from plasmode_mse.engine import (
    StudyConfig,
    analytic_slope_mse,
    estimate_plugin_dgp,
    estimate_true_mse,
    run_repetitions,
    run_study,
)
from plasmode_mse.ogm import ErrorDistSpec, OgmSpec
from plasmode_mse.resampling import ResamplePlan


def _ogm(beta, sd=0.3):
    return OgmSpec(np.asarray(beta, dtype=float), ErrorDistSpec.normal(sd))


def test_analytic_examples():
    assert analytic_slope_mse(np.eye(2), 0.09, 100, 2) == pytest.approx([9.2784e-4] * 2, rel=1e-4)
    cov = np.array([[1.0, 0.5], [0.5, 1.0]])
    assert analytic_slope_mse(cov, 0.09, 100, 2) == pytest.approx([1.2371e-3] * 2, rel=1e-4)
    assert np.all(analytic_slope_mse(np.eye(3), 0.0, 20, 3) == 0)
    with pytest.raises(ValueError):
        analytic_slope_mse(np.eye(2), 0.09, 3, 2)


def test_zero_noise_truth_is_zero():
    tm = estimate_true_mse(normal_dgp(np.zeros(2), np.eye(2)), _ogm([1, 1, 1], 0.0), 30, 1000, 0)
    assert np.all(tm.per_coefficient == 0)


def test_oracle_requires_enough_replications():
    with pytest.raises(ValueError):
        estimate_true_mse(normal_dgp(np.zeros(2), np.eye(2)), _ogm([1, 1, 1]), 30, 999, 0)


def test_oracle_with_intercept_matches_closed_form():
    # Slopes: centred Wishart with n-1 df; intercept: sigma^2/n * (1 + p/(n-p-2)).
    n, p, s2 = 30, 2, 0.09
    tm = estimate_true_mse(normal_dgp(np.zeros(p), np.eye(p)), _ogm(np.ones(p + 1)), n,
                           40_000, 11)
    expected = np.r_[s2 / n * (1 + p / (n - p - 2)), [s2 / (n - p - 2)] * p]
    z = (tm.per_coefficient - expected) / tm.standard_errors
    assert np.all(np.abs(z) < 4), z
    assert tm.replications == 40_000


def test_oracle_without_intercept_matches_analytic_correlated():
    cov = np.array([[1.0, 0.5], [0.5, 1.0]])
    tm = estimate_true_mse(normal_dgp(np.zeros(2), cov), OgmSpec(np.ones(2)), 40, 40_000, 2,
                           intercept=False)
    z = (tm.per_coefficient - analytic_slope_mse(cov, 0.09, 40, 2)) / tm.standard_errors
    assert np.all(np.abs(z) < 4), z


def test_oracle_sigma_doubling_quadruples():
    dgp = normal_dgp(np.zeros(2), np.eye(2))
    a = estimate_true_mse(dgp, _ogm([1, 1, 1], 0.3), 30, 2000, 4)
    b = estimate_true_mse(dgp, _ogm([1, 1, 1], 0.6), 30, 2000, 4)
    assert np.allclose(b.per_coefficient, 4 * a.per_coefficient, rtol=1e-10)


def test_oracle_independent_of_workers():
    dgp = normal_dgp(np.zeros(2), np.eye(2))
    a = estimate_true_mse(dgp, _ogm([1, 1, 1]), 30, 25_000, 4, workers=1)
    b = estimate_true_mse(dgp, _ogm([1, 1, 1]), 30, 25_000, 4, workers=2)
    assert np.array_equal(a.per_coefficient, b.per_coefficient)


def _config(**kw):
    dgp = normal_dgp(np.zeros(3), np.eye(3))
    base = dict(truth_dgp=dgp, truth_ogm=_ogm(np.ones(4)), assumed_ogm=_ogm(np.ones(4)), n=40,
                n_mse=3, n_mod=50, mode="parametric", assumed_dgp=dgp, master_seed=9)
    base.update(kw)
    return StudyConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        _config(n=3)
    with pytest.raises(ValueError):
        _config(mode="plasmode")
    with pytest.raises(ValueError):
        _config(assumed_ogm=_ogm([1, 1]))
    with pytest.raises(ValueError):
        _config(mode="bayes")


def test_beta_invariance_is_exact():
    ref = run_study(_config(), 0).per_coefficient
    for beta in (np.zeros(4), np.full(4, 10.0), np.array([0.0, 1 / 3, 2 / 3, 1.0])):
        out = run_study(_config(assumed_ogm=_ogm(beta)), 0).per_coefficient
        assert np.array_equal(out, ref)


def test_sigma_scaling():
    small = run_study(_config(assumed_ogm=_ogm(np.ones(4), 0.3)), 1).per_coefficient
    large = run_study(_config(assumed_ogm=_ogm(np.ones(4), 3.0)), 1).per_coefficient
    assert np.allclose(large / small, 100.0, rtol=1e-12)


def test_repetitions_deterministic_and_worker_independent():
    cfg = _config()
    a = run_repetitions(cfg, workers=1)
    b = run_repetitions(cfg, workers=2)
    assert all(np.array_equal(x.per_coefficient, y.per_coefficient) for x, y in zip(a, b))
    assert not np.array_equal(a[0].per_coefficient, a[1].per_coefficient)


def test_counts_add_up():
    est = run_study(_config(), 0)
    assert est.successful + est.rank_deficient == 50
    assert np.all(est.per_coefficient >= 0)


def test_rank_deficient_draws_are_skipped():
    dgp = resolve_underlying_covariance([MarginalSpec.bernoulli(0.1)], CorrelationSpec.fixed(0.0))
    cfg = StudyConfig(dgp, _ogm([1, 1]), _ogm([1, 1]), n=4, n_mse=1, n_mod=200,
                      assumed_dgp=dgp, master_seed=0)
    est = run_study(cfg, 0)
    assert est.rank_deficient > 0
    assert est.successful + est.rank_deficient == 200


def test_plasmode_none_uses_one_design():
    cfg = _config(mode="plasmode", assumed_dgp=None, plan=ResamplePlan("none", 40))
    est = run_study(cfg, 0)
    assert est.successful == 50
    # one shared design: the MSE equals sigma^2 diag((X'X)^-1) up to noise


def test_plugin_study_runs_and_plugin_is_consistent():
    cov = np.array([[1.0, 0.3], [0.3, 2.0]])
    truth = normal_dgp(np.array([1.0, -1.0]), cov)
    est = estimate_plugin_dgp(truth, 1_000_000, np.random.default_rng(0))
    assert np.abs(est.underlying_covariance - cov).max() < 0.01
    assert np.abs(est.underlying_mean - [1.0, -1.0]).max() < 0.01
    with pytest.raises(ValueError):
        estimate_plugin_dgp(truth, 3, np.random.default_rng(0))
    cfg = _config(mode="plugin", assumed_dgp=None, plugin_sample_size=200)
    assert run_study(cfg, 0).successful == 50


def test_parametric_truth_close_to_oracle():
    cfg = _config(n_mse=5, n_mod=400)
    truth = estimate_true_mse(cfg.truth_dgp, cfg.truth_ogm, 40, 20_000, 1)
    med = np.median([e.per_coefficient for e in run_repetitions(cfg)], axis=0)
    assert np.all(np.abs(med / truth.per_coefficient - 1) < 0.2)
