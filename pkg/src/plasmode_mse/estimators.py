"""scikit-learn style wrappers around the least-squares fit and the MSE studies."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .dgp import normal_dgp
from .engine import StudyConfig, estimate_true_mse, run_repetitions
from .ogm import ErrorDistSpec, OgmSpec, fit_lse
from .resampling import ResamplePlan


class LeastSquaresRegressor(RegressorMixin, BaseEstimator):
    """Ordinary least squares with an intercept, fitted through QR.

    ``rank_deficient_`` reports whether the design with its intercept column
    lost rank; the coefficients are then the minimum-norm solution.
    """

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        design = np.column_stack([np.ones(len(X)), X])
        result = fit_lse(design, y)
        self.intercept_ = float(result.beta_hat[0])
        self.coef_ = result.beta_hat[1:]
        self.rank_deficient_ = result.rank_deficient
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self.intercept_ + X @ self.coef_


class _MseStudyBase(BaseEstimator):
    def _ogm(self, p):
        beta = np.ones(p + 1) if self.beta is None else np.asarray(self.beta, dtype=float)
        if beta.shape != (p + 1,):
            raise ValueError(f"beta must have {p + 1} entries (intercept first)")
        return OgmSpec(beta, ErrorDistSpec.normal(self.error_sd))

    def _finish(self, config):
        estimates = run_repetitions(config, workers=self.workers)
        self.estimates_ = np.array([e.per_coefficient for e in estimates])
        self.mse_ = np.median(self.estimates_, axis=0)
        self.rank_deficient_ = int(sum(e.rank_deficient for e in estimates))
        return self

    def predict(self, X=None):
        """Median estimated MSE over repetitions, one entry per coefficient."""
        check_is_fitted(self, "mse_")
        return self.mse_

    def true_mse(self, replications=100_000):
        """Monte Carlo true MSE of the fitted truth, for comparison with ``mse_``."""
        check_is_fitted(self, "truth_dgp_")
        return estimate_true_mse(self.truth_dgp_, self.truth_ogm_, self.n_obs_, replications,
                                 self.random_state).per_coefficient


class PlasmodeMSE(_MseStudyBase):
    """Plasmode estimate of the component-wise LSE MSE from a feature sample.

    ``fit(X)`` treats the rows of ``X`` as draws from the true feature
    distribution: a normal distribution with the sample mean and covariance
    is used as the truth, from which every repetition draws its source data
    and resamples it according to ``strategy`` and ``proportion``.
    """

    def __init__(self, strategy="subsampling", proportion=0.632, n_mse=10, n_mod=200,
                 beta=None, error_sd=0.3, random_state=0, workers=1):
        self.strategy = strategy
        self.proportion = proportion
        self.n_mse = n_mse
        self.n_mod = n_mod
        self.beta = beta
        self.error_sd = error_sd
        self.random_state = random_state
        self.workers = workers

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=3)
        n, p = X.shape
        self.n_features_in_ = p
        self.n_obs_ = n
        self.truth_dgp_ = _sample_dgp(X)
        self.truth_ogm_ = self._ogm(p)
        config = StudyConfig(self.truth_dgp_, self.truth_ogm_, self.truth_ogm_, n,
                             n_mse=self.n_mse, n_mod=self.n_mod, mode="plasmode",
                             plan=ResamplePlan(self.strategy, n, self.proportion),
                             master_seed=self.random_state)
        return self._finish(config)


class ParametricMSE(_MseStudyBase):
    """Parametric estimate of the component-wise LSE MSE.

    The assumed feature distribution is normal with the sample moments of
    ``X`` (a plug-in parametric study), or ``assumed_mean``/``assumed_cov``
    when given.
    """

    def __init__(self, assumed_mean=None, assumed_cov=None, n_mse=10, n_mod=200, beta=None,
                 error_sd=0.3, random_state=0, workers=1):
        self.assumed_mean = assumed_mean
        self.assumed_cov = assumed_cov
        self.n_mse = n_mse
        self.n_mod = n_mod
        self.beta = beta
        self.error_sd = error_sd
        self.random_state = random_state
        self.workers = workers

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=3)
        n, p = X.shape
        self.n_features_in_ = p
        self.n_obs_ = n
        self.truth_dgp_ = _sample_dgp(X)
        self.truth_ogm_ = self._ogm(p)
        if self.assumed_cov is None and self.assumed_mean is None:
            assumed = self.truth_dgp_
        else:
            mean = np.zeros(p) if self.assumed_mean is None else self.assumed_mean
            cov = np.cov(X, rowvar=False).reshape(p, p) if self.assumed_cov is None \
                else self.assumed_cov
            assumed = normal_dgp(mean, cov)
        config = StudyConfig(self.truth_dgp_, self.truth_ogm_, self.truth_ogm_, n,
                             n_mse=self.n_mse, n_mod=self.n_mod, mode="parametric",
                             assumed_dgp=assumed, master_seed=self.random_state)
        return self._finish(config)


def _sample_dgp(X):
    p = X.shape[1]
    return normal_dgp(X.mean(axis=0), np.cov(X, rowvar=False).reshape(p, p))
