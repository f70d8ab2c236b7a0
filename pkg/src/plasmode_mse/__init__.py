"""Monte Carlo comparison of parametric and Plasmode simulation studies.

The package estimates the component-wise MSE of the least-squares estimator
by simulation, under assumed data-generating processes that deviate from a
known truth, and measures how far each estimate is from the true MSE.
"""

__version__ = "0.1.0"

from .dgp import (
    CorrelationSpec,
    DgpSpec,
    InfeasibleCorrelationError,
    MarginalSpec,
    UnsupportedPairError,
    build_correlation_matrix,
    bvn_cdf,
    resolve_underlying_covariance,
    sample_design,
    solve_bernoulli_normal,
    solve_bernoulli_pair,
    solve_lognormal_normal,
    solve_lognormal_pair,
    solve_mixture_links,
)
from .engine import (
    MseEstimate,
    StudyConfig,
    TrueMse,
    analytic_slope_mse,
    estimate_plugin_dgp,
    estimate_true_mse,
    run_parametric_study,
    run_plasmode_study,
)
from .estimators import LeastSquaresRegressor, ParametricMSE, PlasmodeMSE
from .io import DatasetSummary, emit_results, ingest_dataset
from .metrics import ErrorReport, RepetitionSummary, component_errors, crossover, summarize_repetitions
from .ogm import ErrorDistSpec, LseFit, OgmSpec, fit_lse, generate_outcome, sample_errors
from .resampling import ResamplePlan, resample, silverman_bandwidth
from .rng import derive_stream
from .scenarios import BUILTIN_TRUTHS, Deviation, Truth
from .sweep import load_config, parse_config, run_sweep
