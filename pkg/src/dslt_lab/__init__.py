"""Derivative self-intersection local time of multidimensional fractional Brownian motion.

Exact path simulation, the regularised first-order estimator, numerical
evaluation of its limiting variance constants and chaos decomposition, and
Monte Carlo checks of the limit theorems.
"""

__version__ = "0.1.0"

from .constants import (
    ChaosIndex,
    Regime,
    RegimeParams,
    bar_sigma_m,
    bar_sigma_ms,
    bar_sigma_squared,
    chaos_coefficient,
    chaos_variance_at_eps,
    chaos_variances_at_eps,
    critical_hurst,
    generalized_binomial,
    hat_sigma_m,
    hat_sigma_ms,
    hat_sigma_squared,
    odd_chaos_combinatorial_sum,
    resolve_regime,
    sigma_squared_closed_form,
    sigma_squared_integral_form,
    sigma_squared_limit,
    total_variance_at_eps,
    zeta_covariance,
)
from .errors import (
    ConfigInvalid,
    DegenerateGeometry,
    DsltLabError,
    EmbeddingFallback,
    GridTooLarge,
    NonFiniteEvaluation,
    NonFinitePath,
    NotConverged,
    OutOfRegime,
    ResolutionViolation,
    TooFewSamples,
)
from .estimator import BACKEND, EstimatorConfig, EstimatorSample, estimate_dslt, path_steps_for
from .experiments import (
    ExperimentPlan,
    StatsReport,
    existence_probe,
    normality_tests,
    normalization_factor,
    run_clt_experiment,
)
from .fbm import FbmConfig, FbmPath, exact_covariance, fgn_autocovariance, sample_path
from .geometry import CovarianceTriple, DomainCase, SimplexPoint, covariance_triple, det_sigma, lower_bound
from .quadrature import QuadratureResult, QuadratureSpec, Transform

__all__ = [name for name in dir() if not name.startswith("_")]
