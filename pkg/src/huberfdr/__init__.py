"""Asymmetric Huber distribution fits for two-groups local false discovery rates."""

from .data import ZData
from .distribution import (
    DistributionError,
    HuberParams,
    NoAlternativeError,
    alt_density,
    cdf,
    density,
    fdr_local,
    isf,
    log_density,
    nonnull_proportion,
    null_proportion,
    quantile,
    sample,
    sf,
)
from .estimator import HuberFDR, HuberLinearRegression
from .mcmc import (
    PosteriorChain,
    PriorSpec,
    chain_diagnostics,
    default_prior,
    posterior_summary,
    run_chain,
)
from .mle import (
    BoundaryError,
    ConvergenceError,
    FitError,
    FitResult,
    IntervalSet,
    LrtResult,
    delta_method_intervals,
    fit_mle,
    fit_mle_symmetric,
    lrt_common_k,
    neg_log_lik,
    observed_information,
    parametric_bootstrap,
)
from .policy import DEFAULT_POLICY, K_MAX, NumericPolicy
from .regression import RegressionData, RegressionFit, fit_huber_lm, regression_fdr
from .report import (
    CallTable,
    PlotSeries,
    call_nonnull,
    density_curve,
    f1_curve,
    fdr_curve,
    histogram_series,
    qq_points,
)

__version__ = "0.1.0"
