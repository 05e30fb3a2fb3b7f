"""Two-way transformed factor models for matrix-variate time series."""

from .core import (
    DenoiserBasis,
    FactorFit,
    LoadingSet,
    MatrixSeries,
    OrderTrace,
    TraceStep,
    center,
    transpose_series,
    unvectorize,
    vectorize,
)
from .covariance import build_M, build_M_back, build_S, build_S_back, lagged_cross_cov, omega_hat
from .errors import (
    AlignmentError,
    DegenerateCovarianceError,
    EstimationError,
    InvalidArgumentError,
    NoSignalError,
    RankCorrelationError,
)
from .estimator import (
    FitConfig,
    denoiser,
    estimate_loadings,
    fit,
    project_common,
    recover_factors,
    select_k,
    select_orders,
    wlc_fit,
    wlc_orders,
)
from .forecast import ARFit, fit_ar1, forecast_h, rolling_eval
from .metrics import factor_error, forecast_errors, subspace_dist, subspace_dist_general
from .order_select import diagonal_path_select, transform_W, truncate_for_test
from .simulate import GroundTruth, SimConfig, gen_model, gen_series, monte_carlo
from .spectral import EigenDecomp, bottom_eigenvectors, sym_eigen, top_eigenvectors
from .whitenoise import WNResult, ljung_box, rank_tm

__version__ = "0.1.0"
