"""Linear-Gaussian state-space toolkit.

Filtering (covariance and information forms), smoothing (RTS and the
backward information filter with two-filter fusion), parameter
estimation (EM and CMA-ES), and a daily-bar trading backtest harness
built on the filter's one-step-ahead measurement predictions.
"""

from ._kernels import BACKEND
from .backtest import (
    BacktestReport,
    Bar,
    DataError,
    InstrumentSpec,
    MaParams,
    ParseError,
    SplitError,
    StrategyParams,
    Trade,
    calibrate,
    compute_stats,
    kf_trend_signals,
    load_bars,
    ma_crossover_signals,
    report_as_dict,
    run_backtest,
    split_train_test,
)
from .estimation import (
    CmaesConstants,
    CmaesState,
    CovarianceRepairWarning,
    EmState,
    InvalidPopulation,
    Objective,
    UnsupportedModel,
    cmaes_minimize,
    default_constants,
    em_fit,
    restart_schedule,
)
from .gaussian_core import (
    CanonicalGaussian,
    Gaussian,
    PartitionedGaussian,
    SingularMatrix,
    condition,
    from_canonical,
    to_canonical,
)
from .info_filter import (
    InfoStep,
    SingularMeasurementNoise,
    SingularProcessNoise,
    info_filter,
    info_predict,
    info_update,
)
from .kalman import (
    FilterResult,
    FilterStep,
    SingularInnovation,
    gain_forms,
    kalman_filter,
    predict,
    update,
)
from .lgssm import (
    GainFeedbackOffset,
    InvalidModel,
    LgssmSpec,
    ModelAssemblyWarning,
    ModelParams,
    ParamArity,
    build_model,
    simulate,
    unconditional_cov_seq,
)
from .smoother import (
    BackwardInfoStep,
    DegenerateTransitionWarning,
    FusionFailure,
    InverseDynamics,
    SingularTransition,
    SmoothStep,
    fuse_posterior,
    inverse_dynamics,
    mbf_smooth,
    rts_smooth,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BacktestReport",
    "BackwardInfoStep",
    "Bar",
    "CanonicalGaussian",
    "CmaesConstants",
    "CmaesState",
    "CovarianceRepairWarning",
    "DataError",
    "DegenerateTransitionWarning",
    "EmState",
    "FilterResult",
    "FilterStep",
    "FusionFailure",
    "GainFeedbackOffset",
    "Gaussian",
    "InfoStep",
    "InstrumentSpec",
    "InvalidModel",
    "InvalidPopulation",
    "InverseDynamics",
    "LgssmSpec",
    "MaParams",
    "ModelAssemblyWarning",
    "ModelParams",
    "Objective",
    "ParamArity",
    "ParseError",
    "PartitionedGaussian",
    "SingularInnovation",
    "SingularMatrix",
    "SingularMeasurementNoise",
    "SingularProcessNoise",
    "SingularTransition",
    "SmoothStep",
    "SplitError",
    "StrategyParams",
    "Trade",
    "UnsupportedModel",
    "build_model",
    "calibrate",
    "cmaes_minimize",
    "compute_stats",
    "condition",
    "default_constants",
    "em_fit",
    "fuse_posterior",
    "from_canonical",
    "gain_forms",
    "info_filter",
    "info_predict",
    "info_update",
    "inverse_dynamics",
    "kalman_filter",
    "kf_trend_signals",
    "load_bars",
    "ma_crossover_signals",
    "mbf_smooth",
    "predict",
    "report_as_dict",
    "restart_schedule",
    "rts_smooth",
    "run_backtest",
    "simulate",
    "split_train_test",
    "to_canonical",
    "unconditional_cov_seq",
    "update",
]
