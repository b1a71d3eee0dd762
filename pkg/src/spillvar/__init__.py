"""Tail-risk spillover toolkit.

Builds multi-asset daily return panels, selects influential assets per
target by recursive partial correlation, jointly estimates VaR/ES for
quantile recursions with and without spillover components, backtests the
fitted paths, produces rolling one-step-ahead forecasts, and compares
models with a bootstrap confidence-set procedure.
"""

__version__ = "0.1.0"

from .backtest import (
    BacktestReport,
    backtest_path,
    christoffersen_cc,
    dq_test,
    hit_sequence,
    kupiec_uc,
    violation_rate,
)
from .data import OhlcSeries, ReturnPanel, garman_klass, load_ohlc, load_panel, prices_to_returns
from .errors import (
    DomainError,
    EmptyPanelError,
    EstimationError,
    PanelFormatError,
    SingularDesignError,
    SpillvarError,
    ValidationError,
)
from .estimation import (
    FitResult,
    OptimizerConfig,
    UniverseFit,
    al_fz_loss,
    estimate,
    fit_universe,
    fz0_loss,
)
from .forecast import ForecastRecord, RollingConfig, rolling_forecast
from .mcs import McsResult, mcs_range
from .models import (
    ModelSpec,
    QuantilePath,
    build_proxy,
    es_from_var,
    filter_path,
    forecast_step,
    param_names,
    params_feasible,
    spillover_share,
)
from .quantilogram import cross_quantilogram, quantilogram_matrix
from .selection import (
    SelectionTrace,
    SpilloverWeights,
    lagged_correlation,
    ols_step,
    pca_weights,
    select_influential,
)

__all__ = [
    "__version__",
    "BacktestReport", "backtest_path", "christoffersen_cc", "dq_test",
    "hit_sequence", "kupiec_uc", "violation_rate",
    "OhlcSeries", "ReturnPanel", "garman_klass", "load_ohlc", "load_panel",
    "prices_to_returns",
    "DomainError", "EmptyPanelError", "EstimationError", "PanelFormatError",
    "SingularDesignError", "SpillvarError", "ValidationError",
    "FitResult", "OptimizerConfig", "UniverseFit", "al_fz_loss", "estimate",
    "fit_universe", "fz0_loss",
    "ForecastRecord", "RollingConfig", "rolling_forecast",
    "McsResult", "mcs_range",
    "ModelSpec", "QuantilePath", "build_proxy", "es_from_var", "filter_path",
    "forecast_step", "param_names", "params_feasible", "spillover_share",
    "cross_quantilogram", "quantilogram_matrix",
    "SelectionTrace", "SpilloverWeights", "lagged_correlation", "ols_step",
    "pca_weights", "select_influential",
]
