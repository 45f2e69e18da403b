"""Reference methods, error metrics and the method comparison report."""

from evalkit.base_estimator import BaseEstimator, EvalContext
from evalkit.baselines import (
    NoHistoryError,
    NoNeighborsError,
    haversine_km,
    idw_weights,
    mean_method,
    sitp,
)
from evalkit.estimators import MeanEstimator, NetworkEstimator, SitpEstimator
from evalkit.factory import EstimatorFactory, EstimatorRegistration
from evalkit.metrics import DepthRangeError, depth_mask, mae_by_depth, rmse, rmse_rows
from evalkit.report import (
    ALL_METHODS,
    EvalReport,
    EvaluationHandler,
    attention_summary,
    compare_methods,
    depth_slice_report,
    field_grids,
    field_slice,
    improvement_table,
    input_digest,
    profile_comparison,
    write_report,
)

__all__ = [
    "ALL_METHODS",
    "BaseEstimator",
    "DepthRangeError",
    "EstimatorFactory",
    "EstimatorRegistration",
    "EvalContext",
    "EvalReport",
    "EvaluationHandler",
    "MeanEstimator",
    "NetworkEstimator",
    "NoHistoryError",
    "NoNeighborsError",
    "SitpEstimator",
    "attention_summary",
    "compare_methods",
    "depth_mask",
    "depth_slice_report",
    "field_grids",
    "field_slice",
    "haversine_km",
    "idw_weights",
    "improvement_table",
    "input_digest",
    "mae_by_depth",
    "mean_method",
    "profile_comparison",
    "rmse",
    "rmse_rows",
    "sitp",
    "write_report",
]
