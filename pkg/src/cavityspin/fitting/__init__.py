"""Nonlinear least squares, model selection and estimator wrappers."""

from .core import FitError, FitResult, ModelSpec, least_squares
from .estimators import (ExponentialDecayRegressor, S21Regressor, Sech2BurstRegressor,
                         check_feature, check_target)
from .models import (AICC_THRESHOLD, DEGENERATE_RATIO, aicc, e_fold_time, exponential_model, fit_exponential_family,
                     fit_line, fit_power_law, fit_sech2_burst, fit_sinusoid, sech2_model)

__all__ = [
    "FitError", "FitResult", "ModelSpec", "least_squares", "fit_line", "fit_power_law",
    "fit_sinusoid", "fit_exponential_family", "fit_sech2_burst", "sech2_model",
    "exponential_model", "aicc", "e_fold_time", "AICC_THRESHOLD", "DEGENERATE_RATIO",
    "ExponentialDecayRegressor", "Sech2BurstRegressor", "S21Regressor", "check_feature",
    "check_target",
]
