"""scikit-learn style wrappers around the trace and spectrum fitters.

The estimators take a single feature (time or probe frequency) and keep the
full :class:`FitResult` in ``result_``.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from .models import exponential_model, fit_exponential_family, fit_sech2_burst, sech2_model

__all__ = [
    "ExponentialDecayRegressor",
    "Sech2BurstRegressor",
    "S21Regressor",
    "check_feature",
    "check_target",
]


def check_feature(X):
    """Validate a single-feature input, returned as a 1-D float array."""
    X = check_array(X, ensure_2d=False, dtype=np.float64, input_name="X")
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature column, got {X.shape[1]}")
        X = X[:, 0]
    return X


def check_target(y, X, complex_ok=False):
    """Validate targets aligned with ``X``."""
    if complex_ok and np.iscomplexobj(y):
        y = np.asarray(y, dtype=np.complex128).reshape(-1)
        if not np.all(np.isfinite(y)):
            raise ValueError("targets contain non-finite values")
    else:
        y = check_array(y, ensure_2d=False, dtype=np.float64, input_name="y").reshape(-1)
    check_consistent_length(X, y)
    return y


class ExponentialDecayRegressor(RegressorMixin, BaseEstimator):
    """Single or double exponential decay chosen by corrected AIC.

    Parameters
    ----------
    allow_double : bool
    multistart : bool
        Extra start points for the double-exponential fit.

    Attributes
    ----------
    result_ : FitResult
    t2_star_ : float
        1/e time of the selected model.
    selected_ : str
        ``'single'`` or ``'double'``.
    """

    def __init__(self, allow_double=True, multistart=False):
        self.allow_double = allow_double
        self.multistart = multistart

    def fit(self, X, y):
        t = check_feature(X)
        y = check_target(y, t)
        self.result_ = fit_exponential_family((t, y), allow_double=self.allow_double,
                                              multistart=self.multistart)
        self.t2_star_ = self.result_.info["t2_star"]
        self.selected_ = self.result_.info["selected"]
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        return exponential_model(check_feature(X), self.result_.params)


class Sech2BurstRegressor(RegressorMixin, BaseEstimator):
    """Superradiant burst ``A sech^2(pi gamma_c (t - t_d) / 2)``.

    Attributes
    ----------
    result_ : FitResult
    gamma_c_, t_d_, amplitude_ : float
    """

    def __init__(self, n0=None):
        self.n0 = n0

    def fit(self, X, y):
        t = check_feature(X)
        y = check_target(y, t)
        self.result_ = fit_sech2_burst((t, y), n0=self.n0)
        self.gamma_c_ = self.result_["gamma_c"]
        self.t_d_ = self.result_["t_d"]
        self.amplitude_ = self.result_["amplitude"]
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        return sech2_model(check_feature(X), self.gamma_c_, self.t_d_, self.amplitude_)


class S21Regressor(RegressorMixin, BaseEstimator):
    """Transmission fit with fixed cavity parameters.

    Parameters
    ----------
    kappa, delta, omega_c : float
        Fixed cavity linewidth, detuning and cavity frequency (Hz).
    kappa_out : float, optional
    data : {'auto', 'complex', 'power'}

    Attributes
    ----------
    result_ : FitResult
    g_coll_, gamma_inh_ : float
    """

    def __init__(self, kappa=1.0, delta=0.0, omega_c=0.0, kappa_out=None, data="auto"):
        self.kappa = kappa
        self.delta = delta
        self.omega_c = omega_c
        self.kappa_out = kappa_out
        self.data = data

    def fit(self, X, y):
        from ..experiments.spectroscopy import fit_s21

        f = check_feature(X)
        y = check_target(y, f, complex_ok=True)
        self.result_ = fit_s21(f, y, self.kappa, self.delta, self.omega_c,
                               kappa_out=self.kappa_out, data=self.data)
        self.g_coll_ = self.result_["g_coll"]
        self.gamma_inh_ = self.result_["gamma_inh"]
        return self

    def predict(self, X):
        from ..experiments.spectroscopy import _s21

        check_is_fitted(self, "result_")
        f = check_feature(X)
        r = self.result_
        k_out = r.info["kappa_out"]
        s = _s21(f, r.info["g_coll_sq"], self.gamma_inh_, self.kappa, k_out, self.omega_c,
                 self.omega_c - self.delta)
        if r.info["data"] == "power":
            return r["amplitude"] * np.abs(s) ** 2 + r["baseline"]
        amp = r["amplitude_re"] + 1j * r["amplitude_im"]
        return amp * s + (r["baseline_re"] + 1j * r["baseline_im"])

    def score(self, X, y, sample_weight=None):
        """Coefficient of determination using complex magnitudes of the residual."""
        y = np.asarray(y).reshape(-1)
        resid = np.sum(np.abs(self.predict(X) - y) ** 2)
        total = np.sum(np.abs(y - y.mean()) ** 2)
        return 1.0 - resid / total if total > 0 else 0.0
