"""scikit-learn style wrappers around the spectral-radius, rate-fit and
proper-power tools, so they compose with pipelines and ``get_params``."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .experiments import fit_rate
from .groups import parse_group
from .powers import is_proper_power
from .walk import (
    StepMeasure,
    parse_measure,
    rho_closed_form,
    rho_from_returns,
    rho_rayleigh_ball,
)


class SpectralRadiusEstimator(BaseEstimator):
    """Estimate rho for a step measure.

    ``fit`` takes a :class:`StepMeasure` (or a measure string when ``group``
    is set).  ``method`` is ``rayleigh``, ``returns`` or ``closed-form``.
    """

    def __init__(self, method="rayleigh", radius=8, n_max=40, group=None):
        self.method = method
        self.radius = radius
        self.n_max = n_max
        self.group = group

    def fit(self, X, y=None):
        mu = X
        if not isinstance(mu, StepMeasure):
            if self.group is None:
                raise ValueError("pass a StepMeasure or set group to parse a measure string")
            mu = parse_measure(str(X), parse_group(self.group))
        if self.method == "rayleigh":
            est = rho_rayleigh_ball(mu, self.radius)
        elif self.method == "returns":
            est = rho_from_returns(mu, self.n_max)
        elif self.method == "closed-form":
            est = rho_closed_form(mu)
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.estimate_ = est
        self.rho_ = est.value
        return self

    def transform(self, X=None):
        check_is_fitted(self, "rho_")
        return np.array([[self.rho_]])


class DecayRateRegressor(RegressorMixin, BaseEstimator):
    """Fit ``q_n ~ exp(b) n^c rho^n``; X holds n in its single column."""

    def __init__(self, degree=1, window_min=5):
        self.degree = degree
        self.window_min = window_min

    def fit(self, X, y):
        X = check_array(X)
        y = np.asarray(y, dtype=float)
        ns = X[:, 0]
        fit = fit_rate((ns, y), (self.window_min, None), self.degree)
        self.fit_ = fit
        self.rho_hat_ = fit.rho_hat
        self.c_hat_ = fit.c_hat
        self.intercept_ = fit.intercept
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        ns = check_array(X)[:, 0]
        with np.errstate(divide="ignore"):
            logn = np.where(ns > 0, np.log(np.maximum(ns, 1e-300)), 0.0)
        return np.exp(ns * np.log(self.rho_hat_) + self.c_hat_ * logn + self.intercept_)


class ProperPowerClassifier(ClassifierMixin, BaseEstimator):
    """Label words 1 when they spell a proper power (identity included)."""

    def __init__(self, group="free:2", radius=3):
        self.group = group
        self.radius = radius

    def fit(self, X=None, y=None):
        self.model_ = parse_group(self.group, self.radius)
        self.classes_ = np.array([0, 1])
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        words = np.asarray(X, dtype=object).ravel()
        return np.array([int(is_proper_power(self.model_.element(str(w))) is not None)
                         for w in words])
