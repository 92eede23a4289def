"""scikit-learn compatible front end for the named estimation methods."""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import Dataset, ParameterError, center_columns
from .methods import MethodSettings, get_method, run_method
from .solver import SolverConfig


class PenalizedRegression(RegressorMixin, BaseEstimator):
    """Linear regression with a jointly estimated scale for the loss (Huber
    methods) and for the penalty (BerHu methods).

    Parameters
    ----------
    method : str
        One of ``OLS``, ``Huber``, ``ad-lasso``, ``ridge``, ``ad-en``,
        ``ad-Berhu`` and their ``Huber-`` prefixed variants.
    lam, lam2 : float or None
        Fixed regularization constants. With ``lam=None`` the method's own
        tuning rule picks them (BIC for the adaptive lasso and BerHu,
        cross-validation for ridge and the elastic net).
    huber_m, berhu_l, gamma : float
        Huber threshold, BerHu threshold and exponent of the adaptive weights.
    grid_max, grid_points : optional
        Override the upper end and size of the lambda grid.
    folds : int
        Cross-validation folds.
    random_state : int or None
        Seeds the fold assignment.
    max_sweeps, kkt_tol : solver limits.

    Attributes
    ----------
    coef_, intercept_ : fitted coefficients on the original predictor scale.
    scale_ : Huber scale s (None for least squares).
    tau_ : penalty scale (None unless BerHu).
    lambda_, lambda2_ : regularization constants used.
    weights_ : adaptive weights (None for non-adaptive methods).
    converged_ : whether the solver met its KKT tolerance.
    """

    def __init__(self, method: str = "ad-Berhu", lam: Optional[float] = None,
                 lam2: Optional[float] = None, huber_m: float = 1.345, berhu_l: float = 1.345,
                 gamma: float = 1.0, grid_max: Optional[float] = None,
                 grid_points: Optional[int] = None, folds: int = 5,
                 random_state: Optional[int] = None, max_sweeps: int = 10_000,
                 kkt_tol: float = 1e-6):
        self.method = method
        self.lam = lam
        self.lam2 = lam2
        self.huber_m = huber_m
        self.berhu_l = berhu_l
        self.gamma = gamma
        self.grid_max = grid_max
        self.grid_points = grid_points
        self.folds = folds
        self.random_state = random_state
        self.max_sweeps = max_sweeps
        self.kkt_tol = kkt_tol

    def _settings(self) -> MethodSettings:
        return MethodSettings(
            huber_m=self.huber_m, berhu_l=self.berhu_l, gamma=self.gamma,
            grid_max=self.grid_max, grid_points=self.grid_points, folds=self.folds,
            solver=SolverConfig(max_sweeps=self.max_sweeps, kkt_tol=self.kkt_tol),
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        get_method(self.method)
        if self.lam is not None and self.lam < 0:
            raise ParameterError("lam must be >= 0")
        xc, means = center_columns(X)
        data = Dataset(xc, y)
        rng = np.random.default_rng(self.random_state)
        out = run_method(self.method, data, self._settings(), rng, lam=self.lam, lam2=self.lam2)
        res = out.fit
        self.coef_ = np.asarray(res.beta, dtype=float).copy()
        self.intercept_ = float(res.alpha - means @ self.coef_)
        self.scale_ = res.s
        self.tau_ = res.tau
        self.lambda_ = out.lam
        self.lambda2_ = out.lam2
        self.weights_ = out.weights
        self.converged_ = bool(res.converged)
        self.n_iter_ = int(res.sweeps)
        self.objective_ = float(res.objective)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self.intercept_ + X @ self.coef_
