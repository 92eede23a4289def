import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from berhu.estimators import PenalizedRegression


def _xy(rng, n=60):
    x = rng.standard_normal((n, 3)) + 5.0  # uncentered on purpose
    y = 2.0 + x @ np.array([1.5, 0.0, -1.0]) + 0.2 * rng.standard_normal(n)
    return x, y


def test_params_roundtrip():
    est = PenalizedRegression(method="Huber-ad-Berhu", lam=2.0, huber_m=1.0)
    params = est.get_params()
    assert params["method"] == "Huber-ad-Berhu" and params["lam"] == 2.0
    twin = clone(est)
    assert twin.get_params() == params


def test_ols_matches_lstsq(rng):
    x, y = _xy(rng)
    est = PenalizedRegression(method="OLS").fit(x, y)
    design = np.column_stack([np.ones(len(y)), x])
    ref = np.linalg.lstsq(design, y, rcond=None)[0]
    assert est.intercept_ == pytest.approx(ref[0], rel=1e-8)
    np.testing.assert_allclose(est.coef_, ref[1:], rtol=1e-8)
    np.testing.assert_allclose(est.predict(x), design @ ref, rtol=1e-8)
    assert est.tau_ is None and est.weights_ is None


def test_tuned_berhu(rng):
    x, y = _xy(rng)
    est = PenalizedRegression(grid_points=10, random_state=0).fit(x, y)
    assert est.converged_
    assert est.lambda_ is not None and est.tau_ is not None
    assert est.score(x, y) > 0.9


def test_not_fitted_and_shape_errors(rng):
    x, y = _xy(rng)
    with pytest.raises(NotFittedError):
        PenalizedRegression().predict(x)
    est = PenalizedRegression(method="OLS").fit(x, y)
    with pytest.raises(ValueError):
        est.predict(x[:, :2])


def test_bad_method(rng):
    x, y = _xy(rng)
    with pytest.raises(Exception, match="method"):
        PenalizedRegression(method="lasso-ish").fit(x, y)
