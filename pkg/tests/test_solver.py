import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.linear_model import HuberRegressor, Lasso

from berhu.checks import tiny_instance
from berhu.core import (
    AdaptiveBerHu,
    AdaptiveElasticNet,
    AdaptiveLasso,
    Dataset,
    Huber,
    InconsistentFitError,
    LeastSquares,
    ModelSpec,
    NoPenalty,
    ParameterError,
    Ridge,
    center_columns,
)
from berhu.oracles import brute_force_minimum
from berhu.solver import SolverConfig, fit, fit_path, fit_unpenalized, kkt_check, objective

TIGHT = SolverConfig(kkt_tol=1e-11, objective_tol=1e-15, max_sweeps=100_000)


def make_data(rng, n=60, p=5, noise=1.0, outliers=0):
    x = center_columns(rng.standard_normal((n, p)))[0]
    beta = np.zeros(p)
    beta[: min(3, p)] = [3.0, -2.0, 1.5][: min(3, p)]
    y = 1.0 + x @ beta + noise * rng.standard_normal(n)
    y[:outliers] += 30.0
    return Dataset(x, y)


def test_ols_matches_normal_equations(rng):
    data = make_data(rng)
    res = fit(data, ModelSpec(LeastSquares(), NoPenalty()), TIGHT)
    A = np.column_stack([np.ones(data.n), data.x])
    theta = np.linalg.solve(A.T @ A, A.T @ data.y)
    assert res.converged
    assert res.alpha == pytest.approx(theta[0], abs=1e-8)
    np.testing.assert_allclose(res.beta, theta[1:], atol=1e-8)


def test_lasso_matches_sklearn(rng):
    data = make_data(rng, n=80, p=6)
    lam = 20.0
    res = fit(data, ModelSpec(LeastSquares(), AdaptiveLasso(lam, np.ones(6))), TIGHT)
    # sklearn minimizes ||r||^2 / (2n) + a ||b||_1
    sk = Lasso(alpha=lam / (2 * data.n), tol=1e-14, max_iter=1_000_000).fit(data.x, data.y)
    np.testing.assert_allclose(res.beta, sk.coef_, atol=1e-7)
    assert res.alpha == pytest.approx(sk.intercept_, abs=1e-7)


def test_ridge_closed_form(rng):
    data = make_data(rng)
    lam = 7.5
    res = fit(data, ModelSpec(LeastSquares(), Ridge(lam)), TIGHT)
    b = np.linalg.solve(data.x.T @ data.x + lam * np.eye(data.p), data.x.T @ (data.y - data.y.mean()))
    np.testing.assert_allclose(res.beta, b, atol=1e-8)


def test_enet_reduces_to_lasso_and_ridge(rng):
    data = make_data(rng)
    w = np.ones(data.p)
    a = fit(data, ModelSpec(LeastSquares(), AdaptiveElasticNet(5.0, 0.0, w)), TIGHT)
    b = fit(data, ModelSpec(LeastSquares(), AdaptiveLasso(5.0, w)), TIGHT)
    np.testing.assert_allclose(a.beta, b.beta, atol=1e-9)


def test_huber_matches_sklearn(rng):
    data = make_data(rng, n=100, p=4, outliers=8)
    res = fit_unpenalized(data, Huber(1.345), TIGHT)
    sk = HuberRegressor(epsilon=1.345, alpha=0.0, max_iter=100_000, tol=1e-12).fit(data.x, data.y)
    np.testing.assert_allclose(res.beta, sk.coef_, atol=1e-5)
    assert res.s == pytest.approx(sk.scale_, rel=1e-5)


def test_huber_resists_outliers(rng):
    data = make_data(rng, n=100, p=3, noise=0.5, outliers=10)
    ls = fit_unpenalized(data)
    hub = fit_unpenalized(data, Huber(1.345))
    assert abs(hub.alpha - 1.0) < abs(ls.alpha - 1.0)


def test_berhu_zero_lambda_is_ols(rng):
    data = make_data(rng)
    res = fit(data, ModelSpec(LeastSquares(), AdaptiveBerHu(0.0, 1.345, None)), TIGHT)
    ols = fit_unpenalized(data)
    np.testing.assert_allclose(res.beta, ols.beta, atol=1e-8)
    assert res.tau > 0


def test_large_lambda_gives_zero(rng):
    data = make_data(rng)
    for pen in (AdaptiveLasso(1e6, None), AdaptiveBerHu(1e6, 1.345, None)):
        for loss in (LeastSquares(), Huber(1.345)):
            res = fit(data, ModelSpec(loss, pen))
            assert res.converged
            assert not np.any(res.beta)
            if isinstance(pen, AdaptiveBerHu):
                assert res.tau == 0.0


def test_objective_matches_reported(rng):
    data = make_data(rng, outliers=3)
    spec = ModelSpec(Huber(1.345), AdaptiveBerHu(3.0, 1.345, np.linspace(0.5, 2, 5)))
    res = fit(data, spec)
    assert objective(data, spec, res.alpha, res.beta, res.s, res.tau) == pytest.approx(res.objective)
    assert objective(data, spec, res.alpha, res.beta, res.s) == pytest.approx(res.objective, rel=1e-12)


def test_trace_is_monotone(rng):
    data = make_data(rng, n=50, p=8, outliers=4)
    spec = ModelSpec(Huber(1.345), AdaptiveBerHu(2.0, 1.345, None))
    res = fit(data, spec)
    assert res.monotone
    assert np.all(np.diff(res.trace) <= 1e-11 * (1 + np.abs(res.trace[:-1])))


def test_non_convergence_is_flagged(rng):
    data = make_data(rng)
    res = fit(data, ModelSpec(LeastSquares(), AdaptiveBerHu(5.0, 1.345, None)), SolverConfig(max_sweeps=1))
    assert not res.converged
    assert res.sweeps == 1


def test_kkt_check_detects_perturbation(rng):
    data = make_data(rng)
    spec = ModelSpec(LeastSquares(), AdaptiveBerHu(5.0, 1.345, None))
    res = fit(data, spec)
    assert kkt_check(data, spec, res).max_residual <= 1e-6
    bad = res.__class__(**{**res.__dict__, "beta": res.beta + 0.01})
    assert kkt_check(data, spec, bad).max_residual > 1e-3


def test_kkt_check_rejects_inconsistent_fit(rng):
    data = make_data(rng)
    spec = ModelSpec(LeastSquares(), AdaptiveBerHu(5.0, 1.345, None))
    res = fit(data, spec)
    bad = res.__class__(**{**res.__dict__, "tau": 0.0})
    with pytest.raises(InconsistentFitError):
        kkt_check(data, spec, bad)


def test_warm_start_reaches_same_point(rng):
    data = make_data(rng)
    spec = ModelSpec(Huber(1.345), AdaptiveLasso(4.0, None))
    cold = fit(data, spec, TIGHT)
    warm = fit(data, spec, SolverConfig(kkt_tol=1e-11, objective_tol=1e-15, warm_start=cold))
    assert warm.sweeps <= 3
    np.testing.assert_allclose(warm.beta, cold.beta, atol=1e-9)


def test_warm_start_shape_checked(rng):
    data = make_data(rng)
    other = fit(make_data(rng, p=3), ModelSpec(LeastSquares(), NoPenalty()))
    with pytest.raises(ParameterError):
        fit(data, ModelSpec(LeastSquares(), NoPenalty()), SolverConfig(warm_start=other))


def test_path_descends_and_sparsifies(rng):
    data = make_data(rng)
    spec = ModelSpec(LeastSquares(), AdaptiveLasso(1.0, None))
    grid = [0.0, 1.0, 10.0, 100.0, 1000.0]
    fits = fit_path(data, spec, grid)
    counts = [np.count_nonzero(f.beta) for f in fits]
    assert counts[0] == data.p and counts[-1] == 0
    assert counts == sorted(counts, reverse=True)


def test_rank_deficient_design_flagged(rng):
    x = rng.standard_normal((20, 3))
    x[:, 2] = x[:, 0]
    data = Dataset(center_columns(x)[0], rng.standard_normal(20))
    assert fit_unpenalized(data).rank_deficient


def test_lad_corner_is_escaped():
    # n = 4 rows and three parameters: the optimum has s = 0 with two zero
    # residuals, a corner where single-coordinate moves stall
    x = np.array([[-0.5871866133077772, -1.4674973864283736],
                  [0.05374077219021256, 0.3661271486250743],
                  [-0.27363408738457273, 0.03605061607428134],
                  [0.8070799285021374, 1.065319621729018]])
    y = np.array([20.46943148349354, 0.7496741342529503, 1.4863135623343573, 0.5015597408326589])
    spec = ModelSpec(Huber(1.345), AdaptiveBerHu(0.06733615000824904, 2.3895860311421173,
                                                 np.array([0.996831714150364, 0.4275098396603543])))
    data = Dataset(x, y)
    res = fit(data, spec)
    ref, _ = brute_force_minimum(data, spec)
    assert res.converged
    assert res.objective <= ref * (1 + 1e-6)
    assert kkt_check(data, spec, res).max_residual <= 1e-6


def test_collapse_to_zero_corner():
    # the optimum is beta = 0, tau = 0, which coordinate sweeps only approach
    x = center_columns(np.array([[-0.80434593], [-0.69527266], [1.4996186]]))[0]
    y = np.array([21.17198921, -0.29543491, 2.40692711])
    spec = ModelSpec(Huber(1.345), AdaptiveBerHu(0.725899089323879, 1.4670170345694995,
                                                 np.array([1.851205])))
    res = fit(Dataset(x, y), spec)
    assert res.converged
    assert res.beta[0] == 0.0 and res.tau == 0.0


@pytest.mark.parametrize("huber", [False, True])
@pytest.mark.parametrize("penalty", ["lasso", "berhu"])
def test_tiny_instances_match_brute_force(huber, penalty):
    rng = np.random.default_rng(99)
    for _ in range(5):
        data, spec = tiny_instance(rng, huber, penalty)
        res = fit(data, spec)
        ref, _ = brute_force_minimum(data, spec)
        assert res.objective <= ref + 1e-4 * abs(ref)
        assert res.monotone


@given(st.integers(0, 2**32 - 1), st.booleans(), st.sampled_from(["lasso", "berhu", "ridge", "enet"]))
def test_random_fits_satisfy_kkt(seed, huber, penalty):
    rng = np.random.default_rng(seed)
    n, p = int(rng.integers(8, 40)), int(rng.integers(1, 7))
    x = center_columns(rng.standard_normal((n, p)))[0]
    y = x @ rng.standard_normal(p) * 2 + rng.standard_normal(n) + 1
    w = rng.exponential(1.0, p) + 0.1
    lam = float(np.exp(rng.uniform(-2, 4)))
    pen = {"lasso": AdaptiveLasso(lam, w), "berhu": AdaptiveBerHu(lam, 1.345, w),
           "ridge": Ridge(lam), "enet": AdaptiveElasticNet(lam, 0.5, w)}[penalty]
    spec = ModelSpec(Huber(1.345) if huber else LeastSquares(), pen)
    data = Dataset(x, y)
    res = fit(data, spec)
    assert res.converged and res.monotone
    assert kkt_check(data, spec, res).max_residual <= 1e-6
    # no coordinate perturbation improves the objective
    base = objective(data, spec, res.alpha, res.beta, res.s)
    for j in range(p):
        for d in (1e-4, -1e-4):
            b = res.beta.copy()
            b[j] += d
            assert objective(data, spec, res.alpha, b, res.s) >= base - 1e-9 * (1 + abs(base))


def test_objective_matches_variational_forms(rng):
    x = rng.standard_normal((40, 3))
    x -= x.mean(axis=0)
    y = 0.5 + x @ np.array([2.0, -1.0, 0.0]) + rng.standard_t(2, 40)
    data = Dataset(x, y)
    M, L, lam = 1.345, 1.345, 3.0
    w = np.array([0.7, 1.3, 2.0])
    spec = ModelSpec(Huber(M), AdaptiveBerHu(lam, L, w))
    res = fit(data, spec)
    assert res.s > 0 and res.tau > 0
    z = (y - res.alpha - x @ res.beta) / res.s
    v = np.sign(z) * np.maximum(np.abs(z) - M, 0.0)
    loss = data.n * res.s + res.s * np.sum((z - v) ** 2 + 2 * M * np.abs(v))
    b = np.abs(res.beta) / res.tau
    u = np.maximum(L, b)
    pen = res.tau * (np.sum(1 / w) + np.sum(w * (u * u / (2 * L) - u + b + L / 2)))
    assert loss + lam * pen == pytest.approx(res.objective, rel=1e-10)
