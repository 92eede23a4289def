import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from berhu.core import ParameterError
from berhu.oracles import grid_tau, tau_objective
from berhu.penalty import (
    adaptive_berhu_concomitant,
    adaptive_berhu_value,
    berhu,
    berhu_derivative,
    berhu_prox,
    berhu_variational_gap,
    enet_value,
    lasso_value,
    pen_closed_form,
    ridge_value,
    tau_stationarity_residual,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
coefs = arrays(np.float64, st.integers(1, 12), elements=finite)
thresholds = st.floats(0.1, 5.0)


def test_berhu_branches():
    assert berhu(0.5, 1.0) == 0.5
    assert berhu(-1.0, 1.0) == 1.0
    assert berhu(3.0, 1.0) == pytest.approx(5.0)  # (9 + 1) / 2
    assert berhu(-3.0, 2.0) == pytest.approx(13.0 / 4.0)


def test_berhu_is_continuous_and_smooth_at_threshold():
    L = 1.345
    eps = 1e-7
    assert berhu(L - eps, L) == pytest.approx(berhu(L + eps, L), abs=1e-6)
    assert berhu_derivative(L - eps, L) == pytest.approx(berhu_derivative(L + eps, L), abs=1e-6)


def test_berhu_derivative_undefined_at_zero():
    with pytest.raises(ParameterError):
        berhu_derivative(0.0, 1.0)


def test_bad_threshold_rejected():
    with pytest.raises(ParameterError):
        berhu(1.0, 0.0)


# hand-derived values, unit weights, L = 1
def test_two_large_coefficients():
    prof = adaptive_berhu_concomitant([3.0, 3.0], None, 1.0)
    assert prof.tau_hat == pytest.approx(math.sqrt(3.0), rel=1e-12)
    assert prof.value == pytest.approx(6.0 * math.sqrt(3.0), rel=1e-12)
    assert prof.quad_set == (0, 1)


def test_small_coefficients_all_quadratic():
    # tau^2 = 0.05 / 6, value = sqrt(6) * sqrt(0.05)
    prof = adaptive_berhu_concomitant([0.1, 0.2], None, 1.0)
    assert prof.value == pytest.approx(math.sqrt(0.3), rel=1e-12)
    assert pen_closed_form([0.1, 0.2], 1.0) == pytest.approx(math.sqrt(0.3), rel=1e-12)


def test_one_dominant_coefficient():
    v = adaptive_berhu_concomitant([100.0, 1e-6], None, 1.0).value
    assert v == pytest.approx(100.0 * math.sqrt(5.0) + 1e-6, rel=1e-12)
    assert pen_closed_form([100.0, 1e-6], 1.0) == pytest.approx(v, rel=1e-12)


def test_zero_vector():
    prof = adaptive_berhu_concomitant(np.zeros(4))
    assert prof.value == 0.0 and prof.tau_hat == 0.0


@pytest.mark.parametrize("v, expected", [(3.0, 2.0), (2.0, 4.0 / 3.0), (1.2, 0.7), (0.4, 0.0), (-3.0, -2.0)])
def test_prox_hand_values(v, expected):
    # step 1, weight 0.5, L = 1, tau = 1
    assert berhu_prox(v, 1.0, 0.5, 1.0, 1.0) == pytest.approx(expected, rel=1e-12)


def test_prox_validates():
    with pytest.raises(ParameterError):
        berhu_prox(1.0, 1.0, 1.0, 1.0, 0.0)


def test_simple_penalties():
    b = np.array([1.0, -2.0])
    assert ridge_value(b, 2.0) == 10.0
    assert lasso_value(b, 2.0, [1.0, 0.5]) == 4.0
    assert enet_value(b, 1.0, 1.0, [1.0, 1.0]) == 8.0


@given(st.floats(-50, 50), thresholds)
def test_variational_gap_is_zero(z, L):
    assert berhu_variational_gap(z, L) <= 1e-10 * (1 + z * z)


@given(coefs, thresholds)
def test_concomitant_is_minimum_over_tau(beta, L):
    prof = adaptive_berhu_concomitant(beta, None, L)
    if prof.tau_hat == 0:
        assert not np.any(beta)
        return
    absb = np.abs(beta)
    w = np.ones_like(beta)
    taus = prof.tau_hat * np.array([0.5, 0.9, 0.999, 1.001, 1.1, 2.0])
    assert np.all(tau_objective(taus, absb, w, L) >= prof.value * (1 - 1e-12))
    assert adaptive_berhu_value(beta, prof.tau_hat, None, L) == pytest.approx(prof.value, rel=1e-12)


@given(coefs, thresholds)
def test_stationarity_and_closed_form(beta, L):
    prof = adaptive_berhu_concomitant(beta, None, L)
    if prof.tau_hat == 0:
        return
    scale = len(beta) + float(np.sum(np.abs(beta) / prof.tau_hat) ** 2)
    assert abs(tau_stationarity_residual(beta, prof.tau_hat, None, L)) <= 1e-9 * scale
    assert pen_closed_form(beta, L) == pytest.approx(prof.value, rel=1e-10)


@given(coefs, thresholds, st.floats(0.01, 100.0))
def test_positive_homogeneity(beta, L, c):
    w = np.linspace(0.5, 2.0, beta.size)
    a = adaptive_berhu_concomitant(c * beta, w, L)
    b = adaptive_berhu_concomitant(beta, w, L)
    assert a.value == pytest.approx(c * b.value, rel=1e-10, abs=1e-300)
    assert a.tau_hat == pytest.approx(c * b.tau_hat, rel=1e-10, abs=1e-300)


def test_weighted_scan_matches_grid(rng):
    for _ in range(50):
        p = int(rng.integers(1, 15))
        beta = rng.standard_normal(p) * 3
        w = rng.exponential(1.0, p) + 0.1
        L = float(rng.uniform(0.3, 3))
        prof = adaptive_berhu_concomitant(beta, w, L)
        t, v = grid_tau(beta, w, L)
        assert prof.value == pytest.approx(v, rel=1e-9)
        assert prof.tau_hat == pytest.approx(t, rel=1e-6)
