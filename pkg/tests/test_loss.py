import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from berhu.core import ParameterError
from berhu.loss import (
    huber,
    huber_concomitant,
    huber_criterion,
    huber_derivative,
    huber_variational_gap,
    least_squares,
    least_squares_evaluation,
)
from berhu.oracles import grid_s, s_objective

residuals = arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e3, 1e3, allow_nan=False))
thresholds = st.floats(0.5, 3.0)


def test_huber_branches():
    assert huber(0.5, 1.0) == 0.25
    assert huber(-3.0, 1.0) == 5.0  # 2*1*3 - 1
    assert huber_derivative(3.0, 1.0) == 2.0
    assert huber_derivative(-0.25, 1.0) == -0.5


def test_worked_example_flat_criterion():
    # n = 3 = M^2 * (#nonzero): the criterion is flat on [0, 1]; the largest
    # minimizer is reported
    ev = huber_concomitant([1.0, -1.0, 2.0], 1.0)
    assert ev.s_hat == 1.0
    assert ev.value == 8.0
    assert ev.small_set == (0, 1) and ev.large_set == (2,)
    assert huber_criterion([1.0, -1.0, 2.0], 1.0, 0.0) == 8.0
    assert huber_criterion([1.0, -1.0, 2.0], 1.0, 0.5) == 8.0


def test_lad_branch_when_few_nonzero():
    # n - M^2 * nnz = 4 - 1.345^2 > 0: s = 0 and the value is 2M sum|r|
    ev = huber_concomitant([0.0, 0.0, 0.0, 5.0], 1.345)
    assert ev.s_hat == 0.0
    assert ev.value == pytest.approx(2 * 1.345 * 5.0)


def test_all_zero_residuals():
    ev = huber_concomitant(np.zeros(5))
    assert ev.s_hat == 0.0 and ev.value == 0.0


def test_closed_form_when_all_small():
    # with every |r| <= M s the optimum is s^2 = sum r^2 / n... once M is large
    r = np.array([1.0, -2.0, 0.5, 1.5])
    ev = huber_concomitant(r, 10.0)
    s = np.sqrt(np.sum(r**2) / r.size)
    assert ev.s_hat == pytest.approx(s, rel=1e-14)
    assert ev.value == pytest.approx(2 * r.size * s, rel=1e-14)


def test_validation():
    with pytest.raises(ParameterError):
        huber_concomitant([1.0], 0.0)
    with pytest.raises(ParameterError):
        huber_criterion([1.0], 1.0, -1.0)


def test_least_squares():
    assert least_squares([1.0, -2.0]) == 5.0
    assert least_squares_evaluation([3.0]).value == 9.0


@given(st.floats(-50, 50), thresholds)
def test_variational_gap_is_zero(z, M):
    assert huber_variational_gap(z, M) <= 1e-10 * (1 + z * z)


@given(residuals, st.sampled_from([1.0, 1.345, 2.0]))
@example(np.array([1.0, 2.2250738585072014e-309]), 1.0)  # r / s overflows at the optimum
@example(np.array([8.47634889e-255]), 1.0)  # r^2 underflows near the optimum
def test_scan_is_global_minimum(r, M):
    ev = huber_concomitant(r, M)
    probe = np.concatenate([[0.0], ev.s_hat * np.array([0.5, 0.99, 1.01, 2.0]), [1e-3, 1.0, 1e3]])
    vals = s_objective(probe, r, M)
    assert np.all(vals >= ev.value * (1 - 1e-12) - 1e-300)
    assert huber_criterion(r, M, ev.s_hat) == pytest.approx(ev.value, rel=1e-12, abs=1e-300)


@given(residuals, st.sampled_from([1.0, 1.345]), st.floats(1e-3, 1e3))
def test_scale_equivariance(r, M, c):
    a = huber_concomitant(c * r, M)
    b = huber_concomitant(r, M)
    assert a.s_hat == pytest.approx(c * b.s_hat, rel=1e-10, abs=1e-300)
    assert a.value == pytest.approx(c * b.value, rel=1e-10, abs=1e-300)


def test_matches_grid_oracle(rng):
    for k in range(100):
        n = int(rng.integers(1, 40))
        M = (1.0, 1.345)[k % 2]
        r = rng.standard_normal(n) * 4
        s, v = grid_s(r, M)
        ev = huber_concomitant(r, M)
        assert ev.value == pytest.approx(v, rel=1e-10)
        assert ev.s_hat == pytest.approx(s, rel=1e-8, abs=1e-300)
