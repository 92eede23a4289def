from dataclasses import replace

import numpy as np
import pytest

from berhu.core import AdaptiveBerHu, AdaptiveLasso, Dataset, LeastSquares, ModelSpec, center_columns
from berhu.diagnostics import (
    PreconditionError,
    _c_ij,
    grouping_bound,
    grouping_sweep,
    rpe,
    selection_metrics,
    summarize_grouping,
)
from berhu.solver import fit


@pytest.mark.parametrize("bi,bj,expected", [
    (5.0, 4.0, 1.0),
    (5.0, 0.5, 0.5),
    (0.25, 3.0, 0.25),
    (0.5, 0.5, 0.25),
])
def test_c_ij_membership(bi, bj, expected):
    assert _c_ij(bi, bj, 1.0) == pytest.approx(expected)


@pytest.mark.parametrize("bi,bj", [(5.0, 4.0), (5.0, 0.5), (0.5, 0.5), (-0.3, 2.0)])
def test_c_ij_min_form(bi, bj):
    thr = 1.3
    alt = min(1.0, abs(bi) / thr, abs(bj) / thr, abs(bi * bj) / thr**2)
    assert _c_ij(bi, bj, thr) == pytest.approx(alt)


def _ls_berhu_fit(rng, lam=5.0):
    x, _ = center_columns(rng.standard_normal((50, 4)))
    y = x @ np.array([3.0, 2.0, 0.0, 1.0]) + rng.standard_normal(50)
    data = Dataset(x, y)
    spec = ModelSpec(LeastSquares(), AdaptiveBerHu(lam, 1.345, np.ones(4)))
    return data, spec, fit(data, spec)


def test_bound_holds_on_fit(rng):
    data, spec, res = _ls_berhu_fit(rng)
    reps = grouping_sweep(data, spec, res)
    assert reps and all(r.satisfied for r in reps)
    summ = summarize_grouping(reps)
    assert summ["violations"] == 0 and summ["pairs"] == len(reps)


def test_preconditions(rng):
    data, spec, res = _ls_berhu_fit(rng)
    lasso = ModelSpec(LeastSquares(), AdaptiveLasso(1.0, np.ones(4)))
    with pytest.raises(PreconditionError):
        grouping_bound(data, lasso, res, 0, 1)
    zeroed = replace(res, beta=np.array([0.0, 1.0, 1.0, 1.0]))
    with pytest.raises(PreconditionError):
        grouping_bound(data, spec, zeroed, 0, 1)
    no_tau = replace(res, tau=0.0)
    with pytest.raises(PreconditionError):
        grouping_bound(data, spec, no_tau, 0, 1)
    assert summarize_grouping([])["pairs"] == 0


def test_selection_metrics_counts():
    truth = [0, 1]
    betas = [
        [1.0, 2.0, 0.0, 0.0],   # correct
        [1.0, 2.0, 0.5, 0.0],   # over
        [1.0, 0.0, 0.5, 0.0],   # under (miss wins)
        [1.0, 1e-6, 0.0, 0.0],  # under via threshold
    ]
    m = selection_metrics(betas, truth)
    assert (m.C, m.O, m.U) == (1, 1, 2)
    assert m.TZ == 2 and m.TNZ == 2
    assert m.Z == pytest.approx((2 + 1 + 2 + 3) / 4)
    assert m.CZ == pytest.approx((2 + 1 + 1 + 2) / 4)
    assert m.CNZ == pytest.approx((2 + 2 + 1 + 1) / 4)
    assert m.replications == 4


def test_rpe_oracle(rng):
    x = rng.standard_normal((30, 3))
    b = np.array([1.0, -1.0, 0.5])
    bh = b + np.array([0.1, 0.0, -0.2])
    expected = np.mean((0.3 + x @ (bh - b)) ** 2) / 4.0
    assert rpe(1.3, bh, 1.0, b, x, 2.0) == pytest.approx(expected, rel=1e-12)
    assert rpe(1.0, b, 1.0, b, x, 2.0) == 0.0
