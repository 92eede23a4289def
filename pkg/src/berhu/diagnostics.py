"""Grouping-effect bound for least-squares BerHu fits, selection-quality
counters and relative prediction error."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import AdaptiveBerHu, BerhuError, Dataset, FitResult, LeastSquares, ModelSpec, ParameterError
from .tuning import ZERO_THRESHOLD

BOUND_SLACK = 1e-8


class PreconditionError(BerhuError, ValueError):
    pass


@dataclass(frozen=True)
class GroupingBoundReport:
    """|w_i b_i - w_j b_j| (lhs) against (2 L tau / lam) ||y|| sqrt(||x_i||^2 +
    ||x_j||^2 - 2 C_ij x_i'x_j) (rhs)."""

    i: int
    j: int
    lhs: float
    c_ij: float
    rhs: float
    satisfied: bool


def _c_ij(bi: float, bj: float, thr: float) -> float:
    # resolved by membership in G = {|b| > L tau}; equals
    # min(1, |bi|/thr, |bj|/thr, |bi bj|/thr^2)
    gi, gj = abs(bi) > thr, abs(bj) > thr
    if gi and gj:
        return 1.0
    if gi:
        return abs(bj) / thr
    if gj:
        return abs(bi) / thr
    return abs(bi * bj) / (thr * thr)


def grouping_bound(data: Dataset, spec: ModelSpec, fit_result: FitResult, i: int, j: int,
                   slack: float = BOUND_SLACK) -> GroupingBoundReport:
    """Check the grouping bound for the pair (i, j) of a least-squares BerHu fit."""
    if not isinstance(spec.loss, LeastSquares) or not isinstance(spec.penalty, AdaptiveBerHu):
        raise PreconditionError("the grouping bound applies to least squares with the BerHu penalty")
    lam, L = spec.penalty.lam, spec.penalty.L
    beta = np.asarray(fit_result.beta, dtype=float)
    tau = fit_result.tau
    if not lam > 0:
        raise PreconditionError("lambda must be > 0")
    if beta[i] == 0 or beta[j] == 0:
        raise PreconditionError(f"coefficients {i} and {j} must be nonzero")
    if tau is None or not tau > 0:
        raise PreconditionError("tau must be > 0")
    w = spec.weights_for(data.p)
    lhs = abs(w[i] * beta[i] - w[j] * beta[j])
    thr = L * tau
    c = _c_ij(beta[i], beta[j], thr)
    xi, xj = data.x[:, i], data.x[:, j]
    inner = float(xi @ xi + xj @ xj - 2.0 * c * (xi @ xj))
    rhs = (2.0 * L * tau / lam) * float(np.linalg.norm(data.y)) * np.sqrt(max(inner, 0.0))
    return GroupingBoundReport(int(i), int(j), float(lhs), float(c), float(rhs), bool(lhs <= rhs + slack))


def grouping_sweep(data: Dataset, spec: ModelSpec, fit_result: FitResult,
                   slack: float = BOUND_SLACK) -> list:
    """Bound reports for every pair i < j of nonzero coefficients."""
    nz = np.flatnonzero(np.asarray(fit_result.beta) != 0)
    return [grouping_bound(data, spec, fit_result, int(a), int(b), slack)
            for k, a in enumerate(nz) for b in nz[k + 1:]]


def summarize_grouping(reports: Sequence[GroupingBoundReport]) -> dict:
    if not reports:
        return {"pairs": 0, "violations": 0, "max_lhs_minus_rhs": None}
    gap = max(r.lhs - r.rhs for r in reports)
    return {
        "pairs": len(reports),
        "violations": sum(not r.satisfied for r in reports),
        "max_lhs_minus_rhs": float(gap),
    }


# --------------------------------------------------------------- selection


@dataclass(frozen=True)
class SelectionMetrics:
    """C, O, U count exactly-correct, overfitting (true support plus at least
    one spurious variable) and underfitting (misses a true variable) models.
    Z, CZ, CNZ average the number of zeros, correct zeros and correct
    non-zeros; TZ and TNZ are the true counts."""

    C: int
    O: int
    U: int
    Z: float
    CZ: float
    CNZ: float
    TZ: int
    TNZ: int
    replications: int

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("C", "O", "U", "Z", "CZ", "CNZ", "TZ", "TNZ", "replications")}


def selection_metrics(betas: Iterable, true_support: Sequence[int],
                      zero_threshold: float = ZERO_THRESHOLD, p: int = None) -> SelectionMetrics:
    """A coefficient counts as zero iff |b| < zero_threshold."""
    rows = [np.asarray(b, dtype=float).ravel() for b in betas]
    if p is None:
        if not rows:
            raise ParameterError("need p when no fits are given")
        p = rows[0].shape[0]
    truth = np.zeros(p, dtype=bool)
    truth[list(true_support)] = True
    C = O = U = 0
    Z = CZ = CNZ = 0.0
    for b in rows:
        if b.shape[0] != p:
            raise ParameterError("all coefficient vectors must have the same length")
        nonzero = np.abs(b) >= zero_threshold
        if np.any(truth & ~nonzero):
            U += 1
        elif np.any(~truth & nonzero):
            O += 1
        else:
            C += 1
        Z += np.sum(~nonzero)
        CZ += np.sum(~nonzero & ~truth)
        CNZ += np.sum(nonzero & truth)
    m = len(rows)
    avg = (lambda v: float(v) / m) if m else (lambda v: float("nan"))
    return SelectionMetrics(C, O, U, avg(Z), avg(CZ), avg(CNZ),
                            int(np.sum(~truth)), int(np.sum(truth)), m)


def rpe(alpha_hat: float, beta_hat, true_alpha: float, true_beta, test_design, sigma: float) -> float:
    """(1/m) sum ((a - a*) + x_i'(b - b*))^2 / sigma^2 over a centered test design."""
    if not sigma > 0:
        raise ParameterError("sigma must be > 0")
    x = np.asarray(test_design, dtype=float)
    d = np.asarray(beta_hat, dtype=float) - np.asarray(true_beta, dtype=float)
    err = (alpha_hat - true_alpha) + x @ d
    return float(np.mean(err * err) / sigma**2)
