"""Adaptive weights, lambda grids, and model selection by BIC or k-fold CV."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    AdaptiveElasticNet,
    BerhuError,
    Dataset,
    FitResult,
    Huber,
    ModelSpec,
    ParameterError,
    center_columns,
)
from .loss import huber_criterion
from .solver import SolverConfig, fit, fit_path

log = logging.getLogger(__name__)

ZERO_THRESHOLD = 1e-5
WEIGHT_CLAMP = 1e-8
GRID_LOW_RATIO = 1e-4

# (points, upper end) of the default lambda grids
DEFAULT_GRIDS = {
    "berhu": (100, 1400.0),
    "lasso": (200, 10_000.0),
    "ridge": (100, 1400.0),
    "enet": (25, 5000.0),
}
ENET_LAMBDA2 = (0.0, 0.01, 0.1, 1.0, 10.0, 100.0)


class TuningError(BerhuError):
    pass


def adaptive_weights(beta_unpen, gamma: float = 1.0, clamp: float = WEIGHT_CLAMP) -> np.ndarray:
    """w_j = 1 / max(|b_j|, clamp)^gamma."""
    if not gamma > 0:
        raise ParameterError(f"gamma must be > 0, got {gamma}")
    if not clamp > 0:
        raise ParameterError(f"clamp must be > 0, got {clamp}")
    b = np.abs(np.asarray(beta_unpen, dtype=float).ravel())
    return np.maximum(b, clamp) ** (-gamma)


def count_nonzero(beta, zero_threshold: float = ZERO_THRESHOLD) -> int:
    """Coefficients with |b| >= zero_threshold."""
    return int(np.sum(np.abs(np.asarray(beta)) >= zero_threshold))


def make_grid(count: int, hi: float, low_ratio: float = GRID_LOW_RATIO) -> np.ndarray:
    """{0} followed by count - 1 geometrically spaced points from hi*low_ratio to hi."""
    if int(count) < 2:
        raise ParameterError("grid needs at least 2 points")
    if not hi > 0:
        raise ParameterError("grid upper end must be > 0")
    if int(count) == 2:
        return np.array([0.0, float(hi)])
    return np.concatenate([[0.0], np.geomspace(hi * low_ratio, hi, int(count) - 1)])


def default_grid(kind: str) -> np.ndarray:
    try:
        count, hi = DEFAULT_GRIDS[kind]
    except KeyError:
        raise ParameterError(f"no default grid for {kind!r}") from None
    return make_grid(count, hi)


# --------------------------------------------------------------------- BIC


def bic_ls_value(rss: float, k: int, n: int) -> float:
    """log(RSS) + k log(n) / n; -inf for a perfect fit."""
    if rss <= 0:
        return -math.inf
    return math.log(rss) + k * math.log(n) / n


def bic_huber_value(lh: float, k: int, n: int) -> float:
    """log(L_H) + k log(n) / (2n); -inf when the criterion vanishes."""
    if lh <= 0:
        return -math.inf
    return math.log(lh) + k * math.log(n) / (2 * n)


def bic_ls(data: Dataset, fit_result: FitResult, zero_threshold: float = ZERO_THRESHOLD) -> float:
    r = data.y - fit_result.alpha - data.x @ fit_result.beta
    return bic_ls_value(float(r @ r), count_nonzero(fit_result.beta, zero_threshold), data.n)


def bic_huber(data: Dataset, fit_result: FitResult, M: float,
              zero_threshold: float = ZERO_THRESHOLD) -> float:
    r = data.y - fit_result.alpha - data.x @ fit_result.beta
    lh = huber_criterion(r, M, float(fit_result.s))
    return bic_huber_value(lh, count_nonzero(fit_result.beta, zero_threshold), data.n)


@dataclass(frozen=True)
class TuningPlan:
    """How one method is tuned: its grid(s), the selection rule and the
    threshold below which a coefficient counts as zero."""

    grid: np.ndarray
    rule: str  # "bic" or "cv"
    grid2: Optional[np.ndarray] = None
    folds: int = 5
    zero_threshold: float = ZERO_THRESHOLD

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float).ravel()
        if g.size == 0 or np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ParameterError("grid must be nonempty, finite and >= 0")
        object.__setattr__(self, "grid", g)
        if self.grid2 is not None:
            g2 = np.asarray(self.grid2, dtype=float).ravel()
            if g2.size == 0 or np.any(g2 < 0):
                raise ParameterError("second grid must be nonempty and >= 0")
            object.__setattr__(self, "grid2", g2)
        if self.rule not in ("bic", "cv"):
            raise ParameterError(f"unknown selection rule {self.rule!r}")
        if self.rule == "cv" and int(self.folds) < 2:
            raise ParameterError("cross-validation needs at least 2 folds")


@dataclass(frozen=True)
class Selection:
    """Outcome of tuning: chosen constants, the refitted model on all data,
    and the score of every grid point (nan where the fit failed)."""

    lam: float
    lam2: Optional[float]
    fit: FitResult
    score: float
    scores: np.ndarray = field(repr=False)
    perfect_fit: bool = False
    failed: int = 0


def _argmin_prefer_large(scores: np.ndarray, lams: np.ndarray) -> int:
    """Index of the smallest finite-or--inf score; ties go to the larger lambda."""
    ok = ~np.isnan(scores)
    if not np.any(ok):
        raise TuningError("every fit on the grid failed")
    best = np.min(scores[ok])
    cand = np.flatnonzero(ok & (scores == best))
    return int(cand[np.argmax(lams[cand])])


def select_by_bic(data: Dataset, spec: ModelSpec, grid: Sequence[float],
                  cfg: Optional[SolverConfig] = None,
                  zero_threshold: float = ZERO_THRESHOLD) -> Selection:
    """Pick lambda minimizing the BIC of the loss (least squares or Huber)
    along a warm-started path."""
    grid = np.asarray(grid, dtype=float).ravel()
    path = fit_path(data, spec, grid, cfg)
    scores = np.full(grid.size, np.nan)
    for i, res in enumerate(path):
        if res is None:
            continue
        if isinstance(spec.loss, Huber):
            scores[i] = bic_huber(data, res, spec.loss.M, zero_threshold)
        else:
            scores[i] = bic_ls(data, res, zero_threshold)
    idx = _argmin_prefer_large(scores, grid)
    failed = sum(r is None for r in path)
    return Selection(float(grid[idx]), None, path[idx], float(scores[idx]), scores,
                     perfect_fit=bool(scores[idx] == -math.inf), failed=failed)


def _with_lam2(spec: ModelSpec, lam2: float) -> ModelSpec:
    pen = spec.penalty
    if not isinstance(pen, AdaptiveElasticNet):
        raise ParameterError("a second grid only applies to the elastic net")
    return ModelSpec(spec.loss, AdaptiveElasticNet(pen.lam1, lam2, pen.weights))


def kfold_blocks(n: int, k: int, rng: np.random.Generator) -> list:
    """Contiguous blocks of a random permutation of range(n)."""
    if n < k:
        raise ParameterError(f"need n >= k for {k}-fold CV, got n={n}")
    return np.array_split(rng.permutation(n), k)


def select_by_cv(data: Dataset, spec: ModelSpec, grid: Sequence[float],
                 grid2: Optional[Sequence[float]] = None, k: int = 5,
                 rng: Optional[np.random.Generator] = None,
                 cfg: Optional[SolverConfig] = None) -> Selection:
    """k-fold cross-validation on squared prediction error.

    Each training fold is re-centered with its own means; penalty weights are
    kept as given in ``spec``. For the elastic net, ``grid2`` is the lam2
    grid and both constants are chosen jointly. Folds whose training design
    has a constant column are skipped with a warning.
    """
    grid = np.asarray(grid, dtype=float).ravel()
    lam2s = [None] if grid2 is None else [float(v) for v in np.asarray(grid2).ravel()]
    rng = rng if rng is not None else np.random.default_rng(0)
    folds = kfold_blocks(data.n, k, rng)
    sse = np.zeros((len(lam2s), grid.size))
    cnt = np.zeros((len(lam2s), grid.size))
    used = 0
    for f, test in enumerate(folds):
        train = np.setdiff1d(np.arange(data.n), test)
        xtr_raw = data.x[train]
        if np.any(np.ptp(xtr_raw, axis=0) == 0):
            log.warning("fold %d skipped: constant column in the training design", f)
            continue
        xtr, means = center_columns(xtr_raw)
        dtr = Dataset(xtr, data.y[train])
        xte = data.x[test] - means
        used += 1
        for a, lam2 in enumerate(lam2s):
            sp = spec if lam2 is None else _with_lam2(spec, lam2)
            for i, res in enumerate(fit_path(dtr, sp, grid, cfg)):
                if res is None:
                    continue
                e = data.y[test] - res.alpha - xte @ res.beta
                sse[a, i] += float(e @ e)
                cnt[a, i] += test.size
    if used == 0:
        raise TuningError("every cross-validation fold was degenerate")
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = np.where(cnt > 0, sse / cnt, np.nan)
    # ties: larger lam first, then larger lam2
    best = None
    for a in range(len(lam2s)):
        for i in range(grid.size):
            sc = scores[a, i]
            if np.isnan(sc):
                continue
            key = (sc, -grid[i], -(lam2s[a] or 0.0))
            if best is None or key < best[0]:
                best = (key, a, i)
    if best is None:
        raise TuningError("every fit on the grid failed")
    _, a, i = best
    lam, lam2 = float(grid[i]), lam2s[a]
    sp = spec if lam2 is None else _with_lam2(spec, lam2)
    final = fit(data, sp.with_lambda(lam), cfg)
    out_scores = scores[0] if grid2 is None else scores
    return Selection(lam, lam2, final, float(scores[a, i]), out_scores,
                     failed=int(np.sum(cnt == 0)))


def select(data: Dataset, spec: ModelSpec, plan: TuningPlan,
           rng: Optional[np.random.Generator] = None,
           cfg: Optional[SolverConfig] = None) -> Selection:
    if plan.rule == "bic":
        return select_by_bic(data, spec, plan.grid, cfg, plan.zero_threshold)
    return select_by_cv(data, spec, plan.grid, plan.grid2, plan.folds, rng, cfg)
