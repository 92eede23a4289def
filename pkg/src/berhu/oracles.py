"""Reference computations that share no code with the fast paths: dense-grid
searches, candidate enumeration and brute-force minimization. They are slow
and exist to certify the exact scans and the solver."""

from __future__ import annotations

import numpy as np

from .core import AdaptiveBerHu, AdaptiveLasso, Dataset, Huber, ModelSpec


# ---------------------------------------------------------------- 1-D scans


def _berhu(z, L):
    a = np.abs(z)
    with np.errstate(over="ignore"):  # the discarded branch may overflow
        return np.where(a <= L, a, (z * z + L * L) / (2 * L))


def tau_objective(tau, absb, w, L):
    """P(beta, tau) for an array of tau > 0."""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    z = absb[None, :] / tau[:, None]
    return tau * (np.sum(1.0 / w) + np.sum(w * _berhu(z, L), axis=1))


def tau_derivative(tau, absb, w, L):
    z = absb / tau
    act = z > L
    return np.sum(1.0 / w) + np.sum(w[act] * (L / 2 - z[act] ** 2 / (2 * L)))


def _bisect(pred, lo, hi):
    """Largest x in [lo, hi] (to rounding) with pred(x) true, assuming pred is
    true at lo, false at hi and monotone in between."""
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


def grid_tau(beta, weights, L, points: int = 2_000):
    """Minimize over tau on a log grid spanning [1e-6, 1e3] * max|b|/L, then
    bisect the sign change of the derivative between the grid neighbours."""
    absb = np.abs(np.asarray(beta, dtype=float))
    w = np.asarray(weights, dtype=float)
    if not np.any(absb):
        return 0.0, 0.0
    top = absb.max() / L
    grid = np.geomspace(1e-6 * top, 1e3 * top, points)
    vals = tau_objective(grid, absb, w, L)
    k = int(np.argmin(vals))

    def neg(t):
        return tau_derivative(t, absb, w, L) < 0

    lo = grid[k - 1] if k > 0 and neg(grid[k - 1]) else 1e-9 * top
    hi = grid[k + 1] if k + 1 < points and not neg(grid[k + 1]) else 1e6 * top
    lo, hi = _bisect(neg, lo, hi)
    cands = np.array([lo, hi])
    cv = tau_objective(cands, absb, w, L)
    j = int(np.argmin(cv))
    return float(cands[j]), float(min(cv[j], vals[k]))


def _huber(z, M):
    a = np.abs(z)
    with np.errstate(over="ignore"):
        return np.where(a <= M, z * z, 2 * M * a - M * M)


def s_objective(s, r, M):
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.empty(s.shape)
    pos = s > 0
    sp = s[pos]
    a = np.abs(r)[None, :]
    S = sp[:, None]
    inside = a <= M * S
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(inside, a / np.where(inside, S, 1.0) * a, 2 * M * a - M * M * S)
    out[pos] = r.size * sp + np.sum(terms, axis=1)
    out[~pos] = 2 * M * np.sum(np.abs(r))
    return out


def s_derivative(s, r, M):
    small = np.abs(r) <= M * s
    return r.size - np.sum(r[small] ** 2) / s**2 - M * M * np.sum(~small)


def grid_s(residuals, M, points: int = 2_000):
    """Minimize over s >= 0: log grid over [1e-6, 1e3] * max|r|/M plus s = 0,
    then bisection for the largest s with a non-positive derivative (the
    largest minimizer when the criterion has a flat stretch)."""
    r = np.asarray(residuals, dtype=float)
    if not np.any(r):
        return 0.0, 0.0
    top = np.abs(r).max() / M
    grid = np.concatenate([[0.0], np.geomspace(1e-6 * top, 1e3 * top, points)])
    vals = s_objective(grid, r, M)
    # derivative just above zero: every nonzero residual is on the linear part
    if r.size - M * M * np.count_nonzero(r) > 0:
        return 0.0, float(vals[0])

    def nonpos(s):
        return s_derivative(s, r, M) <= 0

    k = int(np.flatnonzero(vals == vals.min())[-1])
    lo = grid[k - 1] if k > 1 and nonpos(grid[k - 1]) else 1e-9 * top
    hi = grid[k + 1] if k + 1 <= points and not nonpos(grid[k + 1]) else 1e6 * top
    lo, _ = _bisect(nonpos, lo, hi)
    return float(lo), float(min(s_objective(lo, r, M)[0], vals.min()))


# ------------------------------------------------------------- brute force


def _min_over_s(R, M):
    """min over s >= 0 of the Huber criterion for each row of R by evaluating
    every candidate stationary point (one per count of large residuals)."""
    P, n = R.shape
    A = -np.sort(-np.abs(R), axis=1)
    tail = np.cumsum((A**2)[:, ::-1], axis=1)[:, ::-1]  # sum_{i >= k} a_i^2
    best = 2 * M * A.sum(axis=1)  # s = 0
    for k in range(n):
        den = n - M * M * k
        if den <= 0:
            continue
        s = np.sqrt(tail[:, k] / den)
        ok = s > 0
        val = np.full(P, np.inf)
        sk = s[ok][:, None]
        val[ok] = n * s[ok] + s[ok] * np.sum(_huber(R[ok] / sk, M), axis=1)
        best = np.minimum(best, val)
    return best


def _min_over_tau(B, w, L):
    """min over tau of P(beta, tau) for each row of B, by candidate enumeration."""
    P, p = B.shape
    A = np.abs(B)
    order = np.argsort(-A, axis=1)
    As = np.take_along_axis(A, order, axis=1)
    Ws = w[order]
    S = np.sum(1.0 / w)
    cwa = np.cumsum(Ws * As**2, axis=1)
    cw = np.cumsum(Ws, axis=1)
    best = np.where(np.any(A > 0, axis=1), np.inf, 0.0)
    for k in range(p):
        tau = np.sqrt(cwa[:, k] / (2 * L * S + L * L * cw[:, k]))
        ok = tau > 0
        val = np.full(P, np.inf)
        t = tau[ok][:, None]
        val[ok] = tau[ok] * (S + np.sum(w * _berhu(A[ok] / t, L), axis=1))
        best = np.minimum(best, val)
    return best


def batch_objective(data: Dataset, spec: ModelSpec, points: np.ndarray) -> np.ndarray:
    """Objective at rows of ``points`` = (alpha, beta_1..beta_p), with s and tau
    minimized out."""
    alpha = points[:, 0]
    B = points[:, 1:]
    R = data.y[None, :] - alpha[:, None] - B @ data.x.T
    if isinstance(spec.loss, Huber):
        lv = _min_over_s(R, spec.loss.M)
    else:
        lv = np.sum(R * R, axis=1)
    pen = spec.penalty
    w = spec.weights_for(data.p)
    if isinstance(pen, AdaptiveBerHu):
        pv = pen.lam * _min_over_tau(B, w, pen.L) if pen.lam > 0 else 0.0
    elif isinstance(pen, AdaptiveLasso):
        pv = pen.lam * np.sum(w * np.abs(B), axis=1)
    else:
        raise NotImplementedError("brute force covers the adaptive lasso and BerHu penalties")
    return lv + pv


def brute_force_minimum(data: Dataset, spec: ModelSpec, per_dim: int = 21,
                        final_step: float = 1e-7, max_rounds: int = 200):
    """Refined grid search over (alpha, beta). The box is re-centred on the
    best grid point each round and shrunk only when that point is interior.
    Returns (objective, point)."""
    p = data.p
    y = data.y
    ols = np.linalg.lstsq(data.x, y - y.mean(), rcond=None)[0]
    center = np.concatenate([[np.median(y)], 0.5 * ols])
    half = np.full(p + 1, 2.0 * (np.max(np.abs(ols)) + np.ptp(y)) + 1.0)
    ticks = np.linspace(-1.0, 1.0, per_dim)
    best_val, best_pt = np.inf, center
    for _ in range(max_rounds):
        axes = [center[d] + half[d] * ticks for d in range(p + 1)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, p + 1)
        vals = batch_objective(data, spec, mesh)
        k = int(np.argmin(vals))
        if vals[k] <= best_val:
            best_val, best_pt = float(vals[k]), mesh[k]
        idx = np.unravel_index(k, (per_dim,) * (p + 1))
        center = mesh[k]
        interior = all(0 < i < per_dim - 1 for i in idx)
        step = 2.0 * half / (per_dim - 1)
        if interior:
            if np.all(step <= final_step):
                break
            half = 4.0 * step
    return best_val, best_pt
