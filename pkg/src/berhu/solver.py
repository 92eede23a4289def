"""Joint minimization of loss + lambda * penalty over (alpha, beta, s, tau).

The heavy lifting is cyclic exact coordinate minimization in ``_kernels``;
this module maps model specifications onto it, provides the unpenalized
estimators, warm-started paths and an independent KKT check.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from . import _kernels as K
from .core import (
    AdaptiveBerHu,
    AdaptiveElasticNet,
    AdaptiveLasso,
    BerhuError,
    Dataset,
    FitResult,
    Huber,
    InconsistentFitError,
    LeastSquares,
    ModelSpec,
    NoPenalty,
    ParameterError,
    Ridge,
)
from .loss import huber as huber_fn
from .loss import huber_derivative
from .penalty import adaptive_berhu_concomitant, berhu_derivative

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    max_sweeps: int = 10_000
    objective_tol: float = 1e-10
    kkt_tol: float = 1e-6
    s_floor: float = 0.0
    warm_start: Optional[FitResult] = None
    record_trace: bool = True
    accelerate: bool = True

    def __post_init__(self):
        if int(self.max_sweeps) < 1:
            raise ParameterError("max_sweeps must be >= 1")
        if not (self.objective_tol > 0 and self.kkt_tol > 0):
            raise ParameterError("tolerances must be positive")
        if not self.s_floor >= 0:
            raise ParameterError("s_floor must be >= 0")


@dataclass(frozen=True)
class KktReport:
    """Normalized stationarity residuals of a fit.

    ``beta`` holds one residual per coefficient, divided by 1 + lambda * w_j.
    ``tau`` and ``s`` are the residuals of the two scale equations (None when
    the corresponding scale is not part of the model).
    """

    beta: np.ndarray
    alpha: float
    s: Optional[float]
    tau: Optional[float]
    max_residual: float


# ------------------------------------------------------------------ helpers


def _codes(spec: ModelSpec):
    """Kernel codes and constants: (loss, M, pen, lam, lam2, L)."""
    if isinstance(spec.loss, Huber):
        loss, M = K.LOSS_HUBER, float(spec.loss.M)
    elif isinstance(spec.loss, LeastSquares):
        loss, M = K.LOSS_LS, 1.0
    else:
        raise ParameterError(f"unknown loss {spec.loss!r}")
    pen = spec.penalty
    L = 1.0
    lam2 = 0.0
    if isinstance(pen, NoPenalty):
        code, lam = K.PEN_NONE, 0.0
    elif isinstance(pen, Ridge):
        code, lam = K.PEN_RIDGE, float(pen.lam)
    elif isinstance(pen, AdaptiveElasticNet):
        code, lam, lam2 = K.PEN_ENET, float(pen.lam1), float(pen.lam2)
    elif isinstance(pen, AdaptiveLasso):
        code, lam = K.PEN_LASSO, float(pen.lam)
    elif isinstance(pen, AdaptiveBerHu):
        code, lam, L = K.PEN_BERHU, float(pen.lam), float(pen.L)
    else:
        raise ParameterError(f"unknown penalty {pen!r}")
    if lam < 0 or lam2 < 0:
        raise ParameterError("regularization constants must be >= 0")
    return loss, M, code, lam, lam2, L


def objective(data: Dataset, spec: ModelSpec, alpha, beta, s=None, tau=None) -> float:
    """Criterion value at an arbitrary point. For BerHu, ``tau=None`` means
    the penalty is minimized over tau."""
    loss, M, code, lam, lam2, L = _codes(spec)
    beta = np.asarray(beta, dtype=float)
    r = data.y - alpha - data.x @ beta
    if loss == K.LOSS_HUBER:
        if s is None:
            raise ParameterError("Huber objective needs s")
        lv = float(K.huber_concomitant_value(r, M, float(s)))
    else:
        lv = float(r @ r)
    w = spec.weights_for(data.p)
    if code == K.PEN_BERHU and tau is None:
        return lv + lam * adaptive_berhu_concomitant(beta, w, L).value if lam > 0 else lv
    t = 0.0 if tau is None else float(tau)
    return lv + float(K.penalty_value(beta, code, lam, lam2, w, L, t))


def _initial_scale(y: np.ndarray) -> float:
    mad = float(np.median(np.abs(y - np.median(y)))) / 0.6745
    return max(mad, 1e-8 * float(np.std(y)))



# ------------------------------------------------------- absolute-deviation branch
#
# At s = 0 the Huber criterion is 2M sum|r_i|, which is nonsmooth jointly in
# (alpha, beta) wherever several residuals vanish. Coordinate moves can stall
# at such corners, so optimality there is certified (and, if violated, a
# descent direction found) by small linear programs over the joint
# subdifferential.

ZERO_RESIDUAL_TOL = 1e-9


def _zero_tol(r: np.ndarray, y: np.ndarray, rel: float = ZERO_RESIDUAL_TOL) -> float:
    return rel * (1.0 + float(np.max(np.abs(r), initial=0.0)) + float(np.max(np.abs(y), initial=0.0)))


def _in_lad_branch(spec: ModelSpec, s, r, y, rel: float = ZERO_RESIDUAL_TOL) -> bool:
    return isinstance(spec.loss, Huber) and s is not None and spec.loss.M * s <= _zero_tol(r, y, rel)


def _lad_pieces(data: Dataset, spec: ModelSpec, alpha: float, beta: np.ndarray, tau,
                rel: float = ZERO_RESIDUAL_TOL):
    """Directional-derivative data at s = 0 for theta = (alpha, beta):
    F'(theta; d) = G.d + 2M sum_{r_i = 0} |a_i.d| + sum_{kinks} kappa_j |d_j|.
    Returns (G, rows a_i of zero residuals, kink indices into theta, kink
    widths, per-coordinate normalizers)."""
    _, M, code, lam, lam2, L = _codes(spec)
    X, y = data.x, data.y
    n, p = X.shape
    r = y - alpha - X @ beta
    zero = np.abs(r) <= _zero_tol(r, y, rel)
    A = np.hstack([np.ones((n, 1)), X])
    G = -2.0 * M * (A[~zero].T @ np.sign(r[~zero]))
    w = spec.weights_for(p)
    berhu_on = code == K.PEN_BERHU and lam > 0
    kappa = lam * w if code in (K.PEN_LASSO, K.PEN_ENET) or berhu_on else np.zeros(p)
    nz = beta != 0
    pen_grad = np.zeros(p)
    if code == K.PEN_RIDGE:
        pen_grad = 2.0 * lam * beta
    elif code in (K.PEN_LASSO, K.PEN_ENET):
        pen_grad = kappa * np.sign(beta) + (2.0 * lam2 * beta if code == K.PEN_ENET else 0.0)
    elif berhu_on and tau is not None and tau > 0:
        pen_grad[nz] = lam * w[nz] * berhu_derivative(beta[nz] / tau, L)
    G[1:] += pen_grad
    kinks = np.flatnonzero(~nz & (kappa > 0))
    norm = np.concatenate([[1.0], 1.0 + (lam * np.ones(p) if code == K.PEN_RIDGE else kappa)])
    return G, A[zero], kinks + 1, kappa[kinks], norm, M


def _lad_residual(G, AZ, kinks, kw, norm, M):
    """min over subgradient choices of max_k |G + 2M AZ'u + E v|_k / norm_k,
    with the per-coordinate residual vector at the minimizer."""
    m, k, q = AZ.shape[0], kinks.size, G.size
    if m == 0 and k == 0:
        res = np.abs(G) / norm
        return float(res.max()), res
    C = np.zeros((q, m + k))
    C[:, :m] = 2.0 * M * AZ.T
    C[kinks, m + np.arange(k)] = kw
    Cn = C / norm[:, None]
    Gn = G / norm
    A_ub = np.block([[Cn, -np.ones((q, 1))], [-Cn, -np.ones((q, 1))]])
    b_ub = np.concatenate([-Gn, Gn])
    c = np.zeros(m + k + 1)
    c[-1] = 1.0
    bounds = [(-1.0, 1.0)] * (m + k) + [(0.0, None)]
    sol = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if sol.status != 0:
        res = np.abs(Gn)
        return float(res.max()), res
    res = np.abs(Gn + Cn @ sol.x[:-1])
    return float(res.max()), res


def _lad_descent(G, AZ, kinks, kw, M):
    """Steepest descent direction in the unit box and its directional derivative."""
    q, m, k = G.size, AZ.shape[0], kinks.size
    # variables: d (q), e (m) >= |AZ d|, f (k) >= |d_kinks|
    c = np.concatenate([G, 2.0 * M * np.ones(m), kw])
    rows = []
    if m:
        rows.append(np.hstack([AZ, -np.eye(m), np.zeros((m, k))]))
        rows.append(np.hstack([-AZ, -np.eye(m), np.zeros((m, k))]))
    if k:
        E = np.zeros((k, q))
        E[np.arange(k), kinks] = 1.0
        rows.append(np.hstack([E, np.zeros((k, m)), -np.eye(k)]))
        rows.append(np.hstack([-E, np.zeros((k, m)), -np.eye(k)]))
    A_ub = np.vstack(rows) if rows else None
    b_ub = np.zeros(A_ub.shape[0]) if rows else None
    bounds = [(-1.0, 1.0)] * q + [(0.0, None)] * (m + k)
    sol = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if sol.status != 0:
        return None, 0.0
    return sol.x[:q], float(sol.fun)


def _profiled_objective(data: Dataset, spec: ModelSpec, theta: np.ndarray) -> float:
    alpha, beta = float(theta[0]), theta[1:]
    s, _ = K.s_scan(data.y - alpha - data.x @ beta, spec.loss.M)
    return objective(data, spec, alpha, beta, s=s)


def _line_search(phi, f0: float, scale: float):
    """Approximate minimizer of a convex phi on t >= 0 that decreases at 0+."""
    t_prev, t = 0.0, 1e-8 * scale
    f = phi(t)
    if f >= f0:
        return 0.0, f0
    for _ in range(200):
        t_next = 2.0 * t
        f_next = phi(t_next)
        if f_next >= f:
            break
        t_prev, t, f = t, t_next, f_next
    else:
        return t, f
    lo, hi = t_prev, 2.0 * t
    gr = 0.5 * (np.sqrt(5.0) - 1.0)
    x1, x2 = hi - gr * (hi - lo), lo + gr * (hi - lo)
    f1, f2 = phi(x1), phi(x2)
    for _ in range(200):
        if hi - lo <= 1e-14 * (1.0 + hi):
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - gr * (hi - lo)
            f1 = phi(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + gr * (hi - lo)
            f2 = phi(x2)
    cands = [(f, t), (f1, x1), (f2, x2)]
    fbest, tbest = min(cands)
    return tbest, fbest



# ---------------------------------------------------------------------- fit

MAX_CORNER_STEPS = 100


def _run_kernel(data, codes, w, beta, state, cfg, sweeps_left, trace):
    loss, M, kcode, lam, lam2, L = codes
    return K.cd_solve(
        data.x, data.y, loss, M, kcode, lam, lam2, w, L, beta, state,
        float(cfg.s_floor), int(sweeps_left), float(cfg.objective_tol),
        float(cfg.kkt_tol), trace, bool(cfg.accelerate),
    )


def fit(data: Dataset, spec: ModelSpec, cfg: Optional[SolverConfig] = None) -> FitResult:
    """Minimize loss + lambda * penalty by cyclic exact coordinate descent.

    When a Huber fit ends on the s = 0 branch with several zero residuals,
    joint descent steps from a linear program move it off stalled corners and
    the coordinate sweeps resume. Returns a FitResult; ``converged`` is False
    when the KKT residual did not reach tolerance within ``max_sweeps``.
    """
    cfg = cfg or SolverConfig()
    loss, M, code, lam, lam2, L = _codes(spec)
    p = data.p
    w = np.ascontiguousarray(spec.weights_for(p), dtype=float)
    berhu_model = code == K.PEN_BERHU
    kcode = code
    if berhu_model and lam == 0.0:
        kcode = K.PEN_NONE  # penalty vanishes; tau is still reported
    codes = (loss, M, kcode, lam, lam2, L)

    ws = cfg.warm_start
    if ws is not None:
        if ws.beta.shape[0] != p:
            raise ParameterError("warm start has the wrong number of coefficients")
        beta = np.array(ws.beta, dtype=float)
        alpha = float(ws.alpha)
        s0 = ws.s if ws.s is not None else _initial_scale(data.y)
    else:
        beta = np.zeros(p)
        alpha = float(np.mean(data.y))
        s0 = _initial_scale(data.y)
    if loss == K.LOSS_LS:
        s0 = 0.0
    else:
        s0 = max(float(s0), cfg.s_floor)
    state = np.array([alpha, s0, 0.0])
    max_sweeps = int(cfg.max_sweeps)
    trace = np.full(max_sweeps, np.nan)
    sweeps, status, kkt, monotone = _run_kernel(data, codes, w, beta, state, cfg, max_sweeps, trace)

    corner_steps = 0
    if loss == K.LOSS_HUBER and cfg.s_floor == 0.0:
        while corner_steps < MAX_CORNER_STEPS:
            r = data.y - state[0] - data.x @ beta
            if not _in_lad_branch(spec, state[1], r, data.y) or (berhu_model and lam > 0 and state[2] == 0.0):
                break
            tau_now = state[2] if berhu_model and lam > 0 else None
            G, AZ, kinks, kw, _, _ = _lad_pieces(data, spec, state[0], beta, tau_now)
            d, slope = _lad_descent(G, AZ, kinks, kw, M)
            theta = np.concatenate([[state[0]], beta])
            f0 = _profiled_objective(data, spec, theta)
            if d is None or slope >= -1e-12 * (1.0 + abs(f0)):
                break
            t, f = _line_search(lambda t: _profiled_objective(data, spec, theta + t * d), f0,
                                1.0 + float(np.max(np.abs(theta))))
            if not t > 0 or f >= f0:
                break
            corner_steps += 1
            theta = theta + t * d
            beta[:] = theta[1:]
            state[0] = theta[0]
            state[1] = K.s_scan(data.y - theta[0] - data.x @ beta, M)[0]
            if sweeps >= max_sweeps:
                status = K.STATUS_MAX_SWEEPS
                break
            more = np.full(max_sweeps - sweeps, np.nan)
            k_sw, status, kkt, mono = _run_kernel(data, codes, w, beta, state, cfg,
                                                  max_sweeps - sweeps, more)
            if trace[sweeps - 1] < more[0] - 1e-11 * (1.0 + abs(more[0])):
                monotone = False
            trace[sweeps:sweeps + k_sw] = more[:k_sw]
            sweeps += k_sw
            monotone = monotone and mono

    alpha, s, tau = float(state[0]), float(state[1]), float(state[2])
    if berhu_model and kcode == K.PEN_NONE:
        tau = adaptive_berhu_concomitant(beta, w, L).tau_hat
    obj = objective(data, spec, alpha, beta, s if loss == K.LOSS_HUBER else None,
                    tau if berhu_model else None)
    converged = status == K.STATUS_CONVERGED
    result = FitResult(
        alpha=alpha,
        beta=beta,
        s=s if loss == K.LOSS_HUBER else None,
        tau=tau if berhu_model else None,
        objective=obj,
        sweeps=int(sweeps),
        kkt_residual=float(kkt),
        converged=converged,
        trace=trace[:sweeps].copy() if cfg.record_trace else None,
        monotone=bool(monotone),
    )
    if loss == K.LOSS_HUBER and _in_lad_branch(spec, s, data.y - alpha - data.x @ beta, data.y):
        # the kernel's coordinate-wise test is only necessary here; certify jointly
        kkt = max(kkt, kkt_check(data, spec, result, s_floor=cfg.s_floor).max_residual)
        converged = converged and kkt <= cfg.kkt_tol
        result = replace(result, kkt_residual=float(kkt), converged=converged)
    if not converged:
        log.warning("solver stopped after %d sweeps with KKT residual %.3g", sweeps, kkt)
    return result


def fit_unpenalized(data: Dataset, loss=None, cfg: Optional[SolverConfig] = None) -> FitResult:
    """Least squares in closed form, or the lambda = 0 Huber fit started from it.

    A rank-deficient design gives the minimum-norm least-squares solution and
    sets ``rank_deficient``.
    """
    loss = loss if loss is not None else LeastSquares()
    y = data.y
    alpha = float(np.mean(y))
    beta, _, rank, _ = np.linalg.lstsq(data.x, y - alpha, rcond=None)
    deficient = bool(rank < data.p)
    if deficient:
        log.warning("design has rank %d < %d columns; minimum-norm solution used", rank, data.p)
    spec = ModelSpec(loss, NoPenalty())
    if isinstance(loss, LeastSquares):
        r = y - alpha - data.x @ beta
        g = data.x.T @ r * 2.0
        res = float(np.max(np.abs(g), initial=abs(2.0 * r.sum())))
        return FitResult(alpha, beta, None, None, float(r @ r), 0, res, True,
                         rank_deficient=deficient)
    cfg = cfg or SolverConfig()
    warm = FitResult(alpha, beta, None, None, np.nan, 0, np.nan, False)
    out = fit(data, spec, replace(cfg, warm_start=warm))
    return replace(out, rank_deficient=deficient)


def fit_path(data: Dataset, spec: ModelSpec, grid: Sequence[float],
             cfg: Optional[SolverConfig] = None) -> list:
    """Fit every lambda in ``grid``, warm-starting from the neighbouring larger
    lambda. Returns results in grid order; a grid point whose fit raised is
    reported as None."""
    cfg = cfg or SolverConfig()
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise ParameterError("empty lambda grid")
    out: list = [None] * grid.size
    warm = cfg.warm_start
    for idx in np.argsort(-grid, kind="stable"):
        try:
            res = fit(data, spec.with_lambda(float(grid[idx])), replace(cfg, warm_start=warm))
        except BerhuError as exc:
            log.warning("fit failed at lambda=%g: %s", grid[idx], exc)
            continue
        out[idx] = res
        warm = res
    return out


# ---------------------------------------------------------------------- KKT


def kkt_check(data: Dataset, spec: ModelSpec, fit_result: FitResult,
              zero_tol: float = 1e-9, s_floor: float = 0.0) -> KktReport:
    """Evaluate the stationarity conditions of a fit directly.

    Zero coefficients are checked by subdifferential inclusion. With s = 0 the
    loss is 2M sum|r_i|; residuals within ``zero_tol`` (relative) of zero then
    contribute their subgradient intervals, and a linear program looks for a
    single choice from those intervals that satisfies every coordinate.
    """
    loss, M, code, lam, lam2, L = _codes(spec)
    X, y = data.x, data.y
    n, p = X.shape
    w = spec.weights_for(p)
    beta = np.asarray(fit_result.beta, dtype=float)
    alpha = float(fit_result.alpha)
    r = y - alpha - X @ beta
    is_berhu = code == K.PEN_BERHU and lam > 0
    tau = fit_result.tau
    if is_berhu:
        if tau is None or tau < 0:
            raise InconsistentFitError("BerHu fit without a valid tau")
        if tau == 0 and np.any(beta != 0):
            raise InconsistentFitError("tau = 0 with nonzero coefficients")

    # psi = -d loss / d fitted value, slack = half-width of its subgradient
    slack = np.zeros(n)
    s_res = None
    lad = False
    if loss == K.LOSS_LS:
        psi = 2.0 * r
    else:
        s = float(fit_result.s)
        lad = _in_lad_branch(spec, s, r, y, zero_tol)
        if not lad:
            z = r / s
            psi = huber_derivative(z, M)
            score = n + float(np.sum(huber_fn(z, M) - z * huber_derivative(z, M)))
            if s_floor > 0 and s <= s_floor:
                score = min(score, 0.0)
            s_res = abs(score) / n
        else:
            zero = np.abs(r) <= _zero_tol(r, y, zero_tol)
            psi = np.where(zero, 0.0, 2.0 * M * np.sign(r))
            slack = np.where(zero, 2.0 * M, 0.0)
            s_res = max(0.0, M * M * int(np.sum(~zero)) - n) / n
    g = X.T @ psi
    gslack = np.abs(X).T @ slack
    a_res = max(0.0, abs(float(psi.sum())) - float(slack.sum()))

    kappa = np.zeros(p)
    smooth = np.zeros(p)
    tau_res = None
    if code in (K.PEN_LASSO, K.PEN_ENET) or is_berhu:
        kappa = lam * w
    if code == K.PEN_RIDGE:
        smooth = 2.0 * lam * beta
    elif code == K.PEN_ENET:
        smooth = 2.0 * lam2 * beta
    elif is_berhu and tau > 0:
        nz = beta != 0
        smooth = np.zeros(p)
        smooth[nz] = lam * w[nz] * (berhu_derivative(beta[nz] / tau, L) - np.sign(beta[nz]))
        z = np.abs(beta) / tau
        extra = np.where(z > L, (L * L - z * z) / (2.0 * L), 0.0)
        tau_res = lam * abs(float(np.sum(1.0 / w) + np.sum(w * extra))) / (1.0 + lam * float(np.sum(1.0 / w)))

    if is_berhu and tau == 0:
        # beta = 0, tau = 0: optimal iff no ray (t d, t) decreases the objective
        v = np.abs(g) / (lam * w)
        gain = np.sum(lam * w * 0.5 * L * np.clip(v * v - 1.0, 0.0, None))
        ssum = float(np.sum(1.0 / w))
        tau_res = max(0.0, float(gain) - lam * ssum) / (1.0 + lam * ssum)
        b_res = np.zeros(p)  # covered by the joint ray condition above
    else:
        target = smooth + kappa * np.sign(beta)
        lo, hi = g - gslack, g + gslack
        nz = beta != 0
        b_res = np.where(
            nz,
            np.maximum(0.0, np.maximum(lo - target, target - hi)),
            np.maximum(0.0, np.maximum(lo - kappa, -kappa - hi)),
        )
    norm = 1.0 + (lam * w if code != K.PEN_RIDGE else lam)
    b_res = b_res / norm
    if lad and not (is_berhu and tau == 0):
        # joint test: one subgradient choice must serve every coordinate
        G, AZ, kinks, kw, lnorm, _ = _lad_pieces(data, spec, alpha, beta, tau, zero_tol)
        _, res = _lad_residual(G, AZ, kinks, kw, lnorm, M)
        a_res, b_res = float(res[0]), res[1:]
    parts = [float(np.max(b_res, initial=0.0)), a_res]
    if s_res is not None:
        parts.append(s_res)
    if tau_res is not None:
        parts.append(tau_res)
    return KktReport(b_res, a_res, s_res, tau_res if is_berhu else None, max(parts))

