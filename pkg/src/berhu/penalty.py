"""Penalty functions: BerHu, the adaptive BerHu penalty with its concomitant
scale tau, and the comparison penalties (ridge, adaptive lasso, adaptive
elastic net)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .core import ParameterError

BOUNDARY_TOL = 1e-12


def _check_L(L):
    if not (np.isfinite(L) and L > 0):
        raise ParameterError(f"L must be positive, got {L}")


def berhu(z, L):
    """Reverse Huber function: |z| inside [-L, L], (z^2 + L^2) / (2L) outside.

    Accepts scalars or arrays.
    """
    _check_L(L)
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    out = np.where(a <= L, a, (z * z + L * L) / (2.0 * L))
    return out[()] if out.ndim == 0 else out


def berhu_derivative(z, L):
    """Derivative of ``berhu`` away from the kink at zero."""
    _check_L(L)
    z = np.asarray(z, dtype=float)
    if np.any(z == 0):
        raise ParameterError("berhu is not differentiable at 0; use the subdifferential [-1, 1]")
    out = np.where(np.abs(z) <= L, np.sign(z), z / L)
    return out[()] if out.ndim == 0 else out


def berhu_variational_gap(z, L):
    """|min_{w >= max(L, |z|)} (w^2/(2L) - w + |z| + L/2) - berhu(z, L)|.

    The inner minimum is attained at w = max(L, |z|).
    """
    _check_L(L)
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    w = np.maximum(L, a)
    rhs = w * w / (2.0 * L) - w + a + 0.5 * L
    out = np.abs(rhs - berhu(z, L))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class PenaltyProfile:
    """Adaptive BerHu penalty minimized over its scale tau.

    ``quad_set`` holds the coefficients on the quadratic branch
    (|beta_j| >= L * tau_hat, boundary included), ``linear_set`` the remaining
    nonzero ones. ``q`` is one plus the size of ``quad_set``; it is only
    defined for equal weights and nonzero beta.
    """

    value: float
    tau_hat: float
    q: Optional[int]
    quad_set: tuple
    linear_set: tuple


def _weights(weights, p):
    if weights is None:
        return np.ones(p)
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != p:
        raise ParameterError(f"{w.shape[0]} weights for {p} coefficients")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ParameterError("weights must be strictly positive and finite")
    return w


def adaptive_berhu_concomitant(beta, weights=None, L: float = 1.345) -> PenaltyProfile:
    """min over tau >= 0 of tau * (sum 1/w_j + sum w_j * berhu(beta_j / tau, L)).

    Solved exactly by scanning the breakpoints |beta_j| / L; on each interval
    the stationarity equation has a closed-form root.
    """
    _check_L(L)
    b = np.asarray(beta, dtype=float).ravel()
    w = _weights(weights, b.shape[0])
    absb = np.abs(b)
    tau, value = K.tau_scan(absb, w, float(L))
    if tau == 0.0:
        return PenaltyProfile(0.0, 0.0, None, (), ())
    thr = L * tau
    quad = tuple(int(j) for j in np.flatnonzero(absb >= thr - BOUNDARY_TOL * max(1.0, thr)))
    qs = set(quad)
    lin = tuple(int(j) for j in np.flatnonzero(absb > 0) if j not in qs)
    q = len(quad) + 1 if np.all(w == w[0]) else None
    return PenaltyProfile(float(value), float(tau), q, quad, lin)


def adaptive_berhu_value(beta, tau, weights=None, L: float = 1.345) -> float:
    """P(beta, tau) at a given tau, with the tau = 0 case split (0 or +inf)."""
    _check_L(L)
    b = np.asarray(beta, dtype=float).ravel()
    w = _weights(weights, b.shape[0])
    if tau < 0:
        raise ParameterError("tau must be >= 0")
    if tau == 0:
        return 0.0 if not np.any(b) else float("inf")
    return float(tau * (np.sum(1.0 / w) + np.sum(w * berhu(b / tau, L))))


def tau_stationarity_residual(beta, tau, weights=None, L: float = 1.345) -> float:
    """sum 1/w_j + sum w_j [B(z_j) - z_j B'(z_j)] with z_j = beta_j / tau.

    Vanishes at the optimal tau > 0. B(z) - z B'(z) is zero on the linear
    branch (including z = 0) and (L^2 - z^2) / (2L) beyond L.
    """
    b = np.asarray(beta, dtype=float).ravel()
    w = _weights(weights, b.shape[0])
    if not tau > 0:
        raise ParameterError("tau must be > 0")
    z = np.abs(b) / tau
    extra = np.where(z > L, (L * L - z * z) / (2.0 * L), 0.0)
    return float(np.sum(1.0 / w) + np.sum(w * extra))


def pen_closed_form(beta, L: float = 1.345) -> float:
    """Unit-weight concomitant BerHu value via the sorted-coefficient formula

        sqrt(2p/L + q - 1) * ||beta_(1..q-1)||_2 + sum_{j >= q} |beta_(j)|,

    where beta_(j) are sorted by decreasing magnitude and q is the unique
    count consistent with |beta_(q)| / L <= tau <= |beta_(q-1)| / L.
    Independent of ``adaptive_berhu_concomitant``; used to cross-check it.
    """
    _check_L(L)
    a = np.sort(np.abs(np.asarray(beta, dtype=float).ravel()))[::-1]
    p = a.shape[0]
    if not np.any(a):
        return 0.0
    best_value = 0.0
    best_violation = np.inf
    head2 = 0.0
    nnz = int(np.count_nonzero(a))
    for k in range(1, nnz + 1):  # k = q - 1 coefficients on the quadratic branch
        head2 += a[k - 1] ** 2
        c = np.sqrt(2.0 * p / L + k)
        tau = np.sqrt(head2) / (L * c)
        upper = a[k - 1] / L
        lower = a[k] / L if k < p else 0.0
        value = c * np.sqrt(head2) + float(np.sum(a[k:]))
        violation = max(lower - tau, tau - upper, 0.0) / upper
        if violation < best_violation:
            best_value, best_violation = value, violation
        if violation == 0.0:
            break
    return float(best_value)


def berhu_prox(v: float, step: float, weight: float, L: float, tau: float) -> float:
    """argmin_b (b - v)^2 / 2 + step * weight * tau * berhu(b / tau, L)."""
    for name, val in (("step", step), ("weight", weight), ("L", L), ("tau", tau)):
        if not val > 0:
            raise ParameterError(f"{name} must be > 0, got {val}")
    return float(K.berhu_prox(float(v), float(step), float(weight), float(L), float(tau)))


def ridge_value(beta, lam: float) -> float:
    b = np.asarray(beta, dtype=float)
    return float(lam * np.dot(b, b))


def lasso_value(beta, lam: float, weights=None) -> float:
    b = np.asarray(beta, dtype=float).ravel()
    w = _weights(weights, b.shape[0])
    return float(lam * np.sum(w * np.abs(b)))


def enet_value(beta, lam1: float, lam2: float, weights=None) -> float:
    """lam1 * sum w|b| + lam2 * sum b^2 (weights on the l1 part only)."""
    b = np.asarray(beta, dtype=float).ravel()
    return lasso_value(b, lam1, weights) + ridge_value(b, lam2)
