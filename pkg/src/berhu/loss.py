"""Loss functions: Huber's function, the Huber criterion with concomitant
scale s, and least squares."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .core import InvalidDataError, ParameterError


def _check_M(M):
    if not (np.isfinite(M) and M > 0):
        raise ParameterError(f"M must be positive, got {M}")


def huber(z, M):
    """z^2 for |z| <= M, 2M|z| - M^2 beyond. Accepts scalars or arrays."""
    _check_M(M)
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    out = np.where(a <= M, z * z, 2.0 * M * a - M * M)
    return out[()] if out.ndim == 0 else out


def huber_derivative(z, M):
    """H'(z) = 2 * clip(z, -M, M)."""
    _check_M(M)
    out = 2.0 * np.clip(np.asarray(z, dtype=float), -M, M)
    return out[()] if out.ndim == 0 else out


def huber_variational_gap(z, M):
    """|min_v ((z - v)^2 + 2M|v|) - huber(z, M)| using the soft-threshold
    minimizer v = sign(z) * max(|z| - M, 0)."""
    _check_M(M)
    z = np.asarray(z, dtype=float)
    v = np.sign(z) * np.maximum(np.abs(z) - M, 0.0)
    rhs = (z - v) ** 2 + 2.0 * M * np.abs(v)
    out = np.abs(rhs - huber(z, M))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class LossEvaluation:
    """Criterion value at given residuals; for Huber, minimized over s.

    ``small_set`` are the residuals on the quadratic part (|r_i| <= M s). At
    s = 0 every nonzero residual is on the linear part.
    """

    value: float
    s_hat: Optional[float]
    residuals: np.ndarray
    small_set: tuple
    large_set: tuple


def _residuals(residuals):
    r = np.asarray(residuals, dtype=float).ravel()
    if r.shape[0] == 0:
        raise InvalidDataError("empty residual vector")
    if not np.all(np.isfinite(r)):
        raise InvalidDataError("non-finite residuals")
    return r


def huber_criterion(residuals, M: float, s: float) -> float:
    """n s + s sum H_M(r_i / s) for s > 0 and 2M sum |r_i| for s = 0."""
    _check_M(M)
    r = _residuals(residuals)
    if s < 0:
        raise ParameterError("s must be >= 0")
    return float(K.huber_concomitant_value(r, float(M), float(s)))


def huber_concomitant(residuals, M: float = 1.345) -> LossEvaluation:
    """Minimize the Huber criterion over the scale s >= 0 by an exact scan of
    the breakpoints |r_i| / M."""
    _check_M(M)
    r = _residuals(residuals)
    s, value = K.s_scan(r, float(M))
    a = np.abs(r)
    if s > 0:
        small = np.flatnonzero(a <= M * s)
        large = np.flatnonzero(a > M * s)
    else:
        small = np.flatnonzero(a == 0)
        large = np.flatnonzero(a > 0)
    return LossEvaluation(
        float(value), float(s), r.copy(),
        tuple(int(i) for i in small), tuple(int(i) for i in large),
    )


def least_squares(residuals) -> float:
    r = np.asarray(residuals, dtype=float).ravel()
    return float(np.dot(r, r))


def least_squares_evaluation(residuals) -> LossEvaluation:
    r = _residuals(residuals)
    return LossEvaluation(least_squares(r), None, r.copy(), tuple(range(r.shape[0])), ())
