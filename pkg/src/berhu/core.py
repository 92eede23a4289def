"""Domain types shared by every module: datasets, model specifications, fit
results and seeded random streams."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np


class BerhuError(Exception):
    """Base class for errors raised by this package."""


class InvalidDataError(BerhuError, ValueError):
    pass


class ParameterError(BerhuError, ValueError):
    pass


class ShapeError(BerhuError, ValueError):
    pass


class InconsistentFitError(BerhuError, ValueError):
    pass


def _as_matrix(raw) -> np.ndarray:
    x = np.asarray(raw, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-d matrix, got shape {x.shape}")
    return x


def center_columns(raw) -> tuple[np.ndarray, np.ndarray]:
    """Remove the column means of ``raw``.

    Returns the centered matrix and the vector of means, which ``predict``
    needs to place new rows in the same coordinates.
    """
    x = _as_matrix(raw)
    if x.shape[0] < 1:
        raise InvalidDataError("at least one row is required")
    if not np.all(np.isfinite(x)):
        raise InvalidDataError("matrix contains non-finite entries")
    means = x.mean(axis=0)
    xc = x - means
    # second pass removes the rounding left by the first subtraction
    drift = xc.mean(axis=0)
    return xc - drift, means + drift


@dataclass(frozen=True)
class Dataset:
    """Centered design ``x`` (n x p), response ``y`` and optional labels."""

    x: np.ndarray
    y: np.ndarray
    names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        x = _as_matrix(self.x)
        y = np.asarray(self.y, dtype=float).ravel()
        n, p = x.shape
        if n < 1 or p < 1:
            raise InvalidDataError(f"need n >= 1 and p >= 1, got {x.shape}")
        if y.shape[0] != n:
            raise ShapeError(f"y has {y.shape[0]} entries, x has {n} rows")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidDataError("non-finite entries in x or y")
        scale = max(float(np.max(np.abs(x))), 1.0)
        if np.any(np.abs(x.sum(axis=0)) > 1e-9 * n * scale):
            raise InvalidDataError("columns of x must be centered; use Dataset.from_raw")
        names = self.names
        if names is not None:
            names = tuple(str(v) for v in names)
            if len(names) != p:
                raise ShapeError(f"{len(names)} names for {p} columns")
        object.__setattr__(self, "x", np.asfortranarray(x))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "names", names)

    @classmethod
    def from_raw(cls, x, y, names: Optional[Sequence[str]] = None) -> tuple["Dataset", np.ndarray]:
        """Center ``x`` and build a dataset; also returns the column means."""
        xc, means = center_columns(x)
        return cls(xc, y, None if names is None else tuple(names)), means

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


# ---------------------------------------------------------------- model spec


@dataclass(frozen=True)
class LeastSquares:
    pass


@dataclass(frozen=True)
class Huber:
    M: float = 1.345

    def __post_init__(self):
        if not (np.isfinite(self.M) and self.M > 0):
            raise ParameterError(f"Huber threshold M must be positive, got {self.M}")


Loss = Union[LeastSquares, Huber]


def _check_lambda(name, value):
    if not (np.isfinite(value) and value >= 0):
        raise ParameterError(f"{name} must be finite and >= 0, got {value}")


def _check_weights(weights) -> Optional[np.ndarray]:
    if weights is None:
        return None
    w = np.asarray(weights, dtype=float).ravel()
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ParameterError("weights must be strictly positive and finite")
    w.setflags(write=False)
    return w


@dataclass(frozen=True)
class NoPenalty:
    lam: float = 0.0


@dataclass(frozen=True)
class Ridge:
    lam: float

    def __post_init__(self):
        _check_lambda("lam", self.lam)


@dataclass(frozen=True)
class AdaptiveLasso:
    lam: float
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        _check_lambda("lam", self.lam)
        object.__setattr__(self, "weights", _check_weights(self.weights))


@dataclass(frozen=True)
class AdaptiveElasticNet:
    """Weighted l1 plus unweighted squared l2: lam1 * sum w|b| + lam2 * sum b^2."""

    lam1: float
    lam2: float
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        _check_lambda("lam1", self.lam1)
        _check_lambda("lam2", self.lam2)
        object.__setattr__(self, "weights", _check_weights(self.weights))

    @property
    def lam(self) -> float:
        return self.lam1


@dataclass(frozen=True)
class AdaptiveBerHu:
    lam: float
    L: float = 1.345
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        _check_lambda("lam", self.lam)
        if not (np.isfinite(self.L) and self.L > 0):
            raise ParameterError(f"BerHu shape L must be positive, got {self.L}")
        object.__setattr__(self, "weights", _check_weights(self.weights))


Penalty = Union[NoPenalty, Ridge, AdaptiveLasso, AdaptiveElasticNet, AdaptiveBerHu]


@dataclass(frozen=True)
class ModelSpec:
    loss: Loss = field(default_factory=LeastSquares)
    penalty: Penalty = field(default_factory=NoPenalty)

    def weights_for(self, p: int) -> np.ndarray:
        """Penalty weights, defaulting to ones; validates the length."""
        w = getattr(self.penalty, "weights", None)
        if w is None:
            return np.ones(p)
        if w.shape[0] != p:
            raise ShapeError(f"{w.shape[0]} weights for {p} coefficients")
        return np.asarray(w, dtype=float)

    def with_lambda(self, lam: float) -> "ModelSpec":
        """Copy with the primary regularization constant replaced."""
        pen = self.penalty
        if isinstance(pen, AdaptiveElasticNet):
            pen = AdaptiveElasticNet(lam, pen.lam2, pen.weights)
        elif isinstance(pen, AdaptiveBerHu):
            pen = AdaptiveBerHu(lam, pen.L, pen.weights)
        elif isinstance(pen, AdaptiveLasso):
            pen = AdaptiveLasso(lam, pen.weights)
        elif isinstance(pen, Ridge):
            pen = Ridge(lam)
        elif lam != 0:
            raise ParameterError("cannot set a nonzero lambda without a penalty")
        return ModelSpec(self.loss, pen)

    @property
    def is_huber(self) -> bool:
        return isinstance(self.loss, Huber)

    @property
    def is_berhu(self) -> bool:
        return isinstance(self.penalty, AdaptiveBerHu)


@dataclass(frozen=True)
class FitResult:
    alpha: float
    beta: np.ndarray
    s: Optional[float]
    tau: Optional[float]
    objective: float
    sweeps: int
    kkt_residual: float
    converged: bool
    trace: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    monotone: bool = True
    rank_deficient: bool = False


def predict(fit: FitResult, x_new, column_means) -> np.ndarray:
    """alpha + (x_new - means) @ beta."""
    x = _as_matrix(x_new)
    means = np.asarray(column_means, dtype=float).ravel()
    beta = np.asarray(fit.beta, dtype=float)
    if x.shape[1] != beta.shape[0] or means.shape[0] != beta.shape[0]:
        raise ShapeError(
            f"x_new has {x.shape[1]} columns, fit has {beta.shape[0]} coefficients "
            f"and {means.shape[0]} means"
        )
    return fit.alpha + (x - means) @ beta


# ---------------------------------------------------------------- randomness


@dataclass(frozen=True)
class RngStream:
    """Seeded stream; the same (seed, stream_id) always yields the same draws."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = int(getattr(self, name))
            if not 0 <= v < 2**64:
                raise ParameterError(f"{name} must be a 64-bit unsigned integer")
            object.__setattr__(self, name, v)

    def generator(self, *sub: int) -> np.random.Generator:
        """Generator for this stream; ``sub`` selects independent sub-streams."""
        key = (self.stream_id,) + tuple(int(v) for v in sub)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=key)
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)
