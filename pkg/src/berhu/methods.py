"""Named estimation methods (loss x penalty x tuning rule) shared by the
simulation study, the real-data study and the command line."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    AdaptiveBerHu,
    AdaptiveElasticNet,
    AdaptiveLasso,
    Dataset,
    FitResult,
    Huber,
    LeastSquares,
    ModelSpec,
    NoPenalty,
    ParameterError,
    Ridge,
)
from .solver import SolverConfig, fit, fit_unpenalized
from .tuning import ENET_LAMBDA2, DEFAULT_GRIDS, TuningPlan, adaptive_weights, make_grid, select


@dataclass(frozen=True)
class Method:
    name: str
    huber: bool
    penalty: str  # none | lasso | ridge | enet | berhu

    @property
    def selects(self) -> bool:
        """Whether the method produces sparse fits worth scoring for selection."""
        return self.penalty in ("lasso", "enet", "berhu")

    @property
    def adaptive(self) -> bool:
        return self.penalty in ("lasso", "enet", "berhu")


METHODS = {
    m.name: m
    for m in (
        Method("OLS", False, "none"),
        Method("Huber", True, "none"),
        Method("ad-lasso", False, "lasso"),
        Method("ridge", False, "ridge"),
        Method("ad-en", False, "enet"),
        Method("ad-Berhu", False, "berhu"),
        Method("Huber-ad-lasso", True, "lasso"),
        Method("Huber-ridge", True, "ridge"),
        Method("Huber-ad-en", True, "enet"),
        Method("Huber-ad-Berhu", True, "berhu"),
    )
}
METHOD_ORDER = tuple(METHODS)
PENALIZED_METHODS = METHOD_ORDER[2:]


def get_method(name: str) -> Method:
    try:
        return METHODS[name]
    except KeyError:
        raise ParameterError(
            f"unknown method {name!r}; choose from {', '.join(METHOD_ORDER)}"
        ) from None


def parse_methods(text: str) -> list:
    names = [t.strip() for t in text.split(",") if t.strip()]
    if not names:
        raise ParameterError("no methods given")
    for n in names:
        get_method(n)
    if len(set(names)) != len(names):
        raise ParameterError("duplicate method names")
    return names


@dataclass(frozen=True)
class MethodSettings:
    """Constants shared by every method of a run. ``grid_max``/``grid_points``
    override the primary lambda grid of every penalized method."""

    huber_m: float = 1.345
    berhu_l: float = 1.345
    gamma: float = 1.0
    grid_max: Optional[float] = None
    grid_points: Optional[int] = None
    folds: int = 5
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if not (self.huber_m > 0 and self.berhu_l > 0 and self.gamma > 0):
            raise ParameterError("M, L and gamma must be > 0")
        if self.grid_max is not None and not self.grid_max > 0:
            raise ParameterError("grid maximum must be > 0")
        if self.grid_points is not None and int(self.grid_points) < 2:
            raise ParameterError("grid needs at least 2 points")

    def as_dict(self) -> dict:
        return {
            "huber_m": self.huber_m,
            "berhu_l": self.berhu_l,
            "gamma": self.gamma,
            "grid_max": self.grid_max,
            "grid_points": self.grid_points,
            "folds": self.folds,
            "max_sweeps": self.solver.max_sweeps,
            "objective_tol": self.solver.objective_tol,
            "kkt_tol": self.solver.kkt_tol,
        }


def tuning_plan(method: Method, settings: MethodSettings) -> TuningPlan:
    count, hi = DEFAULT_GRIDS[method.penalty]
    count = int(settings.grid_points or count)
    hi = float(settings.grid_max or hi)
    grid = make_grid(count, hi)
    if method.penalty in ("lasso", "berhu"):
        return TuningPlan(grid, "bic")
    if method.penalty == "ridge":
        return TuningPlan(grid, "cv", folds=settings.folds)
    return TuningPlan(grid, "cv", grid2=np.array(ENET_LAMBDA2), folds=settings.folds)


def model_spec(method: Method, settings: MethodSettings, weights=None,
               lam: float = 0.0, lam2: float = 0.0) -> ModelSpec:
    loss = Huber(settings.huber_m) if method.huber else LeastSquares()
    if method.penalty == "none":
        pen = NoPenalty()
    elif method.penalty == "ridge":
        pen = Ridge(lam)
    elif method.penalty == "lasso":
        pen = AdaptiveLasso(lam, weights)
    elif method.penalty == "enet":
        pen = AdaptiveElasticNet(lam, lam2, weights)
    else:
        pen = AdaptiveBerHu(lam, settings.berhu_l, weights)
    return ModelSpec(loss, pen)


@dataclass(frozen=True)
class MethodOutcome:
    method: str
    fit: FitResult
    lam: Optional[float]
    lam2: Optional[float]
    weights: Optional[np.ndarray]
    spec: ModelSpec


class PilotCache:
    """Unpenalized fits per loss, computed once per dataset."""

    def __init__(self, data: Dataset, settings: MethodSettings):
        self.data = data
        self.settings = settings
        self._fits = {}

    def get(self, huber: bool) -> FitResult:
        if huber not in self._fits:
            loss = Huber(self.settings.huber_m) if huber else LeastSquares()
            self._fits[huber] = fit_unpenalized(self.data, loss, self.settings.solver)
        return self._fits[huber]


def run_method(name: str, data: Dataset, settings: MethodSettings,
               rng: Optional[np.random.Generator] = None,
               pilots: Optional[PilotCache] = None,
               lam: Optional[float] = None, lam2: Optional[float] = None) -> MethodOutcome:
    """Fit one named method. Adaptive weights come from the unpenalized
    estimator with the same loss. With ``lam`` given the tuning step is
    skipped."""
    method = get_method(name)
    pilots = pilots or PilotCache(data, settings)
    if method.penalty == "none":
        res = pilots.get(method.huber)
        return MethodOutcome(name, res, None, None, None, model_spec(method, settings))
    weights = None
    if method.adaptive:
        weights = adaptive_weights(pilots.get(method.huber).beta, settings.gamma)
    if lam is not None:
        l2 = lam2 if lam2 is not None else 0.0
        spec = model_spec(method, settings, weights, lam, l2)
        res = fit(data, spec, settings.solver)
        return MethodOutcome(name, res, float(lam), l2 if method.penalty == "enet" else None,
                             weights, spec)
    plan = tuning_plan(method, settings)
    spec = model_spec(method, settings, weights)
    sel = select(data, spec, plan, rng, settings.solver)
    final_spec = model_spec(method, settings, weights, sel.lam, sel.lam2 or 0.0)
    return MethodOutcome(name, sel.fit, sel.lam, sel.lam2, weights, final_spec)
