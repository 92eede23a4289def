"""Self-checks against independent oracles.

Each suite draws its cases from a seeded generator, compares a fast
implementation with a slow reference computation and reports the worst
observed discrepancy next to its limit:

- ``variational``: both variational forms reproduce the Huber and BerHu
  functions on a dense grid;
- ``tau``: the breakpoint scan for the penalty scale against a dense-grid
  search, the stationarity equation and the unit-weight closed form;
- ``s``: the breakpoint scan for the loss scale against a dense-grid search;
- ``bruteforce``: the solver against refined exhaustive search on tiny
  problems, with KKT residuals and per-sweep monotonicity;
- ``grouping``: the grouping bound on every nonzero pair of tuned
  least-squares BerHu fits, and near-equality for a duplicated column.

``fault="tau"`` perturbs every scanned tau by a relative 1e-3 before the
comparison; the tau suite must then fail.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    AdaptiveBerHu,
    AdaptiveLasso,
    Dataset,
    Huber,
    LeastSquares,
    ModelSpec,
    ParameterError,
    RngStream,
    center_columns,
)
from .diagnostics import grouping_sweep, summarize_grouping
from .loss import huber_concomitant, huber_variational_gap
from .methods import MethodSettings, run_method
from .oracles import brute_force_minimum, grid_s, grid_tau
from .penalty import adaptive_berhu_concomitant, berhu_variational_gap, pen_closed_form
from .simulation import generate_design, generate_response, get_model
from .solver import SolverConfig, fit, kkt_check

SUITE_NAMES = ("variational", "tau", "s", "bruteforce", "grouping")
FAULTS = ("tau",)
TAU_FAULT = 1e-3


@dataclass(frozen=True)
class CheckConfig:
    seed: int = 0
    variational_points: int = 100_000
    tau_cases: int = 1000
    s_cases: int = 1000
    brute_instances: int = 50
    grouping_fits: int = 20
    fault: Optional[str] = None

    def __post_init__(self):
        if self.fault is not None and self.fault not in FAULTS:
            raise ParameterError(f"unknown fault {self.fault!r}; choose from {', '.join(FAULTS)}")
        for name in ("variational_points", "tau_cases", "s_cases", "brute_instances", "grouping_fits"):
            if int(getattr(self, name)) < 1:
                raise ParameterError(f"{name} must be >= 1")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class SuiteResult:
    name: str
    cases: int
    worst: dict
    limits: dict
    failures: list = field(default_factory=list)
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures and all(
            self.worst[k] is not None and self.worst[k] <= self.limits[k] for k in self.limits)

    def line(self) -> str:
        parts = ", ".join(f"{k}={self.worst[k]:.3g} (<= {self.limits[k]:g})"
                          for k in self.limits if self.worst[k] is not None)
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.cases} cases; {parts}"

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "cases": self.cases,
            "worst": self.worst,
            "limits": self.limits,
            "failures": self.failures[:20],
        }


def _rel(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(b), np.finfo(float).tiny)


# ------------------------------------------------------------------ suites


def check_variational(cfg: CheckConfig) -> SuiteResult:
    z = np.linspace(-50.0, 50.0, cfg.variational_points)
    worst_h = worst_b = 0.0
    for c in (0.5, 1.0, 1.345, 3.0):
        worst_h = max(worst_h, float(np.max(huber_variational_gap(z, c))))
        worst_b = max(worst_b, float(np.max(berhu_variational_gap(z, c))))
    return SuiteResult("variational", 8 * z.size, {"huber_gap": worst_h, "berhu_gap": worst_b},
                       {"huber_gap": 1e-10, "berhu_gap": 1e-10})


def _random_coefficients(rng: np.random.Generator):
    p = int(rng.integers(1, 21))
    beta = rng.standard_normal(p) * rng.exponential(2.0)
    beta[rng.random(p) < 0.3] = 0.0
    if rng.random() < 0.2 and p > 1:  # tied magnitudes
        beta[1] = -beta[0]
    if not np.any(beta):
        beta[0] = rng.choice([-1.0, 1.0]) * rng.exponential(1.0)
    w = rng.exponential(1.0, p) + 0.05
    L = float(rng.choice([0.5, 1.0, 1.345, 3.0])) if rng.random() < 0.5 else float(rng.uniform(0.2, 3.0))
    return beta, w, L


def check_tau(cfg: CheckConfig) -> SuiteResult:
    rng = RngStream(cfg.seed, 1).generator()
    bump = 1.0 + TAU_FAULT if cfg.fault == "tau" else 1.0
    worst = {"value_rel": 0.0, "tau_rel": 0.0, "stationarity": 0.0, "closed_form_rel": 0.0}
    failures = []
    for case in range(cfg.tau_cases):
        beta, w, L = _random_coefficients(rng)
        prof = adaptive_berhu_concomitant(beta, w, L)
        tau = prof.tau_hat * bump
        z = np.abs(beta) / tau
        value = tau * (np.sum(1.0 / w) + np.sum(w * np.where(z <= L, z, (z * z + L * L) / (2 * L))))
        t_ref, v_ref = grid_tau(beta, w, L)
        # stationarity of tau, relative to the size of its two terms
        act = z > L
        pos = np.sum(1.0 / w) + np.sum(w[act] * L / 2)
        neg = np.sum(w[act] * z[act] ** 2 / (2 * L))
        stat = abs(pos - neg) / (pos + neg)
        unit = adaptive_berhu_concomitant(beta, None, L).value
        cf = pen_closed_form(beta, L)
        errs = {
            "value_rel": _rel(value, v_ref),
            "tau_rel": _rel(tau, t_ref),
            "stationarity": stat,
            "closed_form_rel": _rel(unit, cf),
        }
        for k, v in errs.items():
            worst[k] = max(worst[k], v)
        if (errs["value_rel"] > 1e-6 or errs["tau_rel"] > 1e-5 or stat > 1e-8
                or errs["closed_form_rel"] > 1e-10):
            failures.append({"case": case, **errs})
    return SuiteResult("tau", cfg.tau_cases, worst,
                       {"value_rel": 1e-6, "tau_rel": 1e-5, "stationarity": 1e-8,
                        "closed_form_rel": 1e-10}, failures)


def check_s(cfg: CheckConfig) -> SuiteResult:
    rng = RngStream(cfg.seed, 2).generator()
    worst = {"s_rel": 0.0, "value_rel": 0.0, "worked_example": 0.0}
    failures = []
    for case in range(cfg.s_cases):
        n = int(rng.integers(1, 51))
        M = (1.0, 1.345)[case % 2]
        r = rng.standard_normal(n) * rng.exponential(3.0)
        if rng.random() < 0.2:
            r[rng.random(n) < 0.5] = 0.0
        if rng.random() < 0.1 and n > 1:
            r[1] = -r[0]
        ev = huber_concomitant(r, M)
        s_ref, v_ref = grid_s(r, M)
        e_s = abs(ev.s_hat - s_ref) if s_ref == 0.0 else _rel(ev.s_hat, s_ref)
        e_v = abs(ev.value - v_ref) if v_ref == 0.0 else _rel(ev.value, v_ref)
        worst["s_rel"] = max(worst["s_rel"], e_s)
        worst["value_rel"] = max(worst["value_rel"], e_v)
        if e_s > 1e-8 or e_v > 1e-8:
            failures.append({"case": case, "n": n, "M": M, "s_rel": e_s, "value_rel": e_v})
    ex = huber_concomitant(np.array([1.0, -1.0, 2.0]), 1.0)
    worst["worked_example"] = abs(ex.s_hat - 1.0) + abs(ex.value - 8.0)
    return SuiteResult("s", cfg.s_cases + 1, worst,
                       {"s_rel": 1e-8, "value_rel": 1e-8, "worked_example": 0.0}, failures)


def tiny_instance(rng: np.random.Generator, huber: bool, penalty: str):
    """A random problem with n <= 10 rows and p <= 2 columns."""
    n = int(rng.integers(3, 11))
    p = int(rng.integers(1, 3))
    x = center_columns(rng.standard_normal((n, p)))[0]
    y = 1.0 + x @ (2.0 * rng.standard_normal(p)) + rng.standard_normal(n) * rng.choice([0.3, 1.0, 3.0])
    if rng.random() < 0.3:
        y[0] += 20.0
    w = rng.exponential(1.0, p) + 0.2
    lam = float(np.exp(rng.uniform(np.log(0.05), np.log(20.0))))
    loss = Huber(1.345) if huber else LeastSquares()
    if penalty == "lasso":
        pen = AdaptiveLasso(lam, w)
    else:
        pen = AdaptiveBerHu(lam, float(rng.uniform(0.5, 3.0)), w)
    return Dataset(x, y), ModelSpec(loss, pen)


def check_bruteforce(cfg: CheckConfig) -> SuiteResult:
    worst = {"objective_excess_rel": 0.0, "kkt": 0.0, "non_monotone": 0}
    failures = []
    not_converged = 0
    cases = 0
    # a tighter stopping tolerance than the 1e-6 being certified, so that the
    # independent KKT evaluation is not at the mercy of rounding differences
    solver = SolverConfig(kkt_tol=1e-7)
    for k, (huber, penalty) in enumerate([(False, "lasso"), (False, "berhu"),
                                          (True, "lasso"), (True, "berhu")]):
        rng = RngStream(cfg.seed, 3).generator(k)
        for case in range(cfg.brute_instances):
            data, spec = tiny_instance(rng, huber, penalty)
            res = fit(data, spec, solver)
            ref, _ = brute_force_minimum(data, spec)
            excess = max(0.0, (res.objective - ref) / abs(ref)) if ref != 0 else abs(res.objective)
            kkt = kkt_check(data, spec, res).max_residual if res.converged else 0.0
            cases += 1
            not_converged += not res.converged
            worst["objective_excess_rel"] = max(worst["objective_excess_rel"], excess)
            worst["kkt"] = max(worst["kkt"], kkt)
            worst["non_monotone"] += not res.monotone
            if excess > 1e-4 or kkt > 1e-6 or not res.monotone:
                failures.append({"loss": "huber" if huber else "ls", "penalty": penalty,
                                 "case": case, "excess": excess, "kkt": kkt,
                                 "monotone": res.monotone})
    worst["not_converged"] = not_converged
    return SuiteResult("bruteforce", cases, worst,
                       {"objective_excess_rel": 1e-4, "kkt": 1e-6, "non_monotone": 0}, failures)


def duplicated_column_instance(seed: int):
    """Least squares with column 1 duplicated into column 2, unit weights and
    a small lambda so both copies sit on the quadratic branch."""
    rng = RngStream(seed, 5).generator()
    n = 60
    x = rng.standard_normal((n, 4))
    x[:, 1] = x[:, 0]
    x = center_columns(x)[0]
    y = 2.0 + x @ np.array([3.0, 3.0, -2.0, 0.0]) + rng.standard_normal(n)
    spec = ModelSpec(LeastSquares(), AdaptiveBerHu(0.5, 1.345, np.ones(4)))
    return Dataset(x, y), spec


def check_grouping(cfg: CheckConfig) -> SuiteResult:
    model = get_model(1)
    settings = MethodSettings()
    worst = {"bound_excess": -np.inf, "duplicate_gap": 0.0}
    failures = []
    pairs = 0
    x, _ = generate_design(model, 100, 1, RngStream(cfg.seed, 4).generator())
    for r in range(cfg.grouping_fits):
        stream = RngStream(cfg.seed, 100 + r)
        y = generate_response(x, model, stream.generator(0))
        data = Dataset(x, y)
        out = run_method("ad-Berhu", data, settings, stream.generator(1))
        reports = grouping_sweep(data, out.spec, out.fit)
        summ = summarize_grouping(reports)
        pairs += summ["pairs"]
        if summ["pairs"]:
            worst["bound_excess"] = max(worst["bound_excess"], summ["max_lhs_minus_rhs"])
        if summ["violations"]:
            failures.append({"fit": r, **summ})
    data, spec = duplicated_column_instance(cfg.seed)
    res = fit(data, spec, SolverConfig(kkt_tol=1e-10, objective_tol=1e-14))
    w = spec.weights_for(data.p)
    thr = spec.penalty.L * res.tau
    in_quad = bool(abs(res.beta[0]) > thr and abs(res.beta[1]) > thr)
    gap = abs(w[0] * res.beta[0] - w[1] * res.beta[1])
    worst["duplicate_gap"] = float(gap)
    if not in_quad:
        failures.append({"duplicate": "coefficients not on the quadratic branch"})
    if worst["bound_excess"] == -np.inf:
        worst["bound_excess"] = None
        failures.append({"grouping": "no nonzero pairs"})
    return SuiteResult("grouping", pairs + 1, worst,
                       {"bound_excess": 1e-8, "duplicate_gap": 1e-6}, failures)


SUITES = {
    "variational": check_variational,
    "tau": check_tau,
    "s": check_s,
    "bruteforce": check_bruteforce,
    "grouping": check_grouping,
}


def parse_suites(text: Optional[str]) -> list:
    if text is None or text.strip() in ("", "all"):
        return list(SUITE_NAMES)
    names = [t.strip() for t in text.split(",") if t.strip()]
    for n in names:
        if n not in SUITES:
            raise ParameterError(f"unknown suite {n!r}; choose from {', '.join(SUITE_NAMES)}")
    return names


def run_checks(names: Sequence[str], cfg: Optional[CheckConfig] = None) -> list:
    cfg = cfg or CheckConfig()
    out = []
    for name in names:
        t0 = time.perf_counter()
        res = SUITES[name](cfg)
        res.runtime = time.perf_counter() - t0
        out.append(res)
    return out
