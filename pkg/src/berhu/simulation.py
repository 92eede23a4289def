"""Synthetic block-correlated regression models and the Monte Carlo study
comparing penalized estimators on them."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import BerhuError, Dataset, ParameterError, RngStream, center_columns
from .diagnostics import SelectionMetrics, rpe, selection_metrics
from .methods import METHOD_ORDER, MethodSettings, PilotCache, get_method, run_method
from .tuning import ZERO_THRESHOLD, count_nonzero

log = logging.getLogger(__name__)

NOISE_KINDS = ("gaussian", "mixture", "laplace")

PROVENANCE_NOTES = (
    "RPE = mean over the centered test design of ((a - a*) + x'(b - b*))^2 / sigma^2.",
    "Lambda grids are {0} plus geometrically spaced points from 1e-4 * max to max.",
    "Adaptive elastic net: weights on the l1 term only, lam1 * sum w|b| + lam2 * sum b^2.",
    "Designs are column-centered only, not scaled.",
    "Cross-validation scores squared prediction error; adaptive weights come from the "
    "full-sample unpenalized fit.",
    "A coefficient counts as zero when |b| < 1e-5.",
)


@dataclass(frozen=True)
class BlockModelSpec:
    """p = 40 predictors: three blocks of five with unit off-diagonal and
    1.01 diagonal covariance, then independent standard normals. The first
    15 coefficients equal 3, the rest are 0; intercept 1."""

    model_id: int
    noise: str
    sigma: float
    p: int = 40
    alpha_star: float = 1.0
    n_blocks: int = 3
    block_size: int = 5
    diag: float = 1.01
    signal: float = 3.0

    def __post_init__(self):
        if self.noise not in NOISE_KINDS:
            raise ParameterError(f"unknown noise kind {self.noise!r}")
        if self.n_blocks * self.block_size > self.p:
            raise ParameterError("blocks do not fit into p columns")

    @property
    def n_signal(self) -> int:
        return self.n_blocks * self.block_size

    def covariance(self) -> np.ndarray:
        cov = np.eye(self.p)
        for b in range(self.n_blocks):
            sl = slice(b * self.block_size, (b + 1) * self.block_size)
            cov[sl, sl] = 1.0
        idx = np.arange(self.n_signal)
        cov[idx, idx] = self.diag
        return cov

    def factor(self) -> np.ndarray:
        """F with F F' = covariance, from the symmetric eigendecomposition."""
        vals, vecs = np.linalg.eigh(self.covariance())
        return vecs * np.sqrt(vals)

    @property
    def beta_star(self) -> np.ndarray:
        b = np.zeros(self.p)
        b[: self.n_signal] = self.signal
        return b

    @property
    def true_support(self) -> tuple:
        return tuple(range(self.n_signal))

    def as_dict(self) -> dict:
        return {"model": self.model_id, "noise": self.noise, "sigma": self.sigma, "p": self.p,
                "alpha_star": self.alpha_star}


MODELS = {
    1: BlockModelSpec(1, "gaussian", 15.0),
    2: BlockModelSpec(2, "mixture", 3.1009),
    3: BlockModelSpec(3, "laplace", 10.6),
}


def get_model(model_id: int) -> BlockModelSpec:
    try:
        return MODELS[int(model_id)]
    except (KeyError, ValueError):
        raise ParameterError(f"model must be one of {sorted(MODELS)}, got {model_id!r}") from None


def sample_noise(model: BlockModelSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-scale noise: standard normal; 0.9 N(0,1) + 0.1 N(0,225); or a
    Laplace variable divided by sqrt(2) (unit variance), drawn by inverse CDF."""
    if model.noise == "gaussian":
        return rng.standard_normal(size)
    if model.noise == "mixture":
        u = rng.random(size)
        z = rng.standard_normal(size)
        return np.where(u < 0.1, 15.0 * z, z)
    u = rng.random(size) - 0.5
    tail = np.maximum(1.0 - 2.0 * np.abs(u), np.finfo(float).tiny)
    return -np.sign(u) * np.log(tail) / np.sqrt(2.0)


def generate_design(model: BlockModelSpec, n: int, m: int, rng: np.random.Generator):
    """Training (n rows) and test (m rows) designs, each centered with its own means."""
    if n < 2 or m < 1:
        raise ParameterError("need n >= 2 and m >= 1")
    F = model.factor()
    train = rng.standard_normal((n, model.p)) @ F.T
    test = rng.standard_normal((m, model.p)) @ F.T
    return center_columns(train)[0], center_columns(test)[0]


def generate_response(design, model: BlockModelSpec, rng: np.random.Generator,
                      sigma: Optional[float] = None) -> np.ndarray:
    """alpha* + X beta* + sigma * noise."""
    x = np.asarray(design, dtype=float)
    if x.shape[1] != model.p:
        raise ParameterError(f"design must have {model.p} columns")
    sig = model.sigma if sigma is None else float(sigma)
    return model.alpha_star + x @ model.beta_star + sig * sample_noise(model, x.shape[0], rng)


# ----------------------------------------------------------------- reports


def five_number(values) -> dict:
    """Boxplot statistics: quartiles, whiskers at 1.5 IQR and the outliers."""
    v = np.sort(np.asarray([x for x in values if x is not None and np.isfinite(x)], dtype=float))
    if v.size == 0:
        return {"count": 0}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    inside = v[(v >= q1 - 1.5 * iqr) & (v <= q3 + 1.5 * iqr)]
    return {
        "count": int(v.size),
        "min": float(v[0]),
        "q1": float(q1),
        "median": float(med),
        "q3": float(q3),
        "max": float(v[-1]),
        "whisker_low": float(inside[0]),
        "whisker_high": float(inside[-1]),
        "outliers": [float(x) for x in v if x < inside[0] or x > inside[-1]],
    }


@dataclass
class MethodRecord:
    """Per-replication results of one method; None marks a failed replication."""

    name: str
    alpha: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    lam2: list = field(default_factory=list)
    rpe: list = field(default_factory=list)
    nonzero: list = field(default_factory=list)
    converged: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def ok(self) -> list:
        return [i for i, b in enumerate(self.beta) if b is not None]

    def selection(self, model: BlockModelSpec) -> Optional[SelectionMetrics]:
        if not get_method(self.name).selects:
            return None
        return selection_metrics([self.beta[i] for i in self.ok], model.true_support,
                                 ZERO_THRESHOLD, p=model.p)


@dataclass
class ExperimentReport:
    model: BlockModelSpec
    n: int
    replications: int
    seed: int
    methods: dict
    settings: dict
    test_size: int
    runtime: float = 0.0
    sigma_override: Optional[float] = None

    def as_dict(self) -> dict:
        """Deterministic content of the report (the runtime is left out so that
        reruns with the same seed are byte-identical)."""
        out = {
            "model": self.model.as_dict(),
            "n": self.n,
            "replications": self.replications,
            "seed": self.seed,
            "streams": {"design": [self.seed, 0],
                        "replication_r": [self.seed, "r + 1"]},
            "test_size": self.test_size,
            "sigma_override": self.sigma_override,
            "settings": self.settings,
            "methods": {},
        }
        for name, rec in self.methods.items():
            sel = rec.selection(self.model)
            ok = rec.ok
            rp = [rec.rpe[i] for i in ok]
            out["methods"][name] = {
                "selection": None if sel is None else sel.as_dict(),
                "rpe_mean": float(np.mean(rp)) if rp else None,
                "rpe_std": float(np.std(rp, ddof=1)) if len(rp) > 1 else None,
                "rpe_boxplot": five_number(rp),
                "beta1_boxplot": five_number([rec.beta[i][0] for i in ok]),
                "failed": len(rec.beta) - len(ok),
                "not_converged": int(sum(1 for i in ok if not rec.converged[i])),
                "errors": [e for e in rec.errors if e],
                "per_replication": {
                    "lambda": rec.lam,
                    "lambda2": rec.lam2,
                    "rpe": rec.rpe,
                    "nonzero": rec.nonzero,
                    "beta1": [None if b is None else float(b[0]) for b in rec.beta],
                    "converged": rec.converged,
                },
            }
        return out


# -------------------------------------------------------------- experiment


def _replicate(args):
    """One replication: fresh noise, then every requested method."""
    x, model, methods, seed, r, settings, sigma = args
    stream = RngStream(seed, r + 1)
    y = generate_response(x, model, stream.generator(0), sigma)
    data = Dataset(x, y)
    pilots = PilotCache(data, settings)
    out = {}
    for name in methods:
        rng = stream.generator(1, METHOD_ORDER.index(name))
        try:
            res = run_method(name, data, settings, rng, pilots)
            out[name] = (res.fit.alpha, res.fit.beta, res.lam, res.lam2, res.fit.converged, None)
        except BerhuError as exc:
            out[name] = (None, None, None, None, False, f"replication {r}: {exc}")
    return out


def run_experiment(model_id: int, n: int, methods: Sequence[str], replications: int,
                   seed: int, settings: Optional[MethodSettings] = None, test_size: int = 10_000,
                   jobs: int = 1, sigma: Optional[float] = None) -> ExperimentReport:
    """Replicate the study: designs are drawn once, each replication draws new
    noise, fits every method with its tuning rule and scores it on the test
    design."""
    model = get_model(model_id)
    settings = settings or MethodSettings()
    methods = list(methods)
    for name in methods:
        get_method(name)
    if replications < 1:
        raise ParameterError("need at least one replication")
    if n not in (100, 200, 400):
        log.warning("n=%d differs from the studied sizes 100, 200, 400", n)
    t0 = time.perf_counter()
    x, x_test = generate_design(model, n, test_size, RngStream(seed, 0).generator())
    tasks = [(x, model, methods, seed, r, settings, sigma) for r in range(replications)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_replicate, tasks))
    else:
        results = [_replicate(t) for t in tasks]
    sig = model.sigma if sigma is None or sigma == 0 else sigma
    records = {name: MethodRecord(name) for name in methods}
    for out in results:
        for name in methods:
            alpha, beta, lam, lam2, conv, err = out[name]
            rec = records[name]
            rec.alpha.append(alpha)
            rec.beta.append(None if beta is None else np.asarray(beta))
            rec.lam.append(lam)
            rec.lam2.append(lam2)
            rec.converged.append(bool(conv))
            rec.errors.append(err)
            if beta is None:
                rec.rpe.append(None)
                rec.nonzero.append(None)
            else:
                rec.rpe.append(rpe(alpha, beta, model.alpha_star, model.beta_star, x_test, sig))
                rec.nonzero.append(count_nonzero(beta))
    return ExperimentReport(model, n, replications, seed, records, settings.as_dict(),
                            test_size, time.perf_counter() - t0, sigma)
