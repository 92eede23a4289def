"""Command line interface.

    berhu fit       --input TABLE [--method ad-Berhu] [--lam X] ...
    berhu simulate  --model 1 --n 100 [--reps 20] [--methods ...] [--jobs 4]
    berhu prostate  --input prostate.data [--splits 100]
    berhu check     [--suites tau,s] [--inject-fault tau]

Every run writes its documents into ``--output`` (a directory) only after
all computation has finished. Exit codes: 0 success, 1 usage or data error,
2 solver did not converge, 3 a check suite failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .checks import FAULTS, SUITE_NAMES, CheckConfig, parse_suites, run_checks
from .core import BerhuError
from .data_ingest import PROSTATE_PREDICTORS, PROSTATE_RESPONSE, TabularSource, load_table, read_table, resampling_study
from .diagnostics import grouping_sweep, summarize_grouping
from .methods import METHOD_ORDER, PENALIZED_METHODS, MethodSettings, get_method, parse_methods, run_method
from .simulation import MODELS, PROVENANCE_NOTES, run_experiment
from .solver import SolverConfig, kkt_check

log = logging.getLogger("berhu")

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_CHECK_FAILED = 0, 1, 2, 3
FULL_PROTOCOL_REPS = 100
PROSTATE_METHODS = ("OLS",) + PENALIZED_METHODS


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; route those to status 1."""

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


@dataclass
class RunConfig:
    subcommand: str
    input: Optional[str] = None
    output: Optional[str] = None
    method: Optional[str] = None
    methods: list = field(default_factory=list)
    response: Optional[str] = None
    predictors: Optional[list] = None
    lam: Optional[float] = None
    lam2: Optional[float] = None
    huber_m: float = 1.345
    berhu_l: float = 1.345
    gamma: float = 1.0
    grid_max: Optional[float] = None
    grid_points: Optional[int] = None
    folds: int = 5
    max_sweeps: int = 10_000
    seed: int = 0
    model: Optional[int] = None
    n: Optional[int] = None
    reps: Optional[int] = None
    test_size: Optional[int] = None
    splits: Optional[int] = None
    train_size: Optional[int] = None
    jobs: int = 1
    full_protocol: bool = False
    suites: list = field(default_factory=list)
    inject_fault: Optional[str] = None

    def settings(self) -> MethodSettings:
        return MethodSettings(huber_m=self.huber_m, berhu_l=self.berhu_l, gamma=self.gamma,
                              grid_max=self.grid_max, grid_points=self.grid_points,
                              folds=self.folds, solver=SolverConfig(max_sweeps=self.max_sweeps))


# ----------------------------------------------------------------- parsing


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} value: {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
        return v
    return conv


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid float value: {text!r}") from None
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed: {text!r}") from None
    if not 0 <= v < 2**63:
        raise argparse.ArgumentTypeError("seed must be a nonnegative integer")
    return v


def _add_model_flags(p):
    p.add_argument("--gamma", type=_positive(float), default=1.0, help="adaptive-weight exponent")
    p.add_argument("--huber-m", type=_positive(float), default=1.345, help="Huber threshold M")
    p.add_argument("--berhu-l", type=_positive(float), default=1.345, help="BerHu threshold L")
    p.add_argument("--grid-max", type=_positive(float), help="largest lambda of the tuning grid")
    p.add_argument("--grid-points", type=_positive(int), help="number of lambda grid points")
    p.add_argument("--folds", type=_positive(int), default=5, help="cross-validation folds")
    p.add_argument("--max-sweeps", type=_positive(int), default=10_000,
                   help="coordinate-descent sweep limit per fit")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="berhu", description="Penalized regression with jointly estimated scales.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)

    p = sub.add_parser("fit", help="fit one method to a table")
    p.add_argument("--input", required=True, help="delimited table with a header row")
    p.add_argument("--output", help="directory for result.json and result.txt")
    p.add_argument("--method", default="ad-Berhu", help=f"one of {', '.join(METHOD_ORDER)}")
    p.add_argument("--response", default=PROSTATE_RESPONSE, help="response column")
    p.add_argument("--predictors", help="comma-separated predictor columns (default: all others)")
    p.add_argument("--lam", type=_nonneg_float, help="fixed lambda (skips tuning)")
    p.add_argument("--lam2", type=_nonneg_float, help="fixed second lambda (elastic net)")
    p.add_argument("--seed", type=_seed, default=0)
    _add_model_flags(p)

    p = sub.add_parser("simulate", help="Monte Carlo study on the block-correlated models")
    p.add_argument("--model", type=int, choices=sorted(MODELS), default=1)
    p.add_argument("--n", type=_positive(int), default=100, help="training rows")
    p.add_argument("--reps", type=_positive(int), help="replications (default 20)")
    p.add_argument("--methods", default=",".join(PENALIZED_METHODS), help="comma-separated")
    p.add_argument("--test-size", type=_positive(int), default=10_000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--jobs", type=_positive(int), default=1, help="parallel worker processes")
    p.add_argument("--output", help="directory for the report and plot summaries")
    p.add_argument("--full-protocol", action="store_true",
                   help=f"{FULL_PROTOCOL_REPS} replications on the default grids")
    _add_model_flags(p)

    p = sub.add_parser("prostate", help="repeated train/test splits on the prostate table")
    p.add_argument("--input", required=True, help="prostate-format table")
    p.add_argument("--methods", default=",".join(PROSTATE_METHODS), help="comma-separated")
    p.add_argument("--splits", type=_positive(int), default=100)
    p.add_argument("--train-size", type=_positive(int), default=67)
    p.add_argument("--response", default=PROSTATE_RESPONSE)
    p.add_argument("--predictors", default=",".join(PROSTATE_PREDICTORS))
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--output", help="directory for the report and selection counts")
    _add_model_flags(p)

    p = sub.add_parser("check", help="run the oracle self-check suites")
    p.add_argument("--suites", default="all", help=f"comma-separated subset of {', '.join(SUITE_NAMES)}")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--inject-fault", choices=FAULTS, help="deliberately perturb a quantity (test hook)")
    p.add_argument("--output", help="directory for check.json and check.txt")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Validate flags against the subcommand; raises UsageError."""
    cmd = args.subcommand
    if cmd is None:
        raise UsageError("a subcommand is required: fit, simulate, prostate or check")
    cfg = RunConfig(subcommand=cmd, output=args.output, seed=args.seed)
    if cmd != "check":
        cfg.gamma, cfg.huber_m, cfg.berhu_l = args.gamma, args.huber_m, args.berhu_l
        cfg.grid_max, cfg.grid_points = args.grid_max, args.grid_points
        cfg.folds, cfg.max_sweeps = args.folds, args.max_sweeps
        if cfg.grid_points is not None and cfg.grid_points < 2:
            raise UsageError("--grid-points must be at least 2")
        if cfg.folds < 2:
            raise UsageError("--folds must be at least 2")
    try:
        if cmd == "fit":
            cfg.input, cfg.method = args.input, args.method
            get_method(cfg.method)
            cfg.response = args.response
            cfg.predictors = _names(args.predictors)
            cfg.lam, cfg.lam2 = args.lam, args.lam2
            if cfg.lam2 is not None and get_method(cfg.method).penalty != "enet":
                raise UsageError("--lam2 applies to the elastic net methods only")
            if cfg.lam2 is not None and cfg.lam is None:
                raise UsageError("--lam2 needs --lam")
        elif cmd == "simulate":
            cfg.model, cfg.n, cfg.jobs, cfg.test_size = args.model, args.n, args.jobs, args.test_size
            cfg.methods = parse_methods(args.methods)
            cfg.full_protocol = args.full_protocol
            if cfg.full_protocol:
                if args.reps is not None or args.grid_points is not None or args.grid_max is not None:
                    raise UsageError("--full-protocol fixes the replications and grids; "
                                     "drop --reps/--grid-points/--grid-max")
                cfg.reps = FULL_PROTOCOL_REPS
            else:
                cfg.reps = args.reps if args.reps is not None else 20
            if cfg.n < 2:
                raise UsageError("--n must be at least 2")
        elif cmd == "prostate":
            cfg.input, cfg.splits, cfg.train_size = args.input, args.splits, args.train_size
            cfg.methods = parse_methods(args.methods)
            cfg.response = args.response
            cfg.predictors = _names(args.predictors)
        else:
            cfg.suites = parse_suites(args.suites)
            cfg.inject_fault = args.inject_fault
        if cmd != "check":
            cfg.settings()
    except BerhuError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _names(text):
    if text is None:
        return None
    names = [t.strip() for t in text.split(",") if t.strip()]
    if not names:
        raise UsageError("empty column list")
    return names


# ------------------------------------------------------------------ output


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


# where results go and how many processes compute them do not change the
# results; they are recorded next to the runtime instead
EXECUTION_FIELDS = ("output", "jobs")


def document(cfg: RunConfig, result: dict, seeds: dict) -> dict:
    config = {k: v for k, v in asdict(cfg).items() if k not in EXECUTION_FIELDS}
    return {
        "tool": "berhu",
        "version": __version__,
        "config": config,
        "seeds": seeds,
        "provenance": list(PROVENANCE_NOTES),
        "result": result,
    }


def dumps(doc: dict) -> str:
    return json.dumps(_jsonable(doc), indent=2) + "\n"


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else v for v in row])
    return buf.getvalue()


def write_outputs(outdir: Optional[str], files: dict, stdout_name: Optional[str] = None):
    """Write every file or none: contents go to temporary files in the target
    directory first and are renamed into place together."""
    if outdir is None:
        if stdout_name is not None:
            sys.stdout.write(files[stdout_name])
        return
    os.makedirs(outdir, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=outdir)
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            staged.append((tmp, os.path.join(outdir, name)))
    except OSError:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, dest in staged:
        os.replace(tmp, dest)


def _timing(cfg: RunConfig, runtime) -> str:
    execution = {k: getattr(cfg, k) for k in EXECUTION_FIELDS}
    return json.dumps({"runtime_seconds": runtime, **execution}, indent=2) + "\n"


def _fmt(v, spec=".4g"):
    return "-" if v is None else format(v, spec)


def _mean_sd(stat: dict, spec=".4g") -> str:
    if stat.get("mean") is None:
        return "-"
    sd = stat.get("std")
    return f"{stat['mean']:{spec}} ({_fmt(sd, spec)})"


# ---------------------------------------------------------------- commands


def cmd_fit(cfg: RunConfig):
    t0 = time.perf_counter()
    src = TabularSource(cfg.input, cfg.response,
                        tuple(cfg.predictors) if cfg.predictors else None)
    x_raw, _, names = read_table(src)
    data = load_table(src)
    means = x_raw.mean(axis=0)
    settings = cfg.settings()
    method = get_method(cfg.method)
    out = run_method(cfg.method, data, settings, np.random.default_rng(cfg.seed),
                     lam=cfg.lam, lam2=cfg.lam2)
    res = out.fit
    kkt = kkt_check(data, out.spec, res) if method.penalty != "none" or method.huber else None
    result = {
        "method": cfg.method,
        "n": data.n,
        "p": data.p,
        "variables": list(names),
        "lambda": out.lam,
        "lambda2": out.lam2,
        "tuned": cfg.lam is None and method.penalty != "none",
        "weights": out.weights,
        "fit": {
            "alpha": res.alpha,
            "intercept_original_scale": float(res.alpha - means @ res.beta),
            "beta": res.beta,
            "s": res.s,
            "tau": res.tau,
            "objective": res.objective,
            "sweeps": res.sweeps,
            "kkt_residual": res.kkt_residual,
            "converged": res.converged,
            "monotone": res.monotone,
            "rank_deficient": res.rank_deficient,
        },
        "kkt": None if kkt is None else {
            "alpha": kkt.alpha, "beta": kkt.beta, "s": kkt.s, "tau": kkt.tau,
            "max_residual": kkt.max_residual,
        },
        "grouping": None,
    }
    if (method.penalty == "berhu" and not method.huber and res.tau and out.lam
            and np.count_nonzero(res.beta) >= 2):
        reports = grouping_sweep(data, out.spec, res)
        result["grouping"] = {
            "summary": summarize_grouping(reports),
            "pairs": [{"i": r.i, "j": r.j, "lhs": r.lhs, "c_ij": r.c_ij, "rhs": r.rhs,
                       "satisfied": r.satisfied} for r in reports],
        }
    doc = document(cfg, result, {"seed": cfg.seed})
    lines = [f"berhu {__version__} fit: {cfg.method} on {cfg.input} (n={data.n}, p={data.p})",
             f"lambda = {_fmt(out.lam)}   lambda2 = {_fmt(out.lam2)}   "
             f"s = {_fmt(res.s)}   tau = {_fmt(res.tau)}",
             f"converged = {res.converged}   sweeps = {res.sweeps}   "
             f"kkt = {res.kkt_residual:.3g}   objective = {res.objective:.10g}",
             "", f"{'variable':>12}  {'coefficient':>14}"]
    lines.append(f"{'(intercept)':>12}  {result['fit']['intercept_original_scale']:14.6g}")
    for nm, b in zip(names, res.beta):
        lines.append(f"{nm:>12}  {b:14.6g}")
    if result["grouping"]:
        s = result["grouping"]["summary"]
        lines.append(f"\ngrouping bound: {s['pairs']} pairs, {s['violations']} violations")
    text = "\n".join(lines) + "\n"
    return {"result.json": dumps(doc), "result.txt": text,
            "timing.json": _timing(cfg, time.perf_counter() - t0)}, "result.txt", (
        EXIT_OK if res.converged else EXIT_NOT_CONVERGED)


def _boxplot_rows(methods: dict, key: str):
    rows = []
    for name, m in methods.items():
        b = m[key]
        if not b.get("count"):
            rows.append([name, 0] + [None] * 9)
            continue
        rows.append([name, b["count"], b["min"], b["q1"], b["median"], b["q3"], b["max"],
                     b["whisker_low"], b["whisker_high"], len(b["outliers"]),
                     ";".join(repr(v) for v in b["outliers"])])
    return rows


BOX_HEADER = ["method", "count", "min", "q1", "median", "q3", "max", "whisker_low",
              "whisker_high", "n_outliers", "outliers"]


def cmd_simulate(cfg: RunConfig):
    t0 = time.perf_counter()
    rep = run_experiment(cfg.model, cfg.n, cfg.methods, cfg.reps, cfg.seed, cfg.settings(),
                         test_size=cfg.test_size, jobs=cfg.jobs)
    body = rep.as_dict()
    doc = document(cfg, body, {"seed": cfg.seed, "streams": body["streams"]})
    sel_rows = []
    for name, m in body["methods"].items():
        s = m["selection"]
        if s is None:  # non-selecting methods are left out of the selection table
            continue
        sel_rows.append([name, s["C"], s["O"], s["U"], s["Z"], s["CZ"], s["CNZ"], s["TZ"],
                         s["TNZ"], s["replications"]])
    lines = [f"berhu {__version__} simulate: model {cfg.model}, n = {cfg.n}, "
             f"{cfg.reps} replications, seed {cfg.seed}", "",
             f"{'method':<16}{'C':>4}{'O':>4}{'U':>4}{'Z':>8}{'CZ':>8}{'CNZ':>8}"]
    for r in sel_rows:
        lines.append(f"{r[0]:<16}{r[1]:>4}{r[2]:>4}{r[3]:>4}{r[4]:>8.2f}{r[5]:>8.2f}{r[6]:>8.2f}")
    lines += ["", f"{'method':<16}{'RPE mean':>10}{'RPE sd':>10}{'median':>10}{'failed':>8}"]
    for name, m in body["methods"].items():
        med = m["rpe_boxplot"].get("median")
        lines.append(f"{name:<16}{_fmt(m['rpe_mean']):>10}{_fmt(m['rpe_std']):>10}"
                     f"{_fmt(med):>10}{m['failed']:>8}")
    files = {
        "report.json": dumps(doc),
        "report.txt": "\n".join(lines) + "\n",
        "rpe_boxplot.csv": _csv(_boxplot_rows(body["methods"], "rpe_boxplot"), BOX_HEADER),
        "beta1_boxplot.csv": _csv(_boxplot_rows(body["methods"], "beta1_boxplot"), BOX_HEADER),
        "selection.csv": _csv(sel_rows, ["method", "C", "O", "U", "Z", "CZ", "CNZ", "TZ", "TNZ",
                                         "replications"]),
        "timing.json": _timing(cfg, time.perf_counter() - t0),
    }
    bad = sum(m["not_converged"] for m in body["methods"].values())
    return files, "report.txt", EXIT_OK if bad == 0 else EXIT_NOT_CONVERGED


def cmd_prostate(cfg: RunConfig):
    t0 = time.perf_counter()
    src = TabularSource(cfg.input, cfg.response, tuple(cfg.predictors))
    data = load_table(src)
    rep = resampling_study(data, cfg.methods, cfg.splits, cfg.train_size, cfg.seed, cfg.settings())
    body = rep.as_dict()
    doc = document(cfg, body, {"seed": cfg.seed})
    lines = [f"berhu {__version__} prostate: {cfg.splits} splits, train {cfg.train_size} / "
             f"test {rep.test_size}, seed {cfg.seed}", "",
             f"{'method':<16}{'lambda':>22}{'lambda2':>22}{'test MSE':>22}{'selected':>16}"]
    for name, m in body["methods"].items():
        lines.append(f"{name:<16}{_mean_sd(m['lambda']):>22}{_mean_sd(m['lambda2']):>22}"
                     f"{_mean_sd(m['test_mse']):>22}{_mean_sd(m['selected'], '.3g'):>16}")
    names = body["variables"]
    count_rows = [[name] + [m["selection_counts"][v] for v in names]
                  for name, m in body["methods"].items()]
    files = {
        "report.json": dumps(doc),
        "report.txt": "\n".join(lines) + "\n",
        "selection_counts.csv": _csv(count_rows, ["method"] + list(names)),
        "timing.json": _timing(cfg, time.perf_counter() - t0),
    }
    bad = sum(m["not_converged"] for m in body["methods"].values())
    return files, "report.txt", EXIT_OK if bad == 0 else EXIT_NOT_CONVERGED


def cmd_check(cfg: RunConfig):
    ccfg = CheckConfig(seed=cfg.seed, fault=cfg.inject_fault)
    results = run_checks(cfg.suites, ccfg)
    failed = [r.name for r in results if not r.passed]
    body = {
        "passed": not failed,
        "first_failure": failed[0] if failed else None,
        "suites": [r.as_dict() for r in results],
    }
    doc = document(cfg, body, {"seed": cfg.seed})
    text = "\n".join(r.line() for r in results) + "\n"
    files = {
        "check.json": dumps(doc),
        "check.txt": text,
        "timing.json": _timing(cfg, {r.name: r.runtime for r in results}),
    }
    code = EXIT_OK
    if failed:
        code = EXIT_CHECK_FAILED
    return files, "check.txt", code, failed


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "prostate": cmd_prostate, "check": cmd_check}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=max(logging.DEBUG, logging.WARNING - 10 * args.verbose),
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args)
    except UsageError as exc:
        sys.stderr.write(str(exc).rstrip() + "\n")
        if "usage:" not in str(exc):
            sys.stderr.write(parser.format_usage())
        return EXIT_USAGE
    try:
        out = COMMANDS[cfg.subcommand](cfg)
        files, stdout_name, code = out[0], out[1], out[2]
        write_outputs(cfg.output, files, stdout_name)
    except BerhuError as exc:
        sys.stderr.write(f"berhu {cfg.subcommand}: error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"berhu {cfg.subcommand}: cannot write output: {exc}\n")
        return EXIT_USAGE
    if code == EXIT_NOT_CONVERGED:
        sys.stderr.write(f"berhu {cfg.subcommand}: solver did not converge (results flagged)\n")
    elif code == EXIT_CHECK_FAILED:
        sys.stderr.write(f"berhu check: suite failed: {out[3][0]}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
