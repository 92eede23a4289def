"""Loading delimited tables and the repeated train/test split study on real data.

Expected layout (the public prostate-cancer table): a header row naming the
columns, one row per subject, comma or whitespace separated. Rows may carry
one extra leading field (a row label) that the header does not name. Only
the referenced columns must be numeric.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import BerhuError, Dataset, InvalidDataError, ParameterError, RngStream, center_columns
from .methods import METHOD_ORDER, MethodSettings, PilotCache, get_method, run_method
from .tuning import ZERO_THRESHOLD, count_nonzero

log = logging.getLogger(__name__)

PROSTATE_PREDICTORS = ("lcavol", "lweight", "age", "lbph", "svi", "lcp", "gleason", "pgg45")
PROSTATE_RESPONSE = "lpsa"


class DataFileNotFoundError(InvalidDataError):
    pass


class TableParseError(InvalidDataError):
    def __init__(self, msg, row=None, column=None):
        super().__init__(msg)
        self.row = row
        self.column = column


class MissingColumnError(InvalidDataError):
    def __init__(self, column):
        super().__init__(f"column {column!r} not found in header")
        self.column = column


class EmptyDataError(InvalidDataError):
    pass


@dataclass(frozen=True)
class TabularSource:
    path: str
    response: str = PROSTATE_RESPONSE
    predictors: Optional[tuple] = PROSTATE_PREDICTORS
    delimiter: Optional[str] = None  # None: comma if the header has one, else whitespace

    def __post_init__(self):
        if self.predictors is not None:
            preds = tuple(self.predictors)
            if self.response in preds:
                raise ParameterError("response column is also listed as a predictor")
            if len(set(preds)) != len(preds):
                raise ParameterError("duplicate predictor names")
            object.__setattr__(self, "predictors", preds)


def _split(line: str, delim: Optional[str]) -> list:
    if delim is None:
        return line.split()
    return [f.strip().strip('"') for f in line.split(delim)]


def read_table(src: TabularSource):
    """Parse the file; returns (predictor matrix, response, predictor names)."""
    if not os.path.isfile(src.path):
        raise DataFileNotFoundError(f"file not found: {src.path}")
    try:
        with open(src.path, encoding="utf-8") as fh:
            lines = [ln.rstrip("\r\n") for ln in fh]
    except (OSError, UnicodeDecodeError) as exc:
        raise TableParseError(f"cannot read {src.path}: {exc}") from exc
    lines = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not lines:
        raise EmptyDataError(f"{src.path} is empty")
    delim = src.delimiter
    header_line = lines[0][1]
    if delim is None and "," in header_line:
        delim = ","
    header = [h.strip('"') for h in _split(header_line, delim)]
    if delim is not None and header and header[0] == "":
        header = header[1:]  # unnamed row-label column
    predictors = src.predictors
    if predictors is None:
        predictors = tuple(h for h in header if h != src.response)
    for col in (src.response,) + tuple(predictors):
        if col not in header:
            raise MissingColumnError(col)
    idx = [header.index(c) for c in predictors]
    ridx = header.index(src.response)
    rows = lines[1:]
    if not rows:
        raise EmptyDataError(f"{src.path} has a header but no data rows")
    x = np.empty((len(rows), len(idx)))
    y = np.empty(len(rows))
    for k, (lineno, ln) in enumerate(rows):
        fields = _split(ln, delim)
        if len(fields) == len(header) + 1:
            fields = fields[1:]
        elif len(fields) != len(header):
            raise TableParseError(
                f"line {lineno}: expected {len(header)} fields, found {len(fields)}", row=lineno)
        for dest, col in [(None, ridx)] + list(enumerate(idx)):
            cell = fields[col]
            try:
                val = float(cell)
            except ValueError:
                raise TableParseError(
                    f"line {lineno}, column {header[col]!r}: non-numeric value {cell!r}",
                    row=lineno, column=header[col]) from None
            if not np.isfinite(val):
                raise TableParseError(
                    f"line {lineno}, column {header[col]!r}: missing or non-finite value",
                    row=lineno, column=header[col])
            if dest is None:
                y[k] = val
            else:
                x[k, dest] = val
    return x, y, tuple(predictors)


def load_table(src: TabularSource) -> Dataset:
    """Dataset with centered predictors."""
    x, y, names = read_table(src)
    xc, _ = center_columns(x)
    log.info("loaded %d rows, %d predictors from %s", x.shape[0], x.shape[1], src.path)
    return Dataset(xc, y, names)


# ------------------------------------------------------------------- study


@dataclass
class SplitRecord:
    mse: list = field(default_factory=list)
    normalized_mse: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    lam2: list = field(default_factory=list)
    selected: list = field(default_factory=list)
    selection_counts: np.ndarray = None
    converged: list = field(default_factory=list)
    errors: list = field(default_factory=list)


def _stat(values) -> dict:
    v = [x for x in values if x is not None]
    if not v:
        return {"mean": None, "std": None}
    return {"mean": float(np.mean(v)), "std": float(np.std(v, ddof=1)) if len(v) > 1 else None}


@dataclass
class ResamplingReport:
    methods: dict
    names: tuple
    splits: int
    train_size: int
    test_size: int
    seed: int
    retried: int
    settings: dict

    def as_dict(self) -> dict:
        out = {
            "splits": self.splits,
            "train_size": self.train_size,
            "test_size": self.test_size,
            "seed": self.seed,
            "retried_splits": self.retried,
            "settings": self.settings,
            "variables": list(self.names),
            "methods": {},
        }
        for name, rec in self.methods.items():
            ok = [m for m in rec.mse if m is not None]
            out["methods"][name] = {
                "test_mse": _stat(rec.mse),
                "test_mse_over_var": _stat(rec.normalized_mse),
                "lambda": _stat(rec.lam),
                "lambda2": _stat(rec.lam2),
                "selected": _stat(rec.selected),
                "selection_counts": dict(zip(self.names, (int(c) for c in rec.selection_counts))),
                "failed": len(rec.mse) - len(ok),
                "not_converged": int(sum(not c for c in rec.converged)),
                "errors": [e for e in rec.errors if e],
            }
        return out


def _split_rows(n: int, train_size: int, rng: np.random.Generator):
    perm = rng.permutation(n)
    return np.sort(perm[:train_size]), np.sort(perm[train_size:])


def resampling_study(data: Dataset, methods: Sequence[str], splits: int = 100,
                     train_size: int = 67, seed: int = 0,
                     settings: Optional[MethodSettings] = None,
                     max_retries: int = 100) -> ResamplingReport:
    """Repeated random train/test splits. Each method is tuned and fitted on
    the training rows (re-centered with their own means) and scored by the
    mean squared prediction error on the held-out rows; that error divided by
    the held-out variance of y is reported alongside."""
    settings = settings or MethodSettings()
    methods = list(methods)
    for m in methods:
        get_method(m)
    n = data.n
    if not 1 <= train_size < n:
        raise ParameterError(f"train_size must be in [1, {n - 1}]")
    if splits < 1:
        raise ParameterError("need at least one split")
    names = data.names or tuple(f"x{j + 1}" for j in range(data.p))
    recs = {m: SplitRecord(selection_counts=np.zeros(data.p, dtype=int)) for m in methods}
    stream_id = 0
    retried = 0
    for s in range(splits):
        while True:
            stream = RngStream(seed, stream_id)
            stream_id += 1
            train, test = _split_rows(n, train_size, stream.generator(0))
            if np.all(np.ptp(data.x[train], axis=0) > 0):
                break
            retried += 1
            log.warning("split %d has a constant training column; drawing another", s)
            if retried > max_retries:
                raise InvalidDataError("could not draw a non-degenerate split")
        xtr, means = center_columns(data.x[train])
        dtr = Dataset(xtr, data.y[train], data.names)
        xte = data.x[test] - means
        yte = data.y[test]
        var = float(np.var(yte, ddof=1)) if yte.size > 1 else float("nan")
        pilots = PilotCache(dtr, settings)
        for m in methods:
            rec = recs[m]
            try:
                out = run_method(m, dtr, settings, stream.generator(1, METHOD_ORDER.index(m)), pilots)
            except BerhuError as exc:
                for lst in (rec.mse, rec.normalized_mse, rec.lam, rec.lam2, rec.selected):
                    lst.append(None)
                rec.converged.append(False)
                rec.errors.append(f"split {s}: {exc}")
                continue
            e = yte - out.fit.alpha - xte @ out.fit.beta
            mse = float(np.mean(e * e))
            rec.mse.append(mse)
            rec.normalized_mse.append(mse / var if var > 0 else None)
            rec.lam.append(out.lam)
            rec.lam2.append(out.lam2)
            k = count_nonzero(out.fit.beta)
            rec.selected.append(k)
            rec.selection_counts += np.abs(out.fit.beta) >= ZERO_THRESHOLD
            rec.converged.append(out.fit.converged)
            rec.errors.append(None)
    return ResamplingReport(recs, names, splits, train_size, n - train_size, seed, retried,
                            settings.as_dict())
