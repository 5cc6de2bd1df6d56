"""File ingestion, end-to-end analysis, and report emission.

An analysis reads a delimited text file, builds a regression sample
(either explicit covariate columns or a lag embedding of the response),
runs the fit-grid-test pipeline, and produces a report that
round-trips losslessly through JSON together with a plain-CSV trace of
the per-s supremum for plotting.
"""

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .bootstrap import MultiplierSpec, run_bootstrap_multi
from .errors import ContractError, IngestError, TooFewObservationsError
from .kernels import get_kernel
from .limits import STAT_TO_FUNCTIONAL, asymptotic_decision, default_tables, load_tables
from .process import build_grid
from .regression import (Sample, WeightWindow, c_hat, cv_bandwidth,
                         default_bandwidth_grid, nw_fit)
from .statistics import (KINDS, NORMALIZER_POWER, compute_statistic,
                         estimate_changepoint, normalize)

__all__ = ["AnalysisConfig", "TestReport", "ingest", "analyze", "emit_trace",
           "lag_embed", "MIN_OBSERVATIONS", "SCHEMA_VERSION"]

MIN_OBSERVATIONS = 10
SCHEMA_VERSION = 1


def lag_embed(y, p: int):
    """Stack p lagged responses as covariates; the first p values become
    initial conditions.  Returns (x, y) with n = len(y) - p rows."""
    y = np.asarray(y, dtype=float).ravel()
    p = int(p)
    if p < 1:
        raise ContractError("lag order must be >= 1")
    if y.size <= p:
        raise TooFewObservationsError(
            f"{y.size} rows cannot support a lag order of {p}")
    x = np.column_stack([y[p - 1 - j:y.size - 1 - j] for j in range(p)])
    return x, y[p:]


@dataclass(frozen=True)
class AnalysisConfig:
    """Everything needed to reproduce one analysis run."""

    input_path: str
    response: str
    covariates: tuple | None = None
    lags: int | None = None
    label_column: str | None = None
    kernel: str = "epanechnikov4"
    bandwidth: object = "cv"            # "cv" or a positive number
    cv_grid_size: int = 30
    window: str = "everywhere"
    tau: float = 0.01
    statistics: tuple = ("tn1",)
    mode: str = "asymptotic"
    B: int = 200
    alpha: float = 0.05
    multiplier: str = "standard_normal"
    seed: int = 0
    tables_path: str | None = None

    def __post_init__(self):
        if (self.covariates is None) == (self.lags is None):
            raise ContractError("give exactly one of covariate columns or a lag order")
        if self.lags is not None and self.lags < 1:
            raise ContractError("lag order must be >= 1")
        if self.covariates is not None:
            object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "statistics", tuple(self.statistics))
        for kind in self.statistics:
            if kind not in KINDS:
                raise ContractError(f"unknown statistic kind {kind!r}")
        if self.mode not in ("asymptotic", "bootstrap"):
            raise ContractError(f"unknown mode {self.mode!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ContractError("alpha must lie in (0, 1)")


def _read_delimited(path):
    """Header plus rows of raw strings, each with its 1-based line number."""
    with open(path, newline="") as fh:
        text = fh.read()
    if not text.strip():
        raise IngestError(f"{path}: file is empty")
    first = text.splitlines()[0]
    if "," in first or ";" in first or "\t" in first:
        try:
            dialect = csv.Sniffer().sniff(first, delimiters=",;\t")
        except csv.Error:
            dialect = csv.excel
        reader = csv.reader(io.StringIO(text), dialect)
        rows = [(i + 1, [c.strip() for c in row]) for i, row in enumerate(reader)
                if any(c.strip() for c in row)]
    else:
        rows = [(i + 1, line.split()) for i, line in enumerate(text.splitlines())
                if line.strip()]
    header = rows[0][1]
    return header, rows[1:]


def _column(header, name, path):
    try:
        return header.index(name)
    except ValueError:
        raise IngestError(f"{path}: no column named {name!r}; header is {header}")


def _parse_cell(raw, line_no, name):
    if raw == "" or raw is None:
        raise IngestError(f"line {line_no}, column {name!r}: missing value")
    try:
        value = float(raw)
    except ValueError:
        raise IngestError(f"line {line_no}, column {name!r}: not numeric ({raw!r})")
    if not np.isfinite(value):
        raise IngestError(f"line {line_no}, column {name!r}: non-finite value")
    return value


def ingest(path, response: str, covariates=None, lags: int | None = None,
           label_column: str | None = None) -> Sample:
    """Build a Sample from a delimited text file with a header row."""
    if (covariates is None) == (lags is None):
        raise ContractError("give exactly one of covariate columns or a lag order")
    header, rows = _read_delimited(path)
    y_idx = _column(header, response, path)
    label_idx = _column(header, label_column, path) if label_column else None
    y_all, labels_all = [], []
    for line_no, cells in rows:
        if len(cells) != len(header):
            raise IngestError(
                f"line {line_no}: {len(cells)} fields, header has {len(header)}")
        y_all.append(_parse_cell(cells[y_idx], line_no, response))
        labels_all.append(cells[label_idx] if label_idx is not None else str(line_no))
    if covariates is not None:
        x_cols = []
        for name in covariates:
            idx = _column(header, name, path)
            x_cols.append([_parse_cell(cells[idx], line_no, name)
                           for line_no, cells in rows])
        x = np.column_stack(x_cols)
        y = np.asarray(y_all)
        labels = labels_all
    else:
        p = int(lags)
        x, y = lag_embed(np.asarray(y_all), p)
        labels = labels_all[p:]
    if y.size < MIN_OBSERVATIONS:
        raise TooFewObservationsError(
            f"only {y.size} usable observations after embedding; need >= {MIN_OBSERVATIONS}")
    return Sample(x=x, y=y, meta=tuple(labels))


@dataclass
class TestReport:
    """Analysis output; every field is JSON-native for lossless round trips."""

    __test__ = False        # keep pytest from collecting this as a test class

    schema_version: int
    tool_version: str
    config: dict
    n: int
    d: int
    bandwidth: float
    c_hat: float
    statistics: list           # per statistic: kind, value, normalized, ...
    changepoint: dict
    trace: list                # per-s sup over marks, length n
    seed: int
    reject_any: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "TestReport":
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("schema_version") != SCHEMA_VERSION:
            raise ContractError("unsupported report schema version")
        return cls(**payload)


def _config_echo(config: AnalysisConfig) -> dict:
    echo = asdict(config)
    echo["covariates"] = list(config.covariates) if config.covariates else None
    echo["statistics"] = list(config.statistics)
    return echo


def analyze(config: AnalysisConfig) -> TestReport:
    """Run the full pipeline described by the configuration."""
    sample = ingest(config.input_path, config.response, config.covariates,
                    config.lags, config.label_column)
    kernel = get_kernel(config.kernel, d=sample.d)
    if config.window == "box":
        window = WeightWindow.from_quantiles(sample, config.tau)
    elif config.window == "everywhere":
        window = WeightWindow.everywhere()
    else:
        raise ContractError(f"unknown window kind {config.window!r}")
    if config.bandwidth == "cv":
        h = cv_bandwidth(sample, kernel,
                         default_bandwidth_grid(sample, config.cv_grid_size))
    else:
        h = float(config.bandwidth)
    fit = nw_fit(sample, kernel, h, window)
    grid = build_grid(fit)
    c = c_hat(fit)

    entries = []
    if float(np.ptp(sample.y)) == 0.0:
        # constant response: the true statistics are identically zero and
        # the pipeline would otherwise divide rounding noise by itself
        for kind in config.statistics:
            entries.append({
                "kind": kind, "value": 0.0, "normalized": None,
                "p_value": 1.0, "p_display": "1", "critical_value": None,
                "critical_value_normalized": None, "reject": False,
                "mode": config.mode, "B": None,
            })
    elif config.mode == "bootstrap":
        runs = run_bootstrap_multi(fit, config.statistics, config.B, config.alpha,
                                   MultiplierSpec(config.multiplier),
                                   seed=config.seed)
        for kind in config.statistics:
            run = runs[kind]
            entries.append({
                "kind": kind, "value": run.observed, "normalized": None,
                "p_value": run.p_value, "p_display": f"{run.p_value:.6g}",
                "critical_value": run.critical_value,
                "critical_value_normalized": None,
                "reject": run.reject, "mode": "bootstrap", "B": run.B,
            })
    else:
        tables = load_tables(config.tables_path) if config.tables_path else default_tables()
        for kind in config.statistics:
            stat = compute_statistic(grid, kind, fit=fit)
            if c == 0.0:
                # zero-variance response: nothing to test
                entries.append({
                    "kind": kind, "value": stat.value, "normalized": None,
                    "p_value": 1.0, "p_display": "1", "critical_value": None,
                    "critical_value_normalized": None, "reject": False,
                    "mode": "asymptotic", "B": None,
                })
                continue
            norm = normalize(stat, c)
            dec = asymptotic_decision(norm, tables[STAT_TO_FUNCTIONAL[kind]],
                                      config.alpha)
            crit_raw = dec.critical_value * c ** NORMALIZER_POWER[kind]
            entries.append({
                "kind": kind, "value": stat.value, "normalized": norm.normalized,
                "p_value": dec.p_value, "p_display": dec.p_display(),
                "critical_value": crit_raw,
                "critical_value_normalized": dec.critical_value,
                "reject": dec.reject, "mode": "asymptotic", "B": None,
            })

    cp = estimate_changepoint(grid)
    label = sample.meta[cp.index - 1] if sample.meta is not None else str(cp.index)
    return TestReport(
        schema_version=SCHEMA_VERSION,
        tool_version=__version__,
        config=_config_echo(config),
        n=sample.n, d=sample.d, bandwidth=float(h), c_hat=c,
        statistics=entries,
        changepoint={"s_hat": cp.s_hat, "index": cp.index, "label": label,
                     "value": cp.value, "degenerate": cp.degenerate},
        trace=[float(v) for v in grid.row_sup],
        seed=config.seed,
        reject_any=any(e["reject"] for e in entries),
    )


def emit_trace(report: TestReport, path) -> None:
    """Plot-ready CSV: i, s, per-s sup, critical threshold, change flag."""
    lead = report.statistics[0]
    threshold = lead["critical_value"]
    cp_index = report.changepoint["index"]
    n = report.n
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "s", "sup_z", "threshold", "is_changepoint"])
        for i, value in enumerate(report.trace, start=1):
            writer.writerow([i, repr(i / n), repr(value),
                             repr(threshold) if threshold is not None else "",
                             int(i == cp_index)])
