"""Monte Carlo rejection-frequency experiments.

Each replication draws a fresh series, selects the bandwidth by
cross-validation, fits, and tests with either the asymptotic
(normalized, d = 1) or the bootstrap route.  Replication r works from
substream r of the master seed, so results are bit-reproducible and
independent of the worker count.
"""

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bootstrap import MultiplierSpec, run_bootstrap_multi
from .errors import ContractError, MarkedCusumError
from .kernels import get_kernel
from .limits import STAT_TO_FUNCTIONAL, default_tables
from .models import ModelSpec, generate
from .process import build_grid
from .regression import (WeightWindow, c_hat, cv_bandwidth,
                         default_bandwidth_grid, nw_fit)
from .statistics import KINDS, compute_statistic, estimate_changepoint, normalize

__all__ = ["ExperimentConfig", "ExperimentResult", "run_experiment",
           "results_to_csv", "resolve_workers"]

WORKERS_ENV = "MARKEDCUSUM_WORKERS"


def resolve_workers(workers: int | None) -> int:
    """Explicit argument wins; else the environment variable; else 1."""
    if workers is not None:
        return max(1, int(workers))
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


@dataclass(frozen=True)
class ExperimentConfig:
    """Test configuration shared by all replications of one experiment."""

    statistics: tuple = ("tn1", "tn2", "ks", "cm")
    mode: str = "bootstrap"
    B: int = 200
    alpha: float = 0.05
    cv_grid_size: int = 30
    kernel: str = "epanechnikov4"
    multiplier: str = "standard_normal"
    window: str = "everywhere"
    tau: float = 0.01

    def __post_init__(self):
        if self.mode not in ("bootstrap", "asymptotic"):
            raise ContractError(f"unknown mode {self.mode!r}")
        for kind in self.statistics:
            if kind not in KINDS:
                raise ContractError(f"unknown statistic kind {kind!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ContractError("alpha must lie in (0, 1)")


@dataclass
class ExperimentResult:
    """Rejection frequencies of one Monte Carlo experiment."""

    spec: ModelSpec
    config: ExperimentConfig
    R: int
    master_seed: int
    frequencies: dict
    se: dict
    rejections: dict
    n_ok: int
    failures: int
    failure_messages: list = field(default_factory=list)
    s_hats: np.ndarray | None = None
    normalized: dict | None = None     # per-statistic draws, asymptotic mode
    wall_seconds: float = 0.0          # informational; excluded from exports


def _window_for(config: ExperimentConfig, sample) -> WeightWindow:
    if config.window == "everywhere":
        return WeightWindow.everywhere()
    if config.window == "box":
        return WeightWindow.from_quantiles(sample, config.tau)
    raise ContractError(f"unknown window kind {config.window!r}")


def _replicate(args):
    spec, config, child = args
    try:
        data_ss, boot_ss = child.spawn(2)
        sample = generate(spec, rng=np.random.default_rng(data_ss))
        kernel = get_kernel(config.kernel, d=sample.d)
        window = _window_for(config, sample)
        h = cv_bandwidth(sample, kernel, default_bandwidth_grid(sample, config.cv_grid_size))
        fit = nw_fit(sample, kernel, h, window)
        grid = build_grid(fit)
        out = {"ok": True, "s_hat": estimate_changepoint(grid).s_hat,
               "reject": None, "normalized": None}
        if config.mode == "asymptotic":
            c = c_hat(fit)
            out["normalized"] = {
                kind: normalize(compute_statistic(grid, kind, fit=fit), c).normalized
                for kind in config.statistics}
        else:
            runs = run_bootstrap_multi(fit, config.statistics, config.B,
                                       config.alpha,
                                       MultiplierSpec(config.multiplier),
                                       seed=boot_ss)
            out["reject"] = {kind: runs[kind].reject for kind in config.statistics}
        return out
    except MarkedCusumError as exc:
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}


def run_experiment(spec: ModelSpec, R: int, config: ExperimentConfig,
                   master_seed: int, workers: int | None = None,
                   tables: dict | None = None) -> ExperimentResult:
    """R independent replications of the full test pipeline."""
    if R < 1:
        raise ContractError("need at least one replication")
    marked = [k for k in config.statistics if k in ("tn1", "tn2", "tn3", "tn4")]
    if config.mode == "asymptotic":
        if spec.d != 1 and marked:
            raise ContractError(
                "asymptotic mode supports marked statistics only for d = 1; "
                "use the bootstrap for multivariate covariates")
        if tables is None:
            tables = default_tables()
    started = time.perf_counter()
    children = np.random.SeedSequence(master_seed).spawn(R)
    tasks = [(spec, config, child) for child in children]
    workers = resolve_workers(workers)
    if workers > 1 and R > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(_replicate, tasks,
                                chunksize=max(1, R // (workers * 8))))
    else:
        raw = [_replicate(t) for t in tasks]

    ok = [r for r in raw if r["ok"]]
    failures = [r["error"] for r in raw if not r["ok"]]
    rejections = {kind: 0 for kind in config.statistics}
    normalized = None
    if config.mode == "asymptotic":
        normalized = {kind: np.array([r["normalized"][kind] for r in ok])
                      for kind in config.statistics}
        for kind in config.statistics:
            crit = tables[STAT_TO_FUNCTIONAL[kind]].quantile(1.0 - config.alpha)
            rejections[kind] = int(np.sum(normalized[kind] > crit))
    else:
        for r in ok:
            for kind in config.statistics:
                rejections[kind] += bool(r["reject"][kind])
    n_ok = len(ok)
    freq = {kind: (rejections[kind] / n_ok if n_ok else float("nan"))
            for kind in config.statistics}
    se = {kind: (float(np.sqrt(f * (1.0 - f) / n_ok)) if n_ok else float("nan"))
          for kind, f in freq.items()}
    return ExperimentResult(
        spec=spec, config=config, R=R, master_seed=master_seed,
        frequencies=freq, se=se, rejections=rejections, n_ok=n_ok,
        failures=len(failures), failure_messages=failures,
        s_hats=np.array([r["s_hat"] for r in ok]),
        normalized=normalized,
        wall_seconds=time.perf_counter() - started,
    )


def results_to_csv(results, path) -> None:
    """One row per experiment: identifiers, then frequency and SE per statistic.

    Timing is deliberately omitted so files are reproducible byte for
    byte under a fixed master seed.
    """
    results = list(results)
    if not results:
        raise ContractError("no results to export")
    kinds = results[0].config.statistics
    header = (["model", "n", "delta0", "t0", "mode", "B", "R", "alpha",
               "master_seed", "n_ok", "failures"]
              + [f"freq_{k}" for k in kinds] + [f"se_{k}" for k in kinds])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for res in results:
            if res.config.statistics != kinds:
                raise ContractError("mixed statistic sets in one CSV export")
            row = [res.spec.id, res.spec.n, repr(res.spec.delta0),
                   repr(res.spec.t0), res.config.mode, res.config.B, res.R,
                   repr(res.config.alpha), res.master_seed, res.n_ok,
                   res.failures]
            row += [repr(res.frequencies[k]) for k in kinds]
            row += [repr(res.se[k]) for k in kinds]
            writer.writerow(row)
