"""Command-line interface.

Subcommands:

``test``        analyze a delimited data file and write report + trace + figures
``simulate``    draw one series from a built-in model and write it as CSV
``experiment``  Monte Carlo rejection-frequency table over n and break sizes
``quantiles``   rebuild the critical-value tables for the limit functionals

Every flag can also be supplied through a JSON config file
(``--config``); explicit flags override file values.  Exit codes:
0 = ran, no rejection; 3 = ran, null rejected; 1 = error.  The worker
count for experiments and table builds defaults to the
MARKEDCUSUM_WORKERS environment variable.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import AnalysisConfig, analyze, emit_trace
from .errors import MarkedCusumError
from .experiments import (ExperimentConfig, resolve_workers, results_to_csv,
                          run_experiment)
from .limits import FUNCTIONAL_KINDS, build_critical_tables, save_tables
from .models import MODEL_IDS, ModelSpec, generate

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECTED = 3


def _load_config_file(path):
    if path is None:
        return {}
    with open(path) as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict):
        raise MarkedCusumError(f"{path}: config file must hold a JSON object")
    return payload


def _merge(args: argparse.Namespace, file_cfg: dict, defaults: dict) -> dict:
    """Explicit flags beat config-file entries beat built-in defaults."""
    merged = {}
    for key, default in defaults.items():
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            merged[key] = cli_val
        elif key in file_cfg:
            merged[key] = file_cfg[key]
        else:
            merged[key] = default
    unknown = set(file_cfg) - set(defaults)
    if unknown:
        raise MarkedCusumError(f"unknown config keys: {sorted(unknown)}")
    return merged


def _split_list(value, cast):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return [cast(v) for v in value]
    return [cast(v) for v in str(value).split(",") if v != ""]


# ---------------------------------------------------------------------------
# test

_TEST_DEFAULTS = dict(
    input=None, response=None, covariates=None, lags=None, label_column=None,
    kernel="epanechnikov4", bandwidth="cv", cv_grid_size=30,
    window="everywhere", tau=0.01, stats="tn1", mode="asymptotic", B=200,
    alpha=0.05, multiplier="standard_normal", seed=0, tables=None, out="analysis_out",
    figures=True,
)


def _cmd_test(args) -> int:
    cfg = _merge(args, _load_config_file(args.config), _TEST_DEFAULTS)
    if cfg["input"] is None or cfg["response"] is None:
        raise MarkedCusumError("test needs --input and --response")
    bandwidth = cfg["bandwidth"]
    if bandwidth != "cv":
        bandwidth = float(bandwidth)
    config = AnalysisConfig(
        input_path=cfg["input"], response=cfg["response"],
        covariates=tuple(_split_list(cfg["covariates"], str)) if cfg["covariates"] else None,
        lags=int(cfg["lags"]) if cfg["lags"] is not None else None,
        label_column=cfg["label_column"], kernel=cfg["kernel"],
        bandwidth=bandwidth, cv_grid_size=int(cfg["cv_grid_size"]),
        window=cfg["window"], tau=float(cfg["tau"]),
        statistics=tuple(_split_list(cfg["stats"], str)), mode=cfg["mode"],
        B=int(cfg["B"]), alpha=float(cfg["alpha"]),
        multiplier=cfg["multiplier"], seed=int(cfg["seed"]),
        tables_path=cfg["tables"],
    )
    report = analyze(config)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    report.save(out / "report.json")
    emit_trace(report, out / "trace.csv")
    if cfg["figures"]:
        from .plots import render_scatter_figure, render_trace_figure
        render_trace_figure(report, out / "trace.png")
        render_scatter_figure(report, out / "scatter.png")
    print(f"n = {report.n}, d = {report.d}, bandwidth = {report.bandwidth:.6g}")
    for entry in report.statistics:
        verdict = "reject" if entry["reject"] else "no rejection"
        print(f"{entry['kind']}: value = {entry['value']:.6g}, "
              f"p = {entry['p_display']}, {verdict}")
    cp = report.changepoint
    print(f"estimated change: s = {cp['s_hat']:.6g} "
          f"(observation {cp['index']}, label {cp['label']})")
    print(f"outputs written to {out}")
    return EXIT_REJECTED if report.reject_any else EXIT_OK


# ---------------------------------------------------------------------------
# simulate

_SIM_DEFAULTS = dict(model=None, n=None, delta0=0.0, t0=0.5, burn_in=500,
                     seed=0, out=None)


def _cmd_simulate(args) -> int:
    cfg = _merge(args, _load_config_file(args.config), _SIM_DEFAULTS)
    if cfg["model"] is None or cfg["n"] is None or cfg["out"] is None:
        raise MarkedCusumError("simulate needs --model, --n and --out")
    spec = ModelSpec(id=cfg["model"], n=int(cfg["n"]), delta0=float(cfg["delta0"]),
                     t0=float(cfg["t0"]), burn_in=int(cfg["burn_in"]),
                     seed=int(cfg["seed"]))
    sample = generate(spec)
    with open(cfg["out"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "y"] + [f"x{j + 1}" for j in range(sample.d)])
        for i in range(sample.n):
            writer.writerow([i + 1, repr(float(sample.y[i]))]
                            + [repr(float(v)) for v in sample.x[i]])
    print(f"wrote {sample.n} observations (d = {sample.d}) to {cfg['out']}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiment

_EXP_DEFAULTS = dict(model=None, n=None, delta0="0", t0=0.5, burn_in=500,
                     R=200, stats="tn1,tn2,ks,cm", mode="bootstrap", B=200,
                     alpha=0.05, cv_grid_size=30, kernel="epanechnikov4",
                     multiplier="standard_normal", window="everywhere", tau=0.01,
                     seed=0, out=None, workers=None)


def _cmd_experiment(args) -> int:
    cfg = _merge(args, _load_config_file(args.config), _EXP_DEFAULTS)
    if cfg["model"] is None or cfg["n"] is None:
        raise MarkedCusumError("experiment needs --model and --n")
    ns = _split_list(cfg["n"], int)
    deltas = _split_list(cfg["delta0"], float)
    config = ExperimentConfig(
        statistics=tuple(_split_list(cfg["stats"], str)), mode=cfg["mode"],
        B=int(cfg["B"]), alpha=float(cfg["alpha"]),
        cv_grid_size=int(cfg["cv_grid_size"]), kernel=cfg["kernel"],
        multiplier=cfg["multiplier"], window=cfg["window"], tau=float(cfg["tau"]))
    cells = [(n, d0) for n in ns for d0 in deltas]
    children = np.random.SeedSequence(int(cfg["seed"])).spawn(len(cells))
    results = []
    raw_workers = cfg["workers"]
    workers = resolve_workers(None if raw_workers is None else int(raw_workers))
    for (n, d0), child in zip(cells, children):
        spec = ModelSpec(id=cfg["model"], n=n, delta0=d0, t0=float(cfg["t0"]),
                         burn_in=int(cfg["burn_in"]))
        cell_seed = int(child.generate_state(1, dtype=np.uint64)[0])
        res = run_experiment(spec, int(cfg["R"]), config, cell_seed,
                             workers=workers)
        results.append(res)
        freqs = "  ".join(f"{k}={res.frequencies[k]:.3f}" for k in config.statistics)
        print(f"{spec.id} n={n} delta0={d0:g}: {freqs} "
              f"({res.n_ok}/{res.R} ok, {res.wall_seconds:.1f}s)")
    if cfg["out"]:
        results_to_csv(results, cfg["out"])
        print(f"table written to {cfg['out']}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# quantiles

_QUANT_DEFAULTS = dict(kinds=",".join(FUNCTIONAL_KINDS), R=100_000, gs=512,
                       gt=512, seed=79_052_923, out=None, workers=None)


def _cmd_quantiles(args) -> int:
    cfg = _merge(args, _load_config_file(args.config), _QUANT_DEFAULTS)
    if cfg["out"] is None:
        raise MarkedCusumError("quantiles needs --out")
    kinds = _split_list(cfg["kinds"], str)
    raw_workers = cfg["workers"]
    workers = resolve_workers(None if raw_workers is None else int(raw_workers))
    tables = build_critical_tables(kinds, int(cfg["R"]), int(cfg["gs"]),
                                   int(cfg["gt"]), int(cfg["seed"]),
                                   workers=workers)
    save_tables(tables, cfg["out"])
    for kind in kinds:
        t = tables[kind]
        print(f"{kind}: q90 = {t.quantile(0.90):.4f}  q95 = {t.quantile(0.95):.4f}  "
              f"q99 = {t.quantile(0.99):.4f}")
    print(f"tables written to {cfg['out']}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="markedcusum",
        description="Change-point tests for nonparametric time-series regression")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="analyze a delimited data file")
    p.add_argument("--config")
    p.add_argument("--input")
    p.add_argument("--response")
    p.add_argument("--covariates", help="comma-separated covariate columns")
    p.add_argument("--lags", type=int, help="lag-embedding order (alternative to --covariates)")
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--kernel", choices=["epanechnikov", "epanechnikov4"])
    p.add_argument("--bandwidth", help='"cv" or a fixed positive value')
    p.add_argument("--cv-grid-size", dest="cv_grid_size", type=int)
    p.add_argument("--window", choices=["everywhere", "box"])
    p.add_argument("--tau", type=float)
    p.add_argument("--stats", help="comma-separated subset of tn1,tn2,tn3,tn4,ks,cm")
    p.add_argument("--mode", choices=["asymptotic", "bootstrap"])
    p.add_argument("--B", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--multiplier",
                   choices=["rademacher", "mammen_two_point", "standard_normal"])
    p.add_argument("--seed", type=int)
    p.add_argument("--tables", help="critical-table JSON (default: packaged tables)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None)
    p.set_defaults(func=_cmd_test)

    p = sub.add_parser("simulate", help="draw a series from a built-in model")
    p.add_argument("--config")
    p.add_argument("--model", choices=list(MODEL_IDS))
    p.add_argument("--n", type=int)
    p.add_argument("--delta0", type=float)
    p.add_argument("--t0", type=float)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("experiment", help="Monte Carlo rejection-frequency table")
    p.add_argument("--config")
    p.add_argument("--model", choices=list(MODEL_IDS))
    p.add_argument("--n", help="comma-separated sample sizes")
    p.add_argument("--delta0", help="comma-separated break sizes")
    p.add_argument("--t0", type=float)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--R", type=int, help="Monte Carlo replications")
    p.add_argument("--stats")
    p.add_argument("--mode", choices=["asymptotic", "bootstrap"])
    p.add_argument("--B", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--cv-grid-size", dest="cv_grid_size", type=int)
    p.add_argument("--kernel", choices=["epanechnikov", "epanechnikov4"])
    p.add_argument("--multiplier",
                   choices=["rademacher", "mammen_two_point", "standard_normal"])
    p.add_argument("--window", choices=["everywhere", "box"])
    p.add_argument("--tau", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("quantiles", help="rebuild critical-value tables")
    p.add_argument("--config")
    p.add_argument("--kinds")
    p.add_argument("--R", type=int)
    p.add_argument("--gs", type=int)
    p.add_argument("--gt", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_quantiles)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MarkedCusumError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
