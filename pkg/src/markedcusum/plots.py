"""Figure rendering for analysis reports.

Renders the per-s supremum trace with the critical threshold and the
estimated change location, and (for one covariate) the response
scatter split at the estimated change.  Files only; no interactive
backends.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import TestReport, ingest

__all__ = ["render_trace_figure", "render_scatter_figure"]


def render_trace_figure(report: TestReport, path) -> None:
    n = report.n
    s = np.arange(1, n + 1) / n
    trace = np.asarray(report.trace)
    lead = report.statistics[0]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.step(s, trace, where="post", color="black", lw=1.2)
    if lead["critical_value"] is not None:
        ax.axhline(lead["critical_value"], color="red", lw=1.0,
                   label=f"critical value ({lead['kind']})")
    cp = report.changepoint
    ax.axvline(cp["s_hat"], color="green", lw=1.0,
               label=f"estimated change (s = {cp['s_hat']:.3g})")
    ax.set_xlabel("s")
    ax.set_ylabel("sup over marks of |process|")
    ax.set_title("marked CUSUM trace")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_scatter_figure(report: TestReport, path) -> bool:
    """Covariate-response scatter, markers split at the change; d = 1 only."""
    cfg = report.config
    sample = ingest(cfg["input_path"], cfg["response"],
                    tuple(cfg["covariates"]) if cfg["covariates"] else None,
                    cfg["lags"], cfg["label_column"])
    if sample.d != 1:
        return False
    split = report.changepoint["index"]
    before = slice(0, split)
    after = slice(split, sample.n)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(sample.x[before, 0], sample.y[before], marker="x", color="tab:blue",
               label="before change")
    ax.scatter(sample.x[after, 0], sample.y[after], marker="o", facecolors="none",
               edgecolors="tab:red", label="after change")
    ax.set_xlabel(cfg["covariates"][0] if cfg["covariates"] else f"lag-1 {cfg['response']}")
    ax.set_ylabel(cfg["response"])
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return True
