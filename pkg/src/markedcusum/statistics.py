"""Test statistics computed from the process grid.

Six statistics are supported:

``tn1``   sup over (s, mark) of |process|
``tn2``   sup over marks of the s-integral of the squared process
``tn3``   sup over s of the variance-weighted empirical-measure average
          of the squared process over observed marks
``tn4``   s-integral of the ``tn3`` integrand
``ks``    sup over s of the unmarked CUSUM |margin|
``cm``    s-integral of the squared margin

s-integrals are exact step-function sums (1/n) * sum over the n lattice
rows.  For d = 1 each statistic divided by the indicated power of the
residual second moment is asymptotically distribution free.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractError, DegenerateNormalizerError
from .process import ProcessGrid
from .regression import FitState, variance_at_points

__all__ = [
    "KINDS", "NORMALIZER_POWER", "StatisticValue", "ChangePointEstimate",
    "stat_tn1", "stat_tn2", "stat_tn3", "stat_tn4", "stat_ks", "stat_cm",
    "compute_statistic", "normalize", "estimate_changepoint",
]

KINDS = ("tn1", "tn2", "tn3", "tn4", "ks", "cm")

#: power p such that statistic / c_hat**p is asymptotically pivotal (d = 1)
NORMALIZER_POWER = {"tn1": 0.5, "tn2": 1.0, "tn3": 2.0, "tn4": 2.0,
                    "ks": 0.5, "cm": 1.0}

#: kinds indexed by covariate marks (no distribution-free scaling for d > 1)
MARKED_KINDS = frozenset({"tn1", "tn2", "tn3", "tn4"})


@dataclass(frozen=True)
class StatisticValue:
    kind: str
    value: float
    n: int
    d: int
    normalized: float | None = None


def _make(kind, value, grid) -> StatisticValue:
    return StatisticValue(kind=kind, value=float(value), n=grid.n, d=grid.d)


def stat_tn1(grid: ProcessGrid) -> StatisticValue:
    return _make("tn1", grid.row_sup.max(), grid)


def stat_ks(grid: ProcessGrid) -> StatisticValue:
    return _make("ks", np.abs(grid.margin).max(), grid)


def stat_tn2(grid: ProcessGrid) -> StatisticValue:
    return _make("tn2", max(grid.col_msq.max(), grid.margin_msq), grid)


def stat_cm(grid: ProcessGrid) -> StatisticValue:
    return _make("cm", grid.margin_msq, grid)


def _weighted_row_means(grid: ProcessGrid, fit: FitState, y=None) -> np.ndarray:
    if grid.values is None:
        raise ContractError(
            "tn3/tn4 need the materialized grid; sample exceeds the streaming limit")
    sigma2 = variance_at_points(fit, y=y)[grid.z_order]
    return (grid.values**2) @ sigma2 / grid.n


def stat_tn3(grid: ProcessGrid, fit: FitState) -> StatisticValue:
    return _make("tn3", _weighted_row_means(grid, fit).max(), grid)


def stat_tn4(grid: ProcessGrid, fit: FitState) -> StatisticValue:
    return _make("tn4", _weighted_row_means(grid, fit).mean(), grid)


def compute_statistic(grid: ProcessGrid, kind: str, fit: FitState | None = None) -> StatisticValue:
    if kind == "tn1":
        return stat_tn1(grid)
    if kind == "tn2":
        return stat_tn2(grid)
    if kind == "ks":
        return stat_ks(grid)
    if kind == "cm":
        return stat_cm(grid)
    if kind in ("tn3", "tn4"):
        if fit is None:
            raise ContractError(f"{kind} needs the fitted regression for variance weights")
        return stat_tn3(grid, fit) if kind == "tn3" else stat_tn4(grid, fit)
    raise ContractError(f"unknown statistic kind {kind!r}")


def normalize(stat: StatisticValue, c_hat: float) -> StatisticValue:
    """Divide by the kind-specific power of the residual second moment."""
    if stat.kind in MARKED_KINDS and stat.d != 1:
        raise ContractError(
            f"{stat.kind} has no distribution-free normalization for d = {stat.d}")
    if c_hat <= 0.0:
        raise DegenerateNormalizerError("residual second moment is zero")
    power = NORMALIZER_POWER[stat.kind]
    return replace(stat, normalized=stat.value / c_hat**power)


@dataclass(frozen=True)
class ChangePointEstimate:
    """Lattice point maximizing the per-s supremum of |process|."""

    s_hat: float
    index: int            # floor(n * s_hat), 1-based observation count
    value: float
    degenerate: bool = False


def estimate_changepoint(grid: ProcessGrid) -> ChangePointEstimate:
    """argmax over the s-lattice of sup over marks; ties toward smallest s."""
    row = grid.row_sup
    if not row.any():
        return ChangePointEstimate(s_hat=1.0 / grid.n, index=1, value=0.0,
                                   degenerate=True)
    i = int(np.argmax(row))  # first maximum = smallest s
    return ChangePointEstimate(s_hat=float(grid.s_values[i]), index=i + 1,
                               value=float(row[i]))
