"""Sequential marked partial-sum process of residuals on its jump lattice.

For a fitted regression with residuals U_i, window weights w_i and
covariates X_i the process evaluated at (s, z) is

    (1/sqrt(n)) * sum_{i <= floor(n s)} U_i w_i 1{X_i <= z}

with componentwise <=.  Both s and z only matter through the lattice
{i/n} x {observed covariate points, +inf}, which is where the process
jumps; the grid stores exactly that lattice.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .regression import FitState

__all__ = ["ProcessGrid", "build_grid", "brute_force_grid", "sup_abs",
           "MATERIALIZE_LIMIT"]

# Above this sample size the n x n value matrix is not materialized;
# summaries are accumulated row by row instead.
MATERIALIZE_LIMIT = 4096


@dataclass(frozen=True)
class ProcessGrid:
    """Process values on the jump lattice plus cached functionals.

    ``values[i, k]`` is the process at s = (i+1)/n and the k-th lattice
    mark; ``margin[i]`` is the classic CUSUM value at s = (i+1)/n with
    the mark indicator dropped.  ``values`` is None when the matrix was
    too large to materialize; the cached summaries are always present.
    """

    s_values: np.ndarray          # i/n for i = 1..n
    z_points: np.ndarray          # lattice marks, one covariate row each
    z_order: np.ndarray           # column k corresponds to sample row z_order[k]
    values: np.ndarray | None
    margin: np.ndarray
    row_sup: np.ndarray           # per-s sup over marks incl. the margin
    col_sup: np.ndarray           # per-mark sup over s
    col_msq: np.ndarray           # per-mark (1/n) sum_i values[i,k]^2
    margin_msq: float

    @property
    def n(self) -> int:
        return self.s_values.shape[0]

    @property
    def d(self) -> int:
        return self.z_points.shape[1]


def _lattice_marks(fit: FitState) -> tuple[np.ndarray, np.ndarray]:
    x = fit.sample.x
    if fit.d == 1:
        order = np.argsort(x[:, 0], kind="stable")
    else:
        order = np.arange(fit.n)
    return x[order], order


def _indicator(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """ind[j, k] = 1 iff x_j <= z_k componentwise."""
    if x.shape[1] == 1:
        return x[:, 0][:, None] <= z[:, 0][None, :]
    return np.all(x[:, None, :] <= z[None, :, :], axis=2)


def _grid_from_values(fit, z, order, values, margin) -> ProcessGrid:
    n = fit.n
    row_sup = np.maximum(np.abs(values).max(axis=1), np.abs(margin))
    return ProcessGrid(
        s_values=np.arange(1, n + 1) / n,
        z_points=z, z_order=order, values=values, margin=margin,
        row_sup=row_sup,
        col_sup=np.abs(values).max(axis=0),
        col_msq=(values**2).sum(axis=0) / n,
        margin_msq=float((margin**2).sum() / n),
    )


def build_grid(fit: FitState, materialize_limit: int = MATERIALIZE_LIMIT) -> ProcessGrid:
    """Evaluate the process on its jump lattice via the prefix-sum recurrence."""
    n = fit.n
    u = fit.residuals * fit.weights
    z, order = _lattice_marks(fit)
    root_n = np.sqrt(n)
    margin = np.cumsum(u) / root_n
    if n <= materialize_limit:
        ind = _indicator(fit.sample.x, z)
        values = np.cumsum(u[:, None] * ind, axis=0) / root_n
        return _grid_from_values(fit, z, order, values, margin)

    # Streaming pass: one prefix row kept, summaries accumulated.
    prefix = np.zeros(n)
    row_sup = np.empty(n)
    col_sup = np.zeros(n)
    col_msq = np.zeros(n)
    x = fit.sample.x
    for i in range(n):
        if fit.d == 1:
            ind_i = x[i, 0] <= z[:, 0]
        else:
            ind_i = np.all(x[i] <= z, axis=1)
        prefix += u[i] * ind_i
        scaled = np.abs(prefix)
        col_sup = np.maximum(col_sup, scaled)
        col_msq += prefix**2
        row_sup[i] = max(scaled.max() / root_n, abs(margin[i]))
    return ProcessGrid(
        s_values=np.arange(1, n + 1) / n,
        z_points=z, z_order=order, values=None, margin=margin,
        row_sup=row_sup, col_sup=col_sup / root_n,
        col_msq=col_msq / (n * n),
        margin_msq=float((margin**2).sum() / n),
    )


def brute_force_grid(fit: FitState) -> ProcessGrid:
    """Same lattice, evaluated from scratch per cell (oracle for build_grid)."""
    n = fit.n
    u = fit.residuals * fit.weights
    z, order = _lattice_marks(fit)
    x = fit.sample.x
    root_n = np.sqrt(n)
    values = np.empty((n, n))
    margin = np.empty(n)
    for i in range(n):
        head_u = u[: i + 1]
        head_x = x[: i + 1]
        margin[i] = head_u.sum() / root_n
        for k in range(n):
            inside = np.all(head_x <= z[k], axis=1)
            values[i, k] = (head_u * inside).sum() / root_n
    return _grid_from_values(fit, z, order, values, margin)


def sup_abs(grid: ProcessGrid, over: str = "full"):
    """Lattice suprema of |process|.

    ``full`` and ``per-s`` include the margin (the mark +inf) as an
    extra lattice column; ``per-z`` covers the observed marks only.
    """
    if over == "full":
        return float(grid.row_sup.max())
    if over == "margin":
        return float(np.abs(grid.margin).max())
    if over == "per-s":
        return grid.row_sup.copy()
    if over == "per-z":
        return grid.col_sup.copy()
    raise ContractError(f"unknown reduction {over!r}")
