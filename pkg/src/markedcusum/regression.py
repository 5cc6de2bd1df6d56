"""Nadaraya-Watson regression with cross-validated bandwidth.

Fits the local-average estimator

    m_hat(x) = sum_j K((x - X_j)/h) Y_j / sum_j K((x - X_j)/h)

with a product kernel, flags query points whose denominator falls
below a degeneracy threshold, and provides the leave-one-out
bandwidth selector, the kernel variance estimator and the residual
second-moment normalizer used by the tests.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ContractError, InvalidInputError, NoValidBandwidthError
from .kernels import KernelSpec

__all__ = [
    "Sample", "WeightWindow", "FitState",
    "nw_predict", "nw_fit", "cv_bandwidth", "default_bandwidth_grid",
    "variance_estimate", "variance_at_points", "c_hat", "degeneracy_threshold",
]


@dataclass(frozen=True)
class Sample:
    """Observed series as a regression sample.

    ``x`` holds one covariate row per observation (n x d), ``y`` the
    responses.  ``meta`` optionally carries time labels of length n
    (e.g. years) used only for reporting.
    """

    x: np.ndarray
    y: np.ndarray
    meta: tuple | None = None

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if x.ndim != 2:
            raise InvalidInputError("covariates must form an n x d matrix")
        if x.shape[0] != y.shape[0]:
            raise InvalidInputError(
                f"{x.shape[0]} covariate rows but {y.shape[0]} responses")
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise InvalidInputError("need n >= 1 observations and d >= 1 covariates")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise InvalidInputError("sample contains non-finite entries")
        if self.meta is not None and len(self.meta) != y.shape[0]:
            raise InvalidInputError("meta labels must have length n")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class WeightWindow:
    """Indicator window: 1 on a box (or everywhere), 0 outside."""

    kind: str = "everywhere"
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("everywhere", "box"):
            raise ContractError(f"unknown window kind {self.kind!r}")
        if self.kind == "box":
            lo = np.asarray(self.lo, dtype=float).ravel()
            hi = np.asarray(self.hi, dtype=float).ravel()
            if lo.shape != hi.shape or np.any(lo > hi):
                raise ContractError("box window needs lo <= hi per coordinate")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)

    @classmethod
    def everywhere(cls) -> "WeightWindow":
        return cls(kind="everywhere")

    @classmethod
    def box_symmetric(cls, c, d: int = 1) -> "WeightWindow":
        c = np.broadcast_to(np.asarray(c, dtype=float), (d,))
        return cls(kind="box", lo=-c, hi=c)

    @classmethod
    def from_quantiles(cls, sample: Sample, tau: float = 0.01) -> "WeightWindow":
        """Box spanning the per-coordinate (tau, 1-tau) sample quantiles."""
        lo = np.quantile(sample.x, tau, axis=0)
        hi = np.quantile(sample.x, 1.0 - tau, axis=0)
        return cls(kind="box", lo=lo, hi=hi)

    def weights(self, x: np.ndarray) -> np.ndarray:
        """0/1 weight for each row of x."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "everywhere":
            return np.ones(x.shape[0])
        if x.shape[1] != self.lo.shape[0]:
            raise ContractError("window dimension does not match covariates")
        inside = np.all((x >= self.lo) & (x <= self.hi), axis=1)
        return inside.astype(float)


@dataclass(frozen=True)
class FitState:
    """A fitted regression: inputs, fitted values, residuals, flags."""

    sample: Sample
    kernel: KernelSpec
    h: float
    fitted: np.ndarray
    residuals: np.ndarray
    window: WeightWindow
    degenerate: np.ndarray

    @property
    def n(self) -> int:
        return self.sample.n

    @property
    def d(self) -> int:
        return self.sample.d

    @property
    def weights(self) -> np.ndarray:
        """Window weight per point, zeroed where the fit was degenerate."""
        w = self.window.weights(self.sample.x)
        return w * (~self.degenerate)


@lru_cache(maxsize=16)
def _profile_peak(name: str) -> float:
    from .kernels import PROFILES
    profile, _, support = PROFILES[name]
    u = np.linspace(-support, support, 20001)
    return float(np.max(profile(u)))


def degeneracy_threshold(kernel: KernelSpec, n: int) -> float:
    """Denominators below this are treated as numerically empty."""
    return 1e-12 * _profile_peak(kernel.name) ** kernel.d * n


def _check_bandwidth(h) -> float:
    h = float(h)
    if not np.isfinite(h) or h <= 0:
        raise InvalidInputError(f"bandwidth must be positive and finite, got {h}")
    return h


def _kernel_weight_matrix(x, query, kernel: KernelSpec, h: float) -> np.ndarray:
    """Kernel weights K((q_i - X_j)/h), shape (m, n)."""
    diffs = (query[:, None, :] - x[None, :, :]) / h
    return kernel.product_values(diffs)


def nw_predict(sample: Sample, kernel: KernelSpec, h, query) -> tuple[float, bool]:
    """Evaluate the estimator at one query point.

    Returns ``(value, degenerate)``; a degenerate denominator yields
    value 0 with the flag set.
    """
    h = _check_bandwidth(h)
    q = np.asarray(query, dtype=float).reshape(1, -1)
    if q.shape[1] != sample.d:
        raise InvalidInputError(f"query has dimension {q.shape[1]}, sample has {sample.d}")
    if not np.isfinite(q).all():
        raise InvalidInputError("query contains non-finite entries")
    w = _kernel_weight_matrix(sample.x, q, kernel, h)[0]
    denom = w.sum()
    if denom < degeneracy_threshold(kernel, sample.n):
        return 0.0, True
    return float(w @ sample.y / denom), False


def nw_fit(sample: Sample, kernel: KernelSpec, h, window: WeightWindow | None = None) -> FitState:
    """Fit at all sample points; residuals satisfy fitted + residual = y."""
    h = _check_bandwidth(h)
    if window is None:
        window = WeightWindow.everywhere()
    w = _kernel_weight_matrix(sample.x, sample.x, kernel, h)
    denom = w.sum(axis=1)
    degenerate = denom < degeneracy_threshold(kernel, sample.n)
    safe = np.where(degenerate, 1.0, denom)
    fitted = np.where(degenerate, 0.0, w @ sample.y / safe)
    return FitState(sample=sample, kernel=kernel, h=h, fitted=fitted,
                    residuals=sample.y - fitted, window=window,
                    degenerate=degenerate)


def default_bandwidth_grid(sample: Sample, size: int = 30) -> np.ndarray:
    """Log-spaced candidates on [0.1, 2] x n^(-1/(4+d)) x covariate scale."""
    stds = sample.x.std(axis=0, ddof=1) if sample.n > 1 else np.ones(sample.d)
    stds = np.where(stds > 0, stds, 1.0)
    scale = float(np.exp(np.mean(np.log(stds))))  # geometric mean across coordinates
    rate = sample.n ** (-1.0 / (4.0 + sample.d))
    return np.geomspace(0.1 * scale * rate, 2.0 * scale * rate, size)


# Candidate bandwidths keeping fewer than this fraction of points with a
# usable leave-one-out fit are not comparable on error alone: dropping
# points shrinks the criterion for free.  Such candidates lose to any
# candidate above the gate.
MIN_USABLE_FRACTION = 0.9


def _loo_scores(sample: Sample, kernel: KernelSpec, grid) -> np.ndarray:
    """Leave-one-out mean squared error and usable fraction per bandwidth.

    Points whose leave-one-out denominator is degenerate are dropped
    from the criterion.  Returns an array of (mse, usable_fraction)
    rows; a bandwidth with no usable point gets mse = +inf.
    """
    x, y, n = sample.x, sample.y, sample.n
    diffs = x[:, None, :] - x[None, :, :]
    eye = np.eye(n, dtype=bool)
    scores = np.empty((len(grid), 2))
    for g, h in enumerate(grid):
        w = kernel.product_values(diffs / h)
        w[eye] = 0.0
        denom = w.sum(axis=1)
        ok = denom >= degeneracy_threshold(kernel, n)
        if not ok.any():
            scores[g] = (np.inf, 0.0)
            continue
        pred = (w[ok] @ y) / denom[ok]
        scores[g] = (float(np.mean((y[ok] - pred) ** 2)), ok.mean())
    return scores


def cv_bandwidth(sample: Sample, kernel: KernelSpec, grid) -> float:
    """Grid element minimizing the leave-one-out criterion (ties -> smaller h)."""
    grid = np.sort(np.asarray(grid, dtype=float).ravel())
    if grid.size == 0:
        raise ContractError("bandwidth grid is empty")
    if np.any(grid <= 0) or not np.isfinite(grid).all():
        raise InvalidInputError("bandwidth grid must be positive and finite")
    scores = _loo_scores(sample, kernel, grid)
    usable = scores[:, 1] > 0.0
    if not usable.any():
        raise NoValidBandwidthError(
            "every candidate bandwidth left all leave-one-out fits degenerate")
    gated = scores[:, 1] >= MIN_USABLE_FRACTION
    pool = gated if gated.any() else usable
    pooled = np.where(pool, scores[:, 0], np.inf)
    return float(grid[int(np.argmin(pooled))])


def variance_estimate(fit: FitState, query) -> tuple[float, bool]:
    """Kernel estimate of the conditional variance at a query point.

    Squared deviations are taken from the fit at the query point
    itself, not from the per-observation fitted values.
    """
    sample, kernel, h = fit.sample, fit.kernel, fit.h
    q = np.asarray(query, dtype=float).reshape(1, -1)
    if not np.isfinite(q).all():
        raise InvalidInputError("query contains non-finite entries")
    w = _kernel_weight_matrix(sample.x, q, kernel, h)[0]
    denom = w.sum()
    if denom < degeneracy_threshold(kernel, sample.n):
        return 0.0, True
    m_q = float(w @ sample.y / denom)
    return float(w @ (sample.y - m_q) ** 2 / denom), False


def variance_at_points(fit: FitState, y: np.ndarray | None = None) -> np.ndarray:
    """Conditional-variance estimates at all sample points (degenerate -> 0).

    ``y`` overrides the responses (used when re-estimating on bootstrap
    responses with the original design and bandwidth).
    """
    sample, kernel, h = fit.sample, fit.kernel, fit.h
    if y is None:
        y = sample.y
    w = _kernel_weight_matrix(sample.x, sample.x, kernel, h)
    denom = w.sum(axis=1)
    degenerate = denom < degeneracy_threshold(kernel, sample.n)
    safe = np.where(degenerate, 1.0, denom)
    m = w @ y / safe
    var = np.einsum("ij,ij->i", w, (y[None, :] - m[:, None]) ** 2) / safe
    return np.where(degenerate, 0.0, var)


def c_hat(fit: FitState) -> float:
    """Windowed mean of squared residuals, n^-1 sum resid^2 * weight."""
    return float(np.sum(fit.residuals**2 * fit.weights) / fit.n)
