"""Wild bootstrap for the marked CUSUM tests.

Bootstrap responses keep the observed covariates fixed and perturb the
fitted model by multiplier-scaled residuals,

    Y*_i = m_hat(X_i) + U_hat_i * eta_i,

with i.i.d. mean-0 variance-1 multipliers.  Each replication refits the
regression with the original kernel and bandwidth, rebuilds the process
grid from the refit residuals and records the requested statistics; the
observed statistic is compared with the empirical (1-alpha)-quantile of
the replicated values.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .process import build_grid
from .regression import FitState, Sample, _kernel_weight_matrix, degeneracy_threshold
from .statistics import compute_statistic

__all__ = ["MULTIPLIER_FAMILIES", "MultiplierSpec", "BootstrapRun",
           "bootstrap_sample", "bootstrap_statistic", "run_bootstrap",
           "run_bootstrap_multi"]

MULTIPLIER_FAMILIES = ("rademacher", "mammen_two_point", "standard_normal")

# Mammen two-point law: values (1 -+ sqrt 5)/2 hit with probabilities
# making the first three moments (0, 1, 1).
_MAMMEN_LO = (1.0 - np.sqrt(5.0)) / 2.0
_MAMMEN_HI = (1.0 + np.sqrt(5.0)) / 2.0
_MAMMEN_P_LO = (np.sqrt(5.0) + 1.0) / (2.0 * np.sqrt(5.0))


@dataclass(frozen=True)
class MultiplierSpec:
    """Multiplier family; all choices have mean 0, variance 1, finite 4th moment."""

    family: str = "standard_normal"

    def __post_init__(self):
        if self.family not in MULTIPLIER_FAMILIES:
            raise ContractError(f"unknown multiplier family {self.family!r}")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.family == "rademacher":
            return rng.integers(0, 2, size=n) * 2.0 - 1.0
        if self.family == "mammen_two_point":
            return np.where(rng.random(n) < _MAMMEN_P_LO, _MAMMEN_LO, _MAMMEN_HI)
        return rng.standard_normal(n)


def bootstrap_sample(fit: FitState, eta) -> Sample:
    """Fixed-design resample: same covariates, responses m_hat + resid * eta."""
    eta = np.asarray(eta, dtype=float).ravel()
    if eta.shape[0] != fit.n:
        raise ContractError(f"multiplier vector has length {eta.shape[0]}, need {fit.n}")
    return Sample(x=fit.sample.x, y=fit.fitted + fit.residuals * eta,
                  meta=fit.sample.meta)


def bootstrap_statistic(fit: FitState, kind: str, eta) -> float:
    """One replication through the plain pipeline (refit, grid, statistic)."""
    from .regression import nw_fit

    star = bootstrap_sample(fit, eta)
    refit = nw_fit(star, fit.kernel, fit.h, fit.window)
    grid = build_grid(refit)
    return compute_statistic(grid, kind, fit=refit).value


class ResamplingEngine:
    """Shared precomputation for repeated refits on the same design.

    The kernel weight matrix, its degeneracy pattern, the window
    weights and the mark indicator lattice depend only on (X, h,
    kernel, window) and are reused across all replications.
    """

    def __init__(self, fit: FitState):
        self.fit = fit
        n = fit.n
        sample, kernel = fit.sample, fit.kernel
        k = _kernel_weight_matrix(sample.x, sample.x, kernel, fit.h)
        denom = k.sum(axis=1)
        self.degenerate = denom < degeneracy_threshold(kernel, n)
        self._k = k
        # same operation order as nw_fit so refits agree bitwise
        self._safe_denom = np.where(self.degenerate, 1.0, denom)
        self.w = fit.window.weights(sample.x) * (~self.degenerate)
        if fit.d == 1:
            self.z_order = np.argsort(sample.x[:, 0], kind="stable")
            z = sample.x[self.z_order]
            self.ind = sample.x[:, 0][:, None] <= z[:, 0][None, :]
        else:
            self.z_order = np.arange(n)
            z = sample.x
            self.ind = np.all(sample.x[:, None, :] <= z[None, :, :], axis=2)
        self.root_n = np.sqrt(n)

    def statistics_for(self, y: np.ndarray, kinds) -> dict[str, float]:
        """Refit on responses ``y`` and evaluate the requested statistics."""
        n = self.fit.n
        fitted = np.where(self.degenerate, 0.0, self._k @ y / self._safe_denom)
        resid = y - fitted
        u = resid * self.w
        margin = np.cumsum(u) / self.root_n
        values = np.cumsum(u[:, None] * self.ind, axis=0) / self.root_n
        out = {}
        need_w = [k for k in kinds if k in ("tn3", "tn4")]
        if need_w:
            m = fitted[:, None]
            var = np.einsum("ij,ij->i", self._k, (y[None, :] - m) ** 2) / self._safe_denom
            sigma2 = np.where(self.degenerate, 0.0, var)[self.z_order]
            row_w = (values**2) @ sigma2 / n
        for kind in kinds:
            if kind == "tn1":
                out[kind] = float(max(np.abs(values).max(), np.abs(margin).max()))
            elif kind == "tn2":
                out[kind] = float(max(((values**2).sum(axis=0) / n).max(),
                                      (margin**2).sum() / n))
            elif kind == "ks":
                out[kind] = float(np.abs(margin).max())
            elif kind == "cm":
                out[kind] = float((margin**2).sum() / n)
            elif kind == "tn3":
                out[kind] = float(row_w.max())
            elif kind == "tn4":
                out[kind] = float(row_w.mean())
            else:
                raise ContractError(f"unknown statistic kind {kind!r}")
        return out


@dataclass(frozen=True)
class BootstrapRun:
    """Observed statistic against its bootstrap distribution."""

    kind: str
    observed: float
    values: np.ndarray
    p_value: float
    alpha: float
    critical_value: float
    reject: bool
    B: int
    seed: object        # master seed entropy for the multiplier streams
    multiplier: str


def _finish_run(kind, observed, values, alpha, seed, family) -> BootstrapRun:
    B = values.size
    p = (1.0 + float(np.sum(values >= observed))) / (B + 1.0)
    crit = float(np.quantile(values, 1.0 - alpha, method="inverted_cdf"))
    return BootstrapRun(kind=kind, observed=float(observed), values=values,
                        p_value=p, alpha=alpha, critical_value=crit,
                        reject=bool(observed > crit), B=B, seed=seed,
                        multiplier=family)


def run_bootstrap_multi(fit: FitState, kinds, B: int, alpha: float,
                        multiplier: MultiplierSpec | None = None,
                        seed=0,
                        engine: ResamplingEngine | None = None) -> dict[str, BootstrapRun]:
    """Run one set of B replications and score several statistics on it.

    Replication b draws its multipliers from substream b of the master
    seed (an int or a numpy SeedSequence), so results do not depend on
    evaluation order.
    """
    if B < 19:
        raise ContractError("need at least 19 bootstrap replications")
    if multiplier is None:
        multiplier = MultiplierSpec()
    kinds = list(kinds)
    if engine is None:
        engine = ResamplingEngine(fit)
    observed = engine.statistics_for(fit.sample.y, kinds)
    star = {kind: np.empty(B) for kind in kinds}
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    children = seed.spawn(B)
    for b, child in enumerate(children):
        eta = multiplier.draw(np.random.default_rng(child), fit.n)
        stats_b = engine.statistics_for(fit.fitted + fit.residuals * eta, kinds)
        for kind in kinds:
            star[kind][b] = stats_b[kind]
    return {kind: _finish_run(kind, observed[kind], star[kind], alpha,
                              seed.entropy, multiplier.family)
            for kind in kinds}


def run_bootstrap(fit: FitState, kind: str, B: int, alpha: float,
                  multiplier: MultiplierSpec | None = None,
                  seed: int = 0) -> BootstrapRun:
    """Bootstrap test for a single statistic."""
    return run_bootstrap_multi(fit, [kind], B, alpha, multiplier, seed)[kind]
