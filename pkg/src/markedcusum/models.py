"""Data generators for the Monte Carlo study.

Seven autoregression / regression designs with a one-off change of the
conditional mean at observation floor(n/2) when the break size is
nonzero.  All recursions start at zero, run a discarded burn-in, and
draw standard normal innovations.

model1            exogenous AR(1) covariate, heteroscedastic errors,
                  localized break m(x) += delta0 * x * exp(-0.8 x^2)
model2_homo       AR(1), sigma^2 = 1, slope -0.9 -> -0.9 + delta0
model2_hetero     AR(1), sigma^2(x) = 1 + 0.1 x^2, same break
model3            AR(1), slope 0.9 -> 0.9 - delta0, and a variance
                  change 1 + 0.1 x^2 -> 1 + 0.8 x^2 at floor(n * t0)
model4_ar2        AR(2), slope on lag 1: 0.9 -> 0.9 - delta0
model4_ar2arch1   AR(2) with sigma^2 = 1 + 0.4 x1^2
model4_ar2arch2   AR(2) with sigma^2 = 1 + 0.2 x1^2 + 0.2 x2^2
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .regression import Sample

__all__ = ["MODEL_IDS", "ModelSpec", "generate"]

MODEL_IDS = ("model1", "model2_homo", "model2_hetero", "model3",
             "model4_ar2", "model4_ar2arch1", "model4_ar2arch2")


@dataclass(frozen=True)
class ModelSpec:
    """One simulation design: model id, sample size, break size, seeds."""

    id: str
    n: int
    delta0: float = 0.0
    t0: float = 0.5          # variance-change fraction, model3 only
    burn_in: int = 500
    seed: int | None = None

    def __post_init__(self):
        if self.id not in MODEL_IDS:
            raise ContractError(f"unknown model id {self.id!r}; choose from {MODEL_IDS}")
        if self.n < 2:
            raise ContractError("need n >= 2")
        if not 0.0 < self.t0 < 1.0:
            raise ContractError("t0 must lie in (0, 1)")
        if self.burn_in < 0:
            raise ContractError("burn-in must be >= 0")

    @property
    def d(self) -> int:
        return 2 if self.id.startswith("model4") else 1


def _rng_for(spec: ModelSpec, rng) -> np.random.Generator:
    if rng is not None:
        return rng
    if spec.seed is None:
        raise ContractError("provide a generator or set ModelSpec.seed")
    return np.random.default_rng(spec.seed)


def _generate_model1(spec: ModelSpec, rng) -> Sample:
    n, burn = spec.n, spec.burn_in
    xi = rng.standard_normal(burn + n)
    eps = rng.standard_normal(n)
    x = 0.0
    xs = np.empty(burn + n)
    for t in range(burn + n):
        x = 0.4 * x + xi[t]
        xs[t] = x
    xv = xs[burn:]
    half = n // 2
    m = 0.5 * xv
    m[half:] += spec.delta0 * np.exp(-0.8 * xv[half:] ** 2) * xv[half:]
    y = m + np.sqrt(1.0 + 0.5 * xv**2) * eps
    return Sample(x=xv[:, None], y=y)


def _generate_ar1(spec: ModelSpec, rng) -> Sample:
    n, burn = spec.n, spec.burn_in
    eps = rng.standard_normal(burn + n)
    if spec.id == "model3":
        pre_slope, post_slope = 0.9, 0.9 - spec.delta0
    else:
        pre_slope, post_slope = -0.9, -0.9 + spec.delta0
    mean_break = burn + n // 2    # observations after this use the post slope
    var_break = burn + int(n * spec.t0) if spec.id == "model3" else None
    y = 0.0
    lag = np.empty(n)
    obs = np.empty(n)
    for t in range(burn + n):
        prev = y
        slope = pre_slope if t < mean_break else post_slope
        if spec.id == "model2_homo":
            sd = 1.0
        elif spec.id == "model2_hetero":
            sd = np.sqrt(1.0 + 0.1 * prev * prev)
        else:  # model3
            coef = 0.1 if t < var_break else 0.8
            sd = np.sqrt(1.0 + coef * prev * prev)
        y = slope * prev + sd * eps[t]
        if t >= burn:
            lag[t - burn] = prev
            obs[t - burn] = y
    return Sample(x=lag[:, None], y=obs)


def _generate_ar2(spec: ModelSpec, rng) -> Sample:
    n, burn = spec.n, spec.burn_in
    eps = rng.standard_normal(burn + n)
    mean_break = burn + n // 2
    y1 = y2 = 0.0                 # lags 1 and 2
    lags = np.empty((n, 2))
    obs = np.empty(n)
    for t in range(burn + n):
        slope = 0.9 if t < mean_break else 0.9 - spec.delta0
        if spec.id == "model4_ar2":
            sd = 1.0
        elif spec.id == "model4_ar2arch1":
            sd = np.sqrt(1.0 + 0.4 * y1 * y1)
        else:
            sd = np.sqrt(1.0 + 0.2 * y1 * y1 + 0.2 * y2 * y2)
        y = slope * y1 - 0.4 * y2 + sd * eps[t]
        if t >= burn:
            lags[t - burn, 0] = y1
            lags[t - burn, 1] = y2
            obs[t - burn] = y
        y2, y1 = y1, y
    return Sample(x=lags, y=obs)


def generate(spec: ModelSpec, rng: np.random.Generator | None = None) -> Sample:
    """Draw one series; lagged responses are embedded as covariates."""
    rng = _rng_for(spec, rng)
    if spec.id == "model1":
        return _generate_model1(spec, rng)
    if spec.id.startswith("model2") or spec.id == "model3":
        return _generate_ar1(spec, rng)
    return _generate_ar2(spec, rng)
