import numpy as np
import pytest

from markedcusum import Sample, WeightWindow, get_kernel, nw_fit
from markedcusum.regression import FitState


@pytest.fixture
def kernel4():
    return get_kernel("epanechnikov4", d=1)


def random_sample(rng, n, d=1, hetero=False):
    """Smooth signal plus noise on covariates with a few modes."""
    x = rng.uniform(-2.0, 2.0, size=(n, d))
    signal = np.sin(x).sum(axis=1) + 0.3 * (x**2).sum(axis=1)
    scale = 1.0 + 0.5 * np.abs(x[:, 0]) if hetero else 1.0
    return Sample(x=x, y=signal + scale * rng.standard_normal(n))


def synthetic_fit(residuals, x=None, window=None):
    """FitState with prescribed residuals (fitted = 0), for grid fixtures."""
    residuals = np.asarray(residuals, dtype=float)
    n = residuals.size
    if x is None:
        x = np.arange(n, dtype=float)[:, None]
    else:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[0] != n:
            x = x.T
    sample = Sample(x=x, y=residuals.copy())
    return FitState(
        sample=sample, kernel=get_kernel("epanechnikov4", d=x.shape[1]),
        h=1.0, fitted=np.zeros(n), residuals=residuals,
        window=window or WeightWindow.everywhere(),
        degenerate=np.zeros(n, dtype=bool),
    )


def fitted_fixture(rng, n, d=1, hetero=False, kernel_name="epanechnikov4"):
    """A real fitted model on random data with a mid-grid bandwidth."""
    sample = random_sample(rng, n, d, hetero)
    kernel = get_kernel(kernel_name, d=d)
    h = float(1.0 * n ** (-1.0 / (4 + d)) * sample.x.std())
    return nw_fit(sample, kernel, h)
