"""Product kernels with vanishing higher-order moments.

The regression estimator uses a kernel that is a product of one
univariate profile over the covariate coordinates.  Profiles are
compactly supported, symmetric, integrate to one, and have vanishing
moments up to ``order - 1``; these properties are checked numerically
when a :class:`KernelSpec` is constructed.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import ContractError

__all__ = ["KernelSpec", "kernel_moment", "get_kernel", "PROFILES"]

# Tolerance for the quadrature checks of the moment conditions.
MOMENT_TOL = 1e-10


def _epanechnikov(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def _epanechnikov4(u):
    # Fourth-order variant: moments 1..3 vanish, bias is O(h^4).
    u = np.asarray(u, dtype=float)
    u2 = u * u
    return np.where(np.abs(u) <= 1.0, (15.0 / 32.0) * (3.0 - 10.0 * u2 + 7.0 * u2 * u2), 0.0)


#: name -> (profile, order, support half-width)
PROFILES: dict[str, tuple[Callable, int, float]] = {
    "epanechnikov": (_epanechnikov, 2, 1.0),
    "epanechnikov4": (_epanechnikov4, 4, 1.0),
}


@dataclass(frozen=True)
class KernelSpec:
    """A validated product kernel.

    Parameters
    ----------
    name : str
        Key into :data:`PROFILES`.
    d : int
        Covariate dimension; the kernel is the d-fold product of the
        univariate profile.
    """

    name: str
    d: int = 1
    order: int = field(init=False)
    support: float = field(init=False)

    def __post_init__(self):
        if self.name not in PROFILES:
            raise ContractError(f"unknown kernel profile {self.name!r}; "
                                f"choose from {sorted(PROFILES)}")
        if self.d < 1:
            raise ContractError("kernel dimension must be >= 1")
        profile, order, support = PROFILES[self.name]
        if order < 2 or order % 2 != 0:
            raise ContractError("kernel order must be an even integer >= 2")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "support", support)
        m0 = kernel_moment(self, 0)
        if abs(m0 - 1.0) > MOMENT_TOL:
            raise ContractError(f"kernel {self.name!r} does not integrate to 1 ({m0})")
        for k in range(1, order):
            mk = kernel_moment(self, k)
            if abs(mk) > MOMENT_TOL:
                raise ContractError(
                    f"kernel {self.name!r} has non-vanishing moment {k} ({mk})")

    @property
    def profile(self) -> Callable:
        return PROFILES[self.name][0]

    @property
    def peak(self) -> float:
        """Maximum of the d-variate product kernel."""
        u = np.linspace(-self.support, self.support, 20001)
        return float(np.max(self.profile(u))) ** self.d

    def profile_values(self, u):
        """Evaluate the univariate profile elementwise."""
        return self.profile(u)

    def product_values(self, u):
        """Evaluate the product kernel on points of shape (..., d)."""
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.d:
            raise ContractError(f"expected trailing dimension {self.d}, got {u.shape[-1]}")
        return np.prod(self.profile(u), axis=-1)


def kernel_moment(kernel: KernelSpec, k: int) -> float:
    """k-th moment of the univariate profile, by adaptive quadrature."""
    if k < 0:
        raise ContractError("moment order must be >= 0")
    profile, _, support = PROFILES[kernel.name]
    val, _ = quad(lambda u: profile(u) * u**k, -support, support,
                  epsabs=1e-13, epsrel=1e-13, limit=200)
    return float(val)


def get_kernel(name: str, d: int = 1) -> KernelSpec:
    return KernelSpec(name=name, d=d)
