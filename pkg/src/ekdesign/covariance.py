"""Isotropic correlation kernels and their derivatives in the covariance parameters.

Supported families are the exponential kernel ``exp(-nu d)`` (one parameter,
the decay rate), Matérn 3/2 and 5/2 in closed form (range only) and the
general Matérn kernel with free range and smoothness. Matérn arguments use
either ``d/rho`` (``Scaling.PLAIN``) or ``2 d sqrt(gamma)/rho``
(``Scaling.SQRT_GAMMA``).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special
from scipy.spatial.distance import cdist

from . import special as sf
from .errors import DuplicatePointError, SingularMatrixError

__all__ = [
    "Variant",
    "Scaling",
    "KernelFamily",
    "CovParams",
    "kernel_value",
    "kernel_grad_nu",
    "cov_matrix",
    "cov_matrix_grads",
    "cross_cov",
    "cholesky_jitter",
    "JITTERS",
]

#: Diagonal loadings tried in turn when a correlation matrix fails Cholesky.
JITTERS = (0.0, 1e-10, 1e-8)


class Variant(str, enum.Enum):
    EXPONENTIAL = "exponential"
    MATERN32 = "matern32"
    MATERN52 = "matern52"
    MATERN = "matern"


class Scaling(str, enum.Enum):
    PLAIN = "plain"
    SQRT_GAMMA = "sqrt_gamma"


_FIXED_GAMMA = {Variant.MATERN32: 1.5, Variant.MATERN52: 2.5}


@dataclass(frozen=True)
class KernelFamily:
    variant: Variant = Variant.EXPONENTIAL
    scaling: Scaling = Scaling.PLAIN

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "scaling", Scaling(self.scaling))


@dataclass(frozen=True)
class CovParams:
    """Covariance parameters ``nu = (rho, gamma)``.

    For the exponential family ``rho`` holds the decay rate, so the kernel is
    ``exp(-rho d)``; ``gamma`` is unused there. ``free`` flags which of
    ``(rho, gamma)`` are estimated and therefore enter the information
    matrices.
    """

    rho: float
    gamma: float = 0.5
    free: tuple[bool, bool] = (True, False)

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "free", tuple(bool(f) for f in self.free))

    def smoothness(self, family: KernelFamily) -> float:
        return _FIXED_GAMMA.get(family.variant, self.gamma)

    def free_names(self, family: KernelFamily) -> list[str]:
        names = []
        if self.free[0]:
            names.append("rho")
        if self.free[1]:
            if family.variant is not Variant.MATERN:
                raise ValueError(f"gamma cannot be free for the {family.variant.value} kernel")
            names.append("gamma")
        return names

    def replace(self, **kw) -> "CovParams":
        return CovParams(**{"rho": self.rho, "gamma": self.gamma, "free": self.free, **kw})


def _matern_sqrt_gamma(rho, gamma, d):
    """Matérn value and (d/drho, d/dgamma) with argument 2 d sqrt(gamma)/rho."""
    d = np.asarray(d, dtype=float)
    pos = d > 0
    value = np.ones_like(d)
    d_rho = np.zeros_like(d)
    d_gamma = np.zeros_like(d)
    if np.any(pos):
        w = d[pos] * math.sqrt(gamma) / rho
        u = 2.0 * w
        k_g = special.kv(gamma, u)
        k_gm1 = special.kv(gamma - 1.0, u)
        pref = 2.0 * w**gamma / special.gamma(gamma)
        value[pos] = pref * k_g
        d_rho[pos] = 2.0 * pref * w * k_gm1 / rho
        d_gamma[pos] = pref * (
            sf.bessel_k_dorder(gamma, u)
            + k_g * (np.log(w) - special.psi(gamma))
            - w / gamma * k_gm1
        )
    return value, d_rho, d_gamma


def _matern_general(family, rho, gamma, d):
    if family.scaling is Scaling.SQRT_GAMMA:
        return _matern_sqrt_gamma(rho, gamma, d)
    # plain argument d/rho equals the sqrt-gamma argument with range 2 sqrt(gamma) rho
    s = 2.0 * math.sqrt(gamma)
    value, a_rho, a_gamma = _matern_sqrt_gamma(s * rho, gamma, d)
    return value, s * a_rho, a_gamma + a_rho * rho / math.sqrt(gamma)


def _argument(family, params, d):
    if family.scaling is Scaling.SQRT_GAMMA:
        return 2.0 * d * math.sqrt(params.smoothness(family)) / params.rho
    return d / params.rho


def kernel_value(family: KernelFamily, params: CovParams, d):
    """Correlation at distance(s) ``d``; exactly 1 at ``d = 0``."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distances must be non-negative")
    v = family.variant
    if v is Variant.EXPONENTIAL:
        out = np.exp(-params.rho * d)
    elif v is Variant.MATERN32:
        u = _argument(family, params, d)
        out = (1.0 + u) * np.exp(-u)
    elif v is Variant.MATERN52:
        u = _argument(family, params, d)
        out = (1.0 + u + u * u / 3.0) * np.exp(-u)
    else:
        out = _matern_general(family, params.rho, params.gamma, d)[0]
    return float(out) if out.ndim == 0 else out


def kernel_grad_nu(family: KernelFamily, params: CovParams, d) -> np.ndarray:
    """Derivatives of the correlation in the free parameters.

    Returns an array of shape ``(q,) + shape(d)`` ordered as
    ``params.free_names(family)``. Entries at ``d = 0`` are zero.
    """
    d = np.asarray(d, dtype=float)
    names = params.free_names(family)
    v = family.variant
    rows = []
    if v is Variant.EXPONENTIAL:
        if names:
            rows.append(-d * np.exp(-params.rho * d))
    elif v in (Variant.MATERN32, Variant.MATERN52):
        if names:
            u = _argument(family, params, d)
            if v is Variant.MATERN32:
                rows.append(u * u * np.exp(-u) / params.rho)
            else:
                rows.append(u * u * (1.0 + u) * np.exp(-u) / (3.0 * params.rho))
    else:
        _, d_rho, d_gamma = _matern_general(family, params.rho, params.gamma, d)
        grads = {"rho": d_rho, "gamma": d_gamma}
        rows = [grads[n] for n in names]
    if not rows:
        return np.zeros((0,) + d.shape)
    return np.stack(rows)


def _distances(a, b=None):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return cdist(a, a if b is None else np.atleast_2d(np.asarray(b, dtype=float)))


def _check_distinct(dist):
    n = dist.shape[0]
    off = dist[~np.eye(n, dtype=bool)]
    if np.any(off == 0.0):
        raise DuplicatePointError("points must be pairwise distinct (no replications)")


def cov_matrix(family: KernelFamily, params: CovParams, points) -> np.ndarray:
    """Correlation matrix ``C_nu`` of a set of distinct points."""
    dist = _distances(points)
    _check_distinct(dist)
    c = kernel_value(family, params, dist)
    np.fill_diagonal(c, 1.0)
    return c


def cov_matrix_grads(family: KernelFamily, params: CovParams, points) -> np.ndarray:
    """Stack of ``dC_nu/dnu_i`` matrices, shape ``(q, n, n)``."""
    dist = _distances(points)
    _check_distinct(dist)
    g = kernel_grad_nu(family, params, dist)
    idx = np.arange(dist.shape[0])
    g[:, idx, idx] = 0.0
    return g


def cross_cov(family: KernelFamily, params: CovParams, design_points, x, grad=False):
    """Correlations between ``x`` and each design point.

    With ``grad=True`` returns ``(c, dc)`` where ``dc`` has shape ``(q, n)``.
    """
    dist = _distances(design_points, np.reshape(np.asarray(x, dtype=float), (1, -1)))[:, 0]
    c = np.atleast_1d(kernel_value(family, params, dist))
    if not grad:
        return c
    return c, kernel_grad_nu(family, params, dist)


def cholesky_jitter(c: np.ndarray):
    """Cholesky factor of ``c`` usable with :func:`scipy.linalg.cho_solve`.

    Retries with small diagonal loadings (``JITTERS``) before giving up.
    """
    n = c.shape[0]
    for jitter in JITTERS:
        try:
            return linalg.cho_factor(c + jitter * np.eye(n), lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
    raise SingularMatrixError("correlation matrix is not positive definite even after jitter")
