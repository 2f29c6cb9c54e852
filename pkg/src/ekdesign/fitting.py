"""Maximum-likelihood fit of the trend and covariance parameters with the smoothness held fixed."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import linalg, optimize
from scipy.spatial.distance import cdist, pdist

from .covariance import CovParams, KernelFamily, kernel_value
from .errors import FitError
from .model import GpModel, GridSpace

__all__ = ["FieldData", "GlsFit", "FitResult", "gls_given_nu", "profile_ml", "default_rho_grid"]

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FieldData:
    """Field values at the candidate points of ``grid``.

    ``mask`` marks observed points; unobserved values may be NaN.
    """

    grid: GridSpace
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if vals.shape != (self.grid.size,):
            raise ValueError(f"need one value per candidate ({self.grid.size}), got {vals.size}")
        object.__setattr__(self, "values", vals)
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool).ravel()
            if mask.shape != vals.shape:
                raise ValueError("mask must have one entry per candidate")
            object.__setattr__(self, "mask", mask)
        if not np.all(np.isfinite(self.y)):
            raise ValueError("observed values must be finite")

    @property
    def observed(self) -> np.ndarray:
        return np.ones(self.grid.size, dtype=bool) if self.mask is None else self.mask

    @property
    def points(self) -> np.ndarray:
        return self.grid.candidates[self.observed]

    @property
    def y(self) -> np.ndarray:
        return self.values[self.observed]


class GlsFit(NamedTuple):
    beta_hat: np.ndarray
    sigma2_hat: float
    neg_log_lik: float


@dataclass(frozen=True)
class FitResult:
    beta_hat: np.ndarray
    sigma2_hat: float
    rho_hat: float
    gamma_fixed: float
    neg_log_lik: float
    trend: str = "constant"
    # (rho, neg_log_lik) of the best point after each refinement evaluation
    history: list = field(default_factory=list, compare=False, repr=False)

    def to_model(self, family: KernelFamily) -> GpModel:
        params = CovParams(rho=self.rho_hat, gamma=self.gamma_fixed)
        return GpModel(family, params, sigma2=self.sigma2_hat, trend=self.trend, beta=tuple(self.beta_hat))

    def to_dict(self) -> dict:
        return {
            "beta_hat": [float(b) for b in self.beta_hat],
            "sigma2_hat": float(self.sigma2_hat),
            "rho_hat": float(self.rho_hat),
            "gamma_fixed": float(self.gamma_fixed),
            "neg_log_lik": float(self.neg_log_lik),
            "trend": self.trend,
        }


def _gls(C, X, y):
    try:
        cho = linalg.cho_factor(C, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise FitError("correlation matrix is not positive definite") from None
    # squared pivots are conditional variances; below this the solve is noise
    if np.min(np.diag(cho[0])) ** 2 < PIVOT_TOL:
        raise FitError("correlation matrix is numerically singular (near-coincident points?)")
    W = linalg.cho_solve(cho, X, check_finite=False)
    try:
        beta = linalg.solve(X.T @ W, W.T @ y, assume_a="pos")
    except (linalg.LinAlgError, ValueError):
        raise FitError("trend matrix is rank deficient on the observed points") from None
    r = y - X @ beta
    n = len(y)
    sigma2 = float(r @ linalg.cho_solve(cho, r, check_finite=False)) / n
    logdet = 2.0 * np.sum(np.log(np.diag(cho[0])))
    nll = 0.5 * n * np.log(2 * np.pi * sigma2) + 0.5 * logdet + 0.5 * n if sigma2 > 0 else -np.inf
    return beta, sigma2, float(nll)


def gls_given_nu(data: FieldData, trend: str, family: KernelFamily, rho: float, gamma: float = 0.5) -> GlsFit:
    """Generalized least squares ``beta_hat`` and the profile ML ``sigma2_hat``.

    ``neg_log_lik`` is the Gaussian negative log-likelihood with ``beta`` and
    ``sigma2`` replaced by their estimates,
    ``n/2 log(2 pi sigma2_hat) + 1/2 log|C| + n/2``.
    """
    pts, y = data.points, data.y
    model = GpModel(family, CovParams(rho=rho, gamma=gamma), trend=trend)
    X = model.basis(pts)
    if len(y) <= X.shape[1]:
        raise FitError(f"need more than {X.shape[1]} observations, got {len(y)}")
    C = kernel_value(family, model.params, cdist(pts, pts))
    np.fill_diagonal(C, 1.0)
    beta, sigma2, nll = _gls(C, X, y)
    return GlsFit(beta, sigma2, nll)


def default_rho_grid(grid: GridSpace, family: KernelFamily, size: int = 40) -> np.ndarray:
    """Log-spaced range values spanning ``[0.05, 2]`` times the domain diameter.

    For the exponential kernel, whose ``rho`` is a decay rate, the grid is
    the reciprocal of that span.
    """
    diam = float(pdist(grid.candidates).max()) if grid.size > 1 else 1.0
    rhos = np.geomspace(0.05 * diam, 2.0 * diam, size)
    return np.sort(1.0 / rhos) if family.variant.value == "exponential" else rhos


def profile_ml(
    data: FieldData,
    trend: str,
    family: KernelFamily,
    gamma_fixed: float = 1.5,
    rho_grid=None,
    rtol: float = 1e-4,
) -> FitResult:
    """Profile-likelihood fit over ``rho`` with the smoothness fixed.

    The profiled negative log-likelihood is minimized over ``rho_grid``
    (default :func:`default_rho_grid`), then refined by golden-section
    search on the bracket around the best grid value.
    """
    pts, y = data.points, data.y
    model = GpModel(family, CovParams(rho=1.0, gamma=gamma_fixed), trend=trend)
    X = model.basis(pts)
    if len(y) <= X.shape[1]:
        raise FitError(f"need more than {X.shape[1]} observations, got {len(y)}")
    dist = cdist(pts, pts)
    rhos = np.sort(np.asarray(default_rho_grid(data.grid, family) if rho_grid is None else rho_grid, dtype=float))
    if rhos.size < 3 or rhos[0] <= 0:
        raise ValueError("rho_grid needs at least three positive values")
    diam = float(pdist(data.grid.candidates).max())
    if family.variant.value != "exponential" and rhos[-1] > 10 * diam:
        raise ValueError(f"rho_grid exceeds ten times the domain diameter ({10 * diam:.4g})")

    cache: dict[float, tuple] = {}

    def nll(rho):
        rho = float(rho)
        if rho not in cache:
            if rho <= 0:
                cache[rho] = (None, np.nan, np.inf)
            else:
                C = kernel_value(family, CovParams(rho=rho, gamma=gamma_fixed), dist)
                np.fill_diagonal(C, 1.0)
                try:
                    cache[rho] = _gls(C, X, y)
                except FitError:
                    cache[rho] = (None, np.nan, np.inf)
        return cache[rho][2]

    values = np.array([nll(r) for r in rhos])
    if not np.any(np.isfinite(values)):
        raise FitError("every rho candidate gave a singular system")
    i = int(np.argmin(values))
    history = []

    def tracked(rho):
        v = nll(rho)
        if not history or v < history[-1][1]:
            history.append((float(rho), float(v)))
        else:
            history.append(history[-1])
        return v

    best = float(rhos[i])
    if 0 < i < len(rhos) - 1:
        tracked(best)
        res = optimize.minimize_scalar(
            tracked, bracket=(rhos[i - 1], best, rhos[i + 1]), method="golden", options={"xtol": rtol}
        )
        if res.fun < cache[best][2]:
            best = float(res.x)
    else:
        log.warning("likelihood is smallest at the edge of the rho grid (rho=%.4g)", best)
    beta, sigma2, value = cache[best]
    return FitResult(np.asarray(beta), float(sigma2), best, float(model.params.smoothness(family)), float(value), trend, history)
