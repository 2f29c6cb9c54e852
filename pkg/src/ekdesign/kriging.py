"""Universal kriging, the corrected (empirical) kriging variance and MEK."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .covariance import cholesky_jitter, cov_matrix, cov_matrix_grads, kernel_grad_nu, kernel_value
from .errors import SingularMatrixError
from .information import _blocks, v_nu
from .model import Design, GpModel, GridSpace

__all__ = [
    "KrigingResult",
    "MekResult",
    "kriging_weights",
    "predict",
    "kriging_variance",
    "weight_jacobian",
    "corrected_kriging_variance",
    "ek_surface",
    "mek",
    "simulate_field",
    "design_v_nu",
]

NEG_TOL = 1e-10


@dataclass(frozen=True)
class KrigingResult:
    prediction: float
    variance: float
    corrected_variance: float


@dataclass(frozen=True)
class MekResult:
    value: float
    index: int
    point: np.ndarray


class KrigingSystem:
    """Factorized kriging system for one design.

    Takes the design correlation matrix ``C``, its derivatives ``dC``
    (shape ``(q, n, n)``) and trend matrix ``X``; all per-location methods
    work on stacks of locations given by their correlation rows ``c``
    (shape ``(N, n)``), derivative rows ``dc`` (``(q, N, n)``) and trend rows
    ``F`` (``(N, p)``).
    """

    def __init__(self, C, dC, X, sigma2):
        self.C, self.dC, self.X, self.sigma2 = C, dC, X, float(sigma2)
        self.cho = cholesky_jitter(C)
        self.W = linalg.cho_solve(self.cho, X, check_finite=False)
        try:
            self.s_cho = linalg.cho_factor(X.T @ self.W, lower=True, check_finite=False)
        except linalg.LinAlgError:
            raise SingularMatrixError("trend is rank deficient on this design") from None
        # S^-1 W^T, reused by weights and by the projector in the Jacobian
        self.SiWt = linalg.cho_solve(self.s_cho, self.W.T, check_finite=False)

    def weights(self, c, F):
        ci_c = linalg.cho_solve(self.cho, c.T, check_finite=False).T
        return ci_c + (F - ci_c @ self.X) @ self.SiWt

    def variance(self, V, c):
        raw = 1.0 + np.sum((V @ self.C) * V, axis=1) - 2.0 * np.sum(V * c, axis=1)
        return self.sigma2 * _clamp(raw)

    def jacobian(self, V, dc):
        """``dv^T/dnu`` for every location, shape ``(q, N, n)``."""
        q, N, n = dc.shape
        G = dc - np.einsum("Nm,qmk->qNk", V, self.dC)
        H = linalg.cho_solve(self.cho, G.reshape(q * N, n).T, check_finite=False).T
        H = H - (H @ self.X) @ self.SiWt
        return H.reshape(q, N, n)

    def correction(self, J, vnu):
        if J.shape[0] == 0:
            return np.zeros(J.shape[1])
        JC = J @ self.C
        quad = np.einsum("ij,iNk,jNk->N", vnu, JC, J)
        return self.sigma2 * _clamp(quad)


def _clamp(raw):
    raw = np.asarray(raw, dtype=float)
    if np.any(raw < -NEG_TOL):
        raise SingularMatrixError(f"negative variance {raw.min():.3g}; covariance matrix is ill-conditioned")
    return np.maximum(raw, 0.0)


def _system(model, pts):
    C = cov_matrix(model.family, model.params, pts)
    dC = cov_matrix_grads(model.family, model.params, pts)
    return KrigingSystem(C, dC, model.basis(pts), model.sigma2), dC


def _rows(model, pts, x):
    from scipy.spatial.distance import cdist

    x = np.atleast_2d(np.asarray(x, dtype=float))
    dist = cdist(x, pts)
    c = np.atleast_2d(kernel_value(model.family, model.params, dist))
    dc = kernel_grad_nu(model.family, model.params, dist)
    return c, dc.reshape((-1,) + c.shape), model.basis(x)


def kriging_weights(model: GpModel, grid: GridSpace, design: Design, x) -> np.ndarray:
    """Universal kriging weights ``v`` so that ``Y_hat(x) = v^T y``."""
    pts = design.points(grid)
    system, _ = _system(model, pts)
    c, _, F = _rows(model, pts, x)
    return system.weights(c, F)[0]


def predict(model: GpModel, grid: GridSpace, design: Design, x, y) -> float:
    """Kriging prediction at ``x`` from observations ``y`` at the design points."""
    y = np.asarray(y, dtype=float)
    if y.shape != (len(design),):
        raise ValueError("need exactly one observation per design point")
    return float(kriging_weights(model, grid, design, x) @ y)


def kriging_variance(model: GpModel, grid: GridSpace, design: Design, x) -> float:
    """Classic kriging variance ``sigma2 (1 + v^T C v - 2 v^T c)``."""
    pts = design.points(grid)
    system, _ = _system(model, pts)
    c, _, F = _rows(model, pts, x)
    return float(system.variance(system.weights(c, F), c)[0])


def weight_jacobian(model: GpModel, grid: GridSpace, design: Design, x) -> np.ndarray:
    """``dv^T/dnu`` at ``x``, one row per free covariance parameter."""
    pts = design.points(grid)
    system, _ = _system(model, pts)
    c, dc, F = _rows(model, pts, x)
    return system.jacobian(system.weights(c, F), dc)[:, 0, :]


def design_v_nu(model: GpModel, grid: GridSpace, design: Design) -> np.ndarray:
    """``V_nu`` of the design under the model's sigma2 convention."""
    pts = design.points(grid)
    system, dC = _system(model, pts)
    blocks = _blocks(system.cho, dC, system.X, model.sigma2 if model.sigma2 > 0 else 1.0)
    return v_nu(blocks, known_sigma2=model.sigma2_known)


def corrected_kriging_variance(model: GpModel, grid: GridSpace, design: Design, x, V_nu=None, y=None) -> KrigingResult:
    """Classic and corrected kriging variance at ``x``.

    ``V_nu`` defaults to the design's own; pass observations ``y`` to also
    fill in the prediction (NaN otherwise).
    """
    pts = design.points(grid)
    system, _ = _system(model, pts)
    vnu = design_v_nu(model, grid, design) if V_nu is None else np.atleast_2d(V_nu)
    if vnu.shape != (model.n_cov, model.n_cov):
        raise ValueError(f"V_nu must be {model.n_cov}x{model.n_cov}, got {vnu.shape}")
    c, dc, F = _rows(model, pts, x)
    V = system.weights(c, F)
    var = system.variance(V, c)[0]
    corr = system.correction(system.jacobian(V, dc), vnu)[0]
    pred = float(V[0] @ np.asarray(y, dtype=float)) if y is not None else float("nan")
    return KrigingResult(pred, float(var), float(var + corr))


def ek_surface(model: GpModel, grid: GridSpace, design: Design, points=None, V_nu=None):
    """Classic and corrected kriging variance over ``points`` (default: eval grid)."""
    pts = design.points(grid)
    system, _ = _system(model, pts)
    vnu = design_v_nu(model, grid, design) if V_nu is None else np.atleast_2d(V_nu)
    where = grid.eval_points if points is None else points
    c, dc, F = _rows(model, pts, where)
    V = system.weights(c, F)
    var = system.variance(V, c)
    return var, var + system.correction(system.jacobian(V, dc), vnu)


def mek(model: GpModel, grid: GridSpace, design: Design) -> MekResult:
    """Maximum corrected kriging variance over the evaluation grid."""
    _, corrected = ek_surface(model, grid, design)
    i = int(np.argmax(corrected))
    return MekResult(float(corrected[i]), i, grid.eval_points[i].copy())


def simulate_field(model: GpModel, grid: GridSpace, seed: int) -> np.ndarray:
    """One Gaussian draw of the field at every candidate point."""
    if model.beta is None:
        raise ValueError("simulation needs trend coefficients beta")
    mean = model.basis(grid.candidates) @ np.asarray(model.beta)
    rng = np.random.default_rng(seed)
    if model.sigma2 == 0:
        return mean
    C = cov_matrix(model.family, model.params, grid.candidates)
    lower = np.tril(cholesky_jitter(C)[0])
    return mean + np.sqrt(model.sigma2) * lower @ rng.standard_normal(grid.size)
