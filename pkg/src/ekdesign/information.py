"""Fisher information for trend and covariance parameters, and the compound criterion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .covariance import cholesky_jitter, cov_matrix, cov_matrix_grads
from .errors import NonEstimableError, SingularMatrixError
from .model import Design, GpModel, GridSpace

__all__ = ["InfoBlocks", "logdet_pd", "m_beta", "m_theta", "v_nu", "j_alpha", "log_dets"]


@dataclass(frozen=True)
class InfoBlocks:
    """Blocks of the information matrix for ``theta = (sigma2, nu)`` plus ``M_beta``."""

    m_beta: np.ndarray
    m_nu: np.ndarray
    z_nu: np.ndarray
    n: int
    sigma2: float

    @property
    def m_theta(self) -> np.ndarray:
        q = len(self.z_nu)
        out = np.empty((q + 1, q + 1))
        out[0, 0] = self.n / (2.0 * self.sigma2**2)
        out[0, 1:] = out[1:, 0] = self.z_nu / (2.0 * self.sigma2)
        out[1:, 1:] = self.m_nu
        return out


def logdet_pd(m: np.ndarray) -> float:
    """``log det m`` for a symmetric positive definite matrix, else ``-inf``."""
    m = np.atleast_2d(m)
    if m.size == 0:
        return 0.0
    try:
        lower = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return -np.inf
    diag = np.diag(lower)
    if not np.all(np.isfinite(diag)) or np.any(diag <= 0):
        return -np.inf
    return float(2.0 * np.sum(np.log(diag)))


def _blocks(cho, dC, X, sigma2):
    W = linalg.cho_solve(cho, X, check_finite=False)
    m_b = X.T @ W / sigma2
    q, n = dC.shape[0], X.shape[0]
    A = np.stack([linalg.cho_solve(cho, dC[i], check_finite=False) for i in range(q)]) if q else np.zeros((0, n, n))
    z = np.trace(A, axis1=1, axis2=2)
    # tr(A_i A_j) = sum(A_i * A_j^T)
    m_n = 0.5 * np.einsum("iab,jba->ij", A, A)
    return InfoBlocks(m_b, 0.5 * (m_n + m_n.T), z, n, sigma2)


def _require_sigma2(model):
    if not model.sigma2 > 0:
        raise ValueError("information matrices need sigma2 > 0")


def m_beta(model: GpModel, grid: GridSpace, design: Design) -> np.ndarray:
    """``M_beta = X^T C_nu^{-1} X / sigma2`` for the design."""
    return m_theta(model, grid, design).m_beta


def m_theta(model: GpModel, grid: GridSpace, design: Design) -> InfoBlocks:
    """All information blocks for the design; see :class:`InfoBlocks`."""
    _require_sigma2(model)
    pts = design.points(grid)
    C = cov_matrix(model.family, model.params, pts)
    dC = cov_matrix_grads(model.family, model.params, pts)
    return _blocks(cholesky_jitter(C), dC, model.basis(pts), model.sigma2)


def v_nu(blocks: InfoBlocks, known_sigma2: bool = False) -> np.ndarray:
    """Asymptotic covariance of the ML estimate of ``nu``.

    With ``sigma2`` estimated this is ``[M_nu - z z^T / (2n)]^{-1}``; with
    ``sigma2`` known it is ``M_nu^{-1}``. Neither depends on ``sigma2``.

    Raises
    ------
    NonEstimableError
        If the matrix to invert is not positive definite.
    """
    q = len(blocks.z_nu)
    if q == 0:
        return np.zeros((0, 0))
    s = blocks.m_nu.copy()
    if not known_sigma2:
        s -= np.outer(blocks.z_nu, blocks.z_nu) / (2.0 * blocks.n)
    try:
        cho = linalg.cho_factor(s, lower=True)
    except linalg.LinAlgError:
        raise NonEstimableError("design cannot estimate the covariance parameters") from None
    if np.any(np.diag(cho[0]) <= 1e-12 * max(1.0, np.max(np.abs(s)))):
        raise NonEstimableError("design cannot estimate the covariance parameters")
    v = linalg.cho_solve(cho, np.eye(q))
    return 0.5 * (v + v.T)


def log_dets(model: GpModel, grid: GridSpace, design: Design) -> tuple[float, float]:
    """``(log|M_beta|, log|M_nu|)``; ``-inf`` marks a non-PD matrix."""
    try:
        blocks = m_theta(model, grid, design)
    except SingularMatrixError:
        return -np.inf, -np.inf
    return logdet_pd(blocks.m_beta), logdet_pd(blocks.m_nu)


def j_alpha(model: GpModel, grid: GridSpace, design: Design, alpha: float) -> float:
    """Compound criterion ``alpha log|M_beta| + (1 - alpha) log|M_nu|``.

    Degenerate designs score ``-inf`` rather than raising.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    lb, ln = log_dets(model, grid, design)
    return _combine(lb, ln, alpha)


def _combine(lb, ln, alpha):
    lb, ln = np.asarray(lb, dtype=float), np.asarray(ln, dtype=float)
    with np.errstate(invalid="ignore"):
        out = np.where(alpha == 1.0, lb, np.where(alpha == 0.0, ln, alpha * lb + (1.0 - alpha) * ln))
    out = np.where(np.isnan(out), -np.inf, out)
    return float(out) if out.ndim == 0 else out
