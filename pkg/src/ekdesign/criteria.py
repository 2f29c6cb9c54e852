"""Grid-cached criterion evaluation for the optimizers.

Kernel matrices between all candidates (and between evaluation points and
candidates) are computed once; designs are then handled as integer index
arrays and criteria are evaluated by slicing, in batches where possible.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .covariance import cholesky_jitter, kernel_grad_nu, kernel_value
from .errors import NonEstimableError, SingularMatrixError
from .information import _blocks, _combine, logdet_pd, v_nu
from .kriging import KrigingSystem
from .model import Design, GpModel, GridSpace

__all__ = ["GridCriteria"]


class GridCriteria:
    """Cached surrogate criteria and MEK for one (model, grid) pair.

    ``mek_evaluations`` counts every call to :meth:`mek`.
    """

    def __init__(self, model: GpModel, grid: GridSpace):
        if not model.sigma2 > 0:
            raise ValueError("criteria need sigma2 > 0")
        self.model, self.grid = model, grid
        fam, par = model.family, model.params
        dist = cdist(grid.candidates, grid.candidates)
        self.K = kernel_value(fam, par, dist)
        np.fill_diagonal(self.K, 1.0)
        self.dK = kernel_grad_nu(fam, par, dist)
        idx = np.arange(grid.size)
        self.dK[:, idx, idx] = 0.0
        self.F = model.basis(grid.candidates)
        edist = cdist(grid.eval_points, grid.candidates)
        self.Ke = kernel_value(fam, par, edist)
        self.dKe = kernel_grad_nu(fam, par, edist)
        self.Fe = model.basis(grid.eval_points)
        # eval point -> candidate index, -1 when the eval point is not a candidate
        self.eval_to_cand = np.where(np.isclose(edist, 0.0, atol=1e-12).any(axis=1), edist.argmin(axis=1), -1)
        self.mek_evaluations = 0
        self.p = self.F.shape[1]
        self.q = self.dK.shape[0]

    @property
    def size(self) -> int:
        return self.grid.size

    # -- surrogate criteria -------------------------------------------------

    def log_dets(self, designs) -> np.ndarray:
        """``(log|M_beta|, log|M_nu|)`` for a batch of designs, shape ``(B, 2)``.

        ``designs`` is a ``(B, n)`` integer array; non-PD matrices and
        designs with repeated points give ``-inf``.
        """
        idx = np.atleast_2d(np.asarray(designs, dtype=np.intp))
        srt = np.sort(idx, axis=1)
        dup = (srt[:, 1:] == srt[:, :-1]).any(axis=1)
        if not dup.any():
            return self._log_dets(idx)
        out = np.full((len(idx), 2), -np.inf)
        if not dup.all():
            out[~dup] = self._log_dets(idx[~dup])
        return out

    def _log_dets(self, idx):
        B, n = idx.shape
        rows, cols = idx[:, :, None], idx[:, None, :]
        C = self.K[rows, cols]
        try:
            np.linalg.cholesky(C)
        except np.linalg.LinAlgError:
            return np.array([self._log_dets_one(row) for row in idx])
        Ci = np.linalg.inv(C)
        X = self.F[idx]
        out = np.empty((B, 2))
        if self.p == 1:
            x = X[:, :, 0]
            mb = np.einsum("bn,bn->b", np.einsum("bnm,bm->bn", Ci, x), x) / self.model.sigma2
            out[:, 0] = _scalar_logdet(mb)
        else:
            mb = np.einsum("bnp,bnm,bmr->bpr", X, Ci, X) / self.model.sigma2
            out[:, 0] = _batch_logdet(mb)
        if self.q == 0:
            out[:, 1] = 0.0
        elif self.q == 1:
            A = Ci @ self.dK[0][rows, cols]
            out[:, 1] = _scalar_logdet(0.5 * np.einsum("bkl,blk->b", A, A))
        else:
            A = Ci[None] @ self.dK[:, rows, cols]
            out[:, 1] = _batch_logdet(0.5 * np.einsum("ibkl,jblk->bij", A, A))
        return out

    def _log_dets_one(self, row):
        C = self.K[np.ix_(row, row)]
        try:
            cho = cholesky_jitter(C)
        except SingularMatrixError:
            return (-np.inf, -np.inf)
        blocks = _blocks(cho, self.dK[:, row][:, :, row], self.F[row], self.model.sigma2)
        return (logdet_pd(blocks.m_beta), logdet_pd(blocks.m_nu))

    def j_alpha(self, designs, alpha: float) -> np.ndarray:
        ld = self.log_dets(designs)
        return np.atleast_1d(_combine(ld[:, 0], ld[:, 1], alpha))

    # -- MEK --------------------------------------------------------------

    def system(self, design) -> KrigingSystem:
        row = np.asarray(design, dtype=np.intp)
        return KrigingSystem(
            self.K[np.ix_(row, row)], self.dK[:, row][:, :, row], self.F[row], self.model.sigma2
        )

    def v_nu(self, design) -> np.ndarray:
        row = np.asarray(design, dtype=np.intp)
        system = self.system(row)
        blocks = _blocks(system.cho, system.dC, system.X, self.model.sigma2)
        return v_nu(blocks, known_sigma2=self.model.sigma2_known)

    def surface(self, design, corrected: bool = True):
        """Classic and corrected kriging variance over the eval grid.

        With ``corrected=False`` the second array is ``None`` and no
        ``V_nu`` is needed.
        """
        row = np.asarray(design, dtype=np.intp)
        system = self.system(row)
        c = self.Ke[:, row]
        V = system.weights(c, self.Fe)
        var = system.variance(V, c)
        if not corrected:
            return var, None
        blocks = _blocks(system.cho, system.dC, system.X, self.model.sigma2)
        vnu = v_nu(blocks, known_sigma2=self.model.sigma2_known)
        J = system.jacobian(V, self.dKe[:, :, row])
        return var, var + system.correction(J, vnu)

    def mek(self, design) -> float:
        """MEK of a design given as candidate indices; counts the call."""
        self.mek_evaluations += 1
        return float(np.max(self.surface(design)[1]))

    def mek_or_inf(self, design) -> float:
        """MEK, or ``+inf`` for designs that cannot estimate ``nu``."""
        try:
            return self.mek(design)
        except (NonEstimableError, SingularMatrixError):
            return np.inf

    def as_design(self, row) -> Design:
        return Design(tuple(int(i) for i in row))


def _scalar_logdet(m):
    pos = m > 0
    return np.where(pos, np.log(np.where(pos, m, 1.0)), -np.inf)


def _batch_logdet(m):
    m = 0.5 * (m + np.swapaxes(m, -1, -2))
    sign, logdet = np.linalg.slogdet(m)
    out = np.where(sign > 0, logdet, -np.inf)
    # slogdet accepts indefinite matrices with an even number of negative eigenvalues
    if m.shape[-1] > 1:
        ok = np.isfinite(out)
        if np.any(ok):
            eig_min = np.linalg.eigvalsh(m[ok])[:, 0]
            bad = np.flatnonzero(ok)[eig_min <= 0]
            out[bad] = -np.inf
    return out
