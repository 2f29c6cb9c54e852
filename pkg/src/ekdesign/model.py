"""Candidate grids, designs and the Gaussian random-field model."""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field

import numpy as np

from .covariance import CovParams, KernelFamily
from .errors import DesignMismatchError, DuplicatePointError

__all__ = ["GridSpace", "Design", "GpModel", "TREND_BASES"]

TREND_BASES = ("constant", "linear")


@dataclass(frozen=True, eq=False)
class GridSpace:
    """Finite candidate set ``X_M`` plus the evaluation set ``X_M'``.

    ``shape`` is set for regular grids (points in C order, first axis
    slowest) and enables the NSWE neighbour cliques used by local search.
    """

    candidates: np.ndarray
    eval_points: np.ndarray | None = None
    shape: tuple[int, ...] | None = None
    _neighbors: list = field(default=None, repr=False)

    def __post_init__(self):
        cand = np.atleast_2d(np.asarray(self.candidates, dtype=float))
        object.__setattr__(self, "candidates", cand)
        ev = cand if self.eval_points is None else np.atleast_2d(np.asarray(self.eval_points, dtype=float))
        if ev.shape[1] != cand.shape[1]:
            raise ValueError("eval_points and candidates must share a dimension")
        object.__setattr__(self, "eval_points", ev)
        for name, pts in (("candidates", cand), ("eval_points", ev)):
            if len(np.unique(pts, axis=0)) != len(pts):
                raise DuplicatePointError(f"{name} contain duplicate points")
        if self.shape is not None:
            if int(np.prod(self.shape)) != len(cand):
                raise ValueError("shape does not match number of candidates")
            object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "_neighbors", self._build_neighbors())

    @classmethod
    def regular(cls, resolution, extents=None, eval_resolution=None) -> "GridSpace":
        """Regular grid with ``resolution`` points per axis over ``extents``.

        ``resolution`` is an int (2-D square grid) or a per-axis sequence;
        ``extents`` defaults to ``[0, 1]`` on every axis.
        """
        res = (int(resolution),) * 2 if np.isscalar(resolution) else tuple(int(r) for r in resolution)
        ext = [(0.0, 1.0)] * len(res) if extents is None else [tuple(map(float, e)) for e in extents]
        if len(ext) != len(res):
            raise ValueError("extents and resolution disagree on the dimension")
        cand = _lattice(res, ext)
        ev = None
        if eval_resolution is not None:
            eres = (int(eval_resolution),) * len(res) if np.isscalar(eval_resolution) else tuple(eval_resolution)
            ev = _lattice(eres, ext)
        return cls(cand, ev, res)

    @property
    def dim(self) -> int:
        return self.candidates.shape[1]

    @property
    def size(self) -> int:
        return self.candidates.shape[0]

    @property
    def is_regular(self) -> bool:
        return self.shape is not None

    def neighbors(self, i: int) -> tuple[int, ...]:
        """NSWE neighbours of candidate ``i`` (boundary-clipped)."""
        if self._neighbors is None:
            raise ValueError("neighbour cliques require a regular grid")
        return self._neighbors[i]

    def _build_neighbors(self):
        if self.shape is None:
            return None
        out = []
        for multi in itertools.product(*(range(s) for s in self.shape)):
            nb = []
            for ax, s in enumerate(self.shape):
                for step in (-1, 1):
                    j = multi[ax] + step
                    if 0 <= j < s:
                        m = list(multi)
                        m[ax] = j
                        nb.append(int(np.ravel_multi_index(m, self.shape)))
            out.append(tuple(sorted(nb)))
        return out

    def fingerprint(self) -> str:
        """Short hash identifying the candidate set (coordinates and order)."""
        h = hashlib.sha256(np.ascontiguousarray(self.candidates.round(12)).tobytes())
        return h.hexdigest()[:16]

    def index_of(self, point, tol: float = 1e-9) -> int:
        dist = np.linalg.norm(self.candidates - np.asarray(point, dtype=float), axis=1)
        i = int(np.argmin(dist))
        if dist[i] > tol:
            raise DesignMismatchError(f"point {list(point)} is not a grid candidate")
        return i


def _lattice(res, ext):
    axes = [np.linspace(lo, hi, r) for r, (lo, hi) in zip(res, ext)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


@dataclass(frozen=True)
class Design:
    """Ordered, replication-free list of candidate indices."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise ValueError("a design needs at least one point")
        if len(set(idx)) != len(idx):
            raise DuplicatePointError("design indices must be distinct")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    @classmethod
    def from_points(cls, grid: GridSpace, points) -> "Design":
        return cls(tuple(grid.index_of(p) for p in np.atleast_2d(points)))

    def check(self, grid: GridSpace) -> "Design":
        if min(self.indices) < 0 or max(self.indices) >= grid.size:
            raise DesignMismatchError("design index out of range for this grid")
        return self

    def points(self, grid: GridSpace) -> np.ndarray:
        return grid.candidates[list(self.check(grid).indices)]

    def key(self) -> tuple[int, ...]:
        """Order-free identity of the design."""
        return tuple(sorted(self.indices))


@dataclass(frozen=True)
class GpModel:
    """Random field ``Y(x) = f(x)^T beta + eps(x)`` with ``Var eps = sigma2``.

    ``sigma2_known`` selects how ``V_nu`` treats the variance: when False
    (default) ``sigma2`` is a nuisance parameter estimated along with ``nu``.
    """

    family: KernelFamily
    params: CovParams
    sigma2: float = 1.0
    trend: str = "constant"
    beta: tuple[float, ...] | None = None
    sigma2_known: bool = False

    def __post_init__(self):
        if self.trend not in TREND_BASES:
            raise ValueError(f"trend must be one of {TREND_BASES}")
        if not self.sigma2 >= 0:
            raise ValueError("sigma2 must be non-negative")
        if self.beta is not None:
            object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))

    def basis(self, points) -> np.ndarray:
        """Trend design matrix, one row ``f(x)`` per point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ones = np.ones((len(pts), 1))
        return ones if self.trend == "constant" else np.hstack([ones, pts])

    def n_trend(self, dim: int) -> int:
        return 1 if self.trend == "constant" else dim + 1

    @property
    def free_names(self) -> list[str]:
        return self.params.free_names(self.family)

    @property
    def n_cov(self) -> int:
        return len(self.free_names)

    def with_(self, **kw) -> "GpModel":
        fields = dict(
            family=self.family, params=self.params, sigma2=self.sigma2,
            trend=self.trend, beta=self.beta, sigma2_known=self.sigma2_known,
        )
        fields.update(kw)
        return GpModel(**fields)
