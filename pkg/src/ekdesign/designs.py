"""Space-filling designs: the 7-point maximin Latin hypercube, random LHs, coffeehouse."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .model import Design, GridSpace

__all__ = ["LhSpec", "lh_star_7", "random_lh", "snap_to_grid", "coffeehouse", "min_distance"]


@dataclass(frozen=True)
class LhSpec:
    n: int
    dim: int = 2
    perturb_sd: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("a Latin hypercube needs n >= 2")
        if self.perturb_sd < 0:
            raise ValueError("perturb_sd must be non-negative")


def lh_star_7() -> np.ndarray:
    """The 7-point Latin hypercube on [0, 1]^2 that is both maximin and minimax optimal."""
    return np.array(
        [[0, 1 / 3], [1 / 6, 5 / 6], [1 / 3, 0], [1 / 2, 1 / 2], [2 / 3, 1], [5 / 6, 1 / 6], [1, 2 / 3]]
    )


def random_lh(spec: LhSpec) -> np.ndarray:
    """Random Latin hypercube on ``n`` equispaced levels of [0, 1].

    Each coordinate is an independent permutation of the levels; with
    ``perturb_sd > 0`` Gaussian noise is added and coordinates are clamped
    back to [0, 1].
    """
    rng = np.random.default_rng(spec.seed)
    levels = np.linspace(0.0, 1.0, spec.n)
    pts = np.column_stack([rng.permutation(levels) for _ in range(spec.dim)])
    if spec.perturb_sd > 0:
        pts = np.clip(pts + rng.normal(0.0, spec.perturb_sd, pts.shape), 0.0, 1.0)
    return pts


def snap_to_grid(points, grid: GridSpace) -> Design:
    """Map points to their nearest candidates without creating replications.

    Ties go to the lowest candidate index; a point whose nearest candidate is
    already taken moves to its nearest free candidate.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) > grid.size:
        raise ValueError(f"cannot place {len(pts)} points on {grid.size} candidates without replication")
    dist = cdist(pts, grid.candidates)
    taken: set[int] = set()
    out = []
    for row in dist:
        # stable sort keeps lowest index first among equal distances
        for j in np.argsort(row, kind="stable"):
            if int(j) not in taken:
                taken.add(int(j))
                out.append(int(j))
                break
    return Design(tuple(out))


def min_distance(points) -> float:
    pts = np.atleast_2d(points)
    return float(pdist(pts).min()) if len(pts) > 1 else float("inf")


def coffeehouse(grid: GridSpace, n: int, start: Design | None = None) -> Design:
    """Greedy maximin design.

    Starts from the farthest candidate pair (or from ``start``), then adds
    the candidate maximizing the distance to its nearest design point.
    Ties go to the lowest index; ``n = 1`` returns candidate 0.
    """
    if not 1 <= n <= grid.size:
        raise ValueError("need 1 <= n <= number of candidates")
    cand = grid.candidates
    if start is not None:
        chosen = list(start.indices)[:n]
    elif n == 1:
        return Design((0,))
    else:
        dist = cdist(cand, cand)
        i, j = np.unravel_index(int(np.argmax(np.triu(dist, 1))), dist.shape)
        chosen = [int(i), int(j)]
    nearest = cdist(cand, cand[chosen]).min(axis=1)
    while len(chosen) < n:
        nearest[chosen] = -1.0
        k = int(np.argmax(nearest))
        chosen.append(k)
        nearest = np.minimum(nearest, np.linalg.norm(cand - cand[k], axis=1))
    return Design(tuple(chosen))
