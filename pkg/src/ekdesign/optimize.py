"""Design construction: simulated annealing on the compound criterion with Pareto
selection, the Pareto-restricted exchange algorithm, greedy augmentation and
direct annealing on MEK.

Objectives are *batch* callables: they take a ``(B, n)`` integer array of
candidate indices and return ``B`` values to maximize. Use :func:`batched`
to adapt a plain ``Design -> float`` function.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .criteria import GridCriteria
from .designs import LhSpec, random_lh, snap_to_grid
from .errors import NonEstimableError, SingularMatrixError
from .model import Design, GpModel, GridSpace
from .pareto import ParetoFront, ParetoPoint

__all__ = [
    "SaConfig",
    "TraceRow",
    "CriterionTrace",
    "ParetoSaResult",
    "GreedyResult",
    "batched",
    "default_start",
    "local_optimization",
    "simulated_annealing",
    "pareto_sa",
    "exchange_algorithm",
    "greedy_augment",
    "direct_sa_mek",
    "default_alphas",
]

log = logging.getLogger(__name__)

BatchObjective = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SaConfig:
    t0: float = 0.6
    r: float = 0.93
    n_max: int = 5000
    seed: int = 0

    def __post_init__(self):
        if not self.t0 > 0:
            raise ValueError("t0 must be positive")
        if not 0 < self.r < 1:
            raise ValueError("r must lie in (0, 1)")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    value: float
    accepted: bool
    temperature: float = float("nan")


@dataclass
class CriterionTrace:
    """Per-iteration record of an optimizer run."""

    rows: list[TraceRow]
    best_design: Design
    best_value: float
    mek_evaluations: int = 0
    info: dict = field(default_factory=dict)

    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.rows])

    def to_table(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "value", "temperature", "accepted"])
        for r in self.rows:
            w.writerow([r.iteration, repr(r.value), repr(r.temperature), int(r.accepted)])
        return buf.getvalue()

    @staticmethod
    def rows_from_table(text: str) -> list[TraceRow]:
        return [
            TraceRow(int(r["iteration"]), float(r["value"]), bool(int(r["accepted"])), float(r["temperature"]))
            for r in csv.DictReader(io.StringIO(text))
        ]


def batched(objective: Callable[[Design], float]) -> BatchObjective:
    """Wrap a ``Design -> float`` objective as a batch objective."""

    def run(designs):
        return np.array([objective(Design(tuple(int(i) for i in row))) for row in np.atleast_2d(designs)], dtype=float)

    return run


def _values(objective, designs):
    vals = np.asarray(objective(np.atleast_2d(designs)), dtype=float)
    return np.where(np.isnan(vals), -np.inf, vals)


def default_alphas() -> np.ndarray:
    return np.linspace(0.5, 1.0, 11)


def default_start(grid: GridSpace, n: int, seed: int) -> Design:
    """Random Latin hypercube over the grid's bounding box, snapped to candidates."""
    if n == 1:
        return Design((int(np.random.default_rng(seed).integers(grid.size)),))
    lo, hi = grid.candidates.min(axis=0), grid.candidates.max(axis=0)
    pts = lo + random_lh(LhSpec(n, grid.dim, 0.0, seed)) * (hi - lo)
    return snap_to_grid(pts, grid)


def _require_estimable(model: GpModel, grid: GridSpace, n: int):
    need = model.n_trend(grid.dim) + model.n_cov + 1
    if n < need:
        raise NonEstimableError(f"n={n} is below the estimability bound p + q + 1 = {need}")
    if n > grid.size:
        raise ValueError("design size exceeds the number of candidates")


def _local_opt(objective, start, grid, value=None):
    cur = np.array(start, dtype=np.intp)
    best = _values(objective, cur)[0] if value is None else value
    while True:
        members = set(cur.tolist())
        moves = [(pos, nb) for pos, x in enumerate(cur) for nb in grid.neighbors(int(x)) if nb not in members]
        if not moves:
            return cur, best
        cands = np.repeat(cur[None, :], len(moves), axis=0)
        for k, (pos, nb) in enumerate(moves):
            cands[k, pos] = nb
        vals = _values(objective, cands)
        k = int(np.argmax(vals))
        if vals[k] > best:
            cur, best = cands[k], float(vals[k])
        else:
            return cur, best


def local_optimization(objective: BatchObjective, start: Design, grid: GridSpace) -> Design:
    """Steepest-ascent search over single-point moves to NSWE neighbours.

    Each sweep scores every replacement of one design point by one of its
    grid neighbours (neighbours already in the design are skipped) and moves
    to the best strict improvement; stops when a sweep finds none.
    """
    return Design(tuple(int(i) for i in _local_opt(objective, start.indices, grid)[0]))


def simulated_annealing(
    objective: BatchObjective,
    n: int,
    grid: GridSpace,
    cfg: SaConfig = SaConfig(),
    start: Design | None = None,
    local_opt: bool = True,
) -> CriterionTrace:
    """Maximize ``objective`` over ``n``-point designs by simulated annealing.

    Each iteration swaps two random design points for two random outside
    candidates, optionally polishes the result with
    :func:`local_optimization`, then applies Metropolis acceptance at the
    current temperature. The temperature is multiplied by ``cfg.r`` whenever
    a candidate is rejected.
    """
    M = grid.size
    if not 1 <= n <= M:
        raise ValueError("need 1 <= n <= number of candidates")
    if local_opt and not grid.is_regular:
        raise ValueError("local optimization needs a regular grid")
    rng = np.random.default_rng(cfg.seed)
    if start is None:
        start = default_start(grid, n, cfg.seed)
    if len(start) != n:
        raise ValueError("start design has the wrong size")
    cur = np.array(start.indices, dtype=np.intp)
    e = float(_values(objective, cur)[0])
    best, e_best = cur.copy(), e
    T = cfg.t0
    rows = [TraceRow(0, e, True, T)]
    if n == M:
        log.warning("design covers the whole grid; no perturbation is possible")
        return CriterionTrace(rows, Design(tuple(cur.tolist())), e, info={"proposals": 0})
    m = min(2, n, M - n)
    all_idx = np.arange(M)
    for k in range(1, cfg.n_max + 1):
        cand = cur.copy()
        pos = rng.choice(n, size=m, replace=False)
        outside = np.setdiff1d(all_idx, cur, assume_unique=True)
        cand[pos] = rng.choice(outside, size=m, replace=False)
        if local_opt:
            cand, e_new = _local_opt(objective, cand, grid)
        else:
            e_new = float(_values(objective, cand)[0])
        if e_new > e_best:
            best, e_best = cand.copy(), e_new
        T_used = T
        if e_new > e:
            accepted = True
        else:
            accepted = rng.random() < _acceptance(e_new, e, T)
        if accepted:
            cur, e = cand, e_new
        else:
            T *= cfg.r
        rows.append(TraceRow(k, e_new, bool(accepted), T_used))
    return CriterionTrace(rows, Design(tuple(int(i) for i in best)), e_best, info={"proposals": cfg.n_max})


def _acceptance(new, old, T):
    if new == old:
        return 1.0
    if new == -np.inf:
        return 0.0
    if old == -np.inf:
        return 1.0
    return math.exp(min(0.0, (new - old) / T))


@dataclass
class ParetoSaResult:
    front: ParetoFront
    design: Design
    mek: float
    trace: CriterionTrace
    runs: list[CriterionTrace]
    alphas: np.ndarray


def pareto_sa(
    model: GpModel,
    grid: GridSpace,
    n: int,
    alphas: Sequence[float] | None = None,
    cfg: SaConfig = SaConfig(),
    start: Design | None = None,
    criteria: GridCriteria | None = None,
) -> ParetoSaResult:
    """Pareto-front candidates from annealing ``J_alpha``, then MEK selection.

    One annealing run per ``alpha`` (seed ``cfg.seed + i``) maximizes
    ``alpha log|M_beta| + (1 - alpha) log|M_nu|``; the best designs are
    filtered to their non-dominated set and MEK is evaluated only there.
    The design with the smallest MEK is returned.
    """
    _require_estimable(model, grid, n)
    crit = criteria or GridCriteria(model, grid)
    alphas = default_alphas() if alphas is None else np.asarray(alphas, dtype=float)
    if np.any((alphas < 0) | (alphas > 1)):
        raise ValueError("alphas must lie in [0, 1]")
    front = ParetoFront()
    runs = []
    for i, a in enumerate(alphas):
        run = simulated_annealing(
            lambda D, a=a: crit.j_alpha(D, a), n, grid, replace(cfg, seed=cfg.seed + i), start
        )
        run.info["alpha"] = float(a)
        runs.append(run)
        lb, ln = crit.log_dets(np.array(run.best_design.indices))[0]
        front.insert(ParetoPoint(float(lb), float(ln), run.best_design))
    if not len(front):
        raise NonEstimableError("no annealing run produced an estimable design")
    front.convex_hull()
    before = crit.mek_evaluations
    meks = [crit.mek_or_inf(p.design.indices) for p in front]
    if not np.isfinite(min(meks)):
        raise NonEstimableError("every Pareto design is non-estimable")
    j = int(np.argmin(meks))
    rows = [TraceRow(k, v, k == j) for k, v in enumerate(meks)]
    trace = CriterionTrace(rows, front.points[j].design, meks[j], crit.mek_evaluations - before)
    return ParetoSaResult(front, front.points[j].design, meks[j], trace, runs, alphas)


def exchange_algorithm(
    model: GpModel,
    grid: GridSpace,
    start: Design,
    hull_only: bool = False,
    criteria: GridCriteria | None = None,
    max_iter: int | None = None,
    keep_ties: bool = True,
) -> CriterionTrace:
    """Pareto-restricted exchange algorithm minimizing MEK.

    Every iteration scores all single-point exchanges of the current design
    on ``(log|M_beta|, log|M_nu|)``, keeps the non-dominated ones (or only
    those on the front's convex hull when ``hull_only``), evaluates MEK on
    them and moves to the best if it strictly improves. The point inserted
    in the previous iteration is not exchanged again. With ``keep_ties``
    (default) exchanges tying with a front point in one or both criteria
    stay in the candidate pool; see :class:`ParetoFront`.

    ``trace.info`` holds per-iteration candidate, front and hull counts.
    """
    n = len(start)
    _require_estimable(model, grid, n)
    crit = criteria or GridCriteria(model, grid)
    before = crit.mek_evaluations
    cur = np.array(start.check(grid).indices, dtype=np.intp)
    mek_cur = crit.mek(cur)
    rows = [TraceRow(0, mek_cur, True)]
    stats = []
    locked = None
    all_idx = np.arange(grid.size)
    k = 0
    while max_iter is None or k < max_iter:
        outside = np.setdiff1d(all_idx, cur)
        positions = [i for i in range(n) if i != locked]
        designs = np.repeat(cur[None, :], len(positions) * len(outside), axis=0)
        pos_of = np.repeat(positions, len(outside))
        designs[np.arange(len(designs)), pos_of] = np.tile(outside, len(positions))
        ld = crit.log_dets(designs)
        front = ParetoFront(keep_ties=keep_ties)
        for e, (lb, ln) in enumerate(ld):
            front.insert(ParetoPoint(float(lb), float(ln), e))
        hull = front.convex_hull()
        pool = hull if hull_only else front.points
        scored = sorted((crit.mek_or_inf(designs[p.design]), p.design) for p in pool)
        stats.append({"candidates": len(designs), "front": len(front), "hull": len(hull), "evaluated": len(pool)})
        if not scored or scored[0][0] >= mek_cur:
            rows.append(TraceRow(k + 1, scored[0][0] if scored else np.inf, False))
            break
        mek_cur, e = scored[0]
        cur = designs[e]
        locked = int(pos_of[e])
        k += 1
        rows.append(TraceRow(k, mek_cur, True))
    info = {"iterations": k, "per_iteration": stats, "hull_only": hull_only}
    return CriterionTrace(rows, Design(tuple(int(i) for i in cur)), mek_cur, crit.mek_evaluations - before, info)


@dataclass
class GreedyResult:
    designs: list[Design]
    added: list[int]
    max_variance: list[float]
    mek: list[float]


def greedy_augment(
    model: GpModel,
    grid: GridSpace,
    base: Design,
    strategy: str,
    steps: int,
    criteria: GridCriteria | None = None,
) -> GreedyResult:
    """Sequentially add points at the maximum of a pointwise criterion.

    ``strategy`` is ``"S1"`` (classic kriging variance) or ``"S2"``
    (corrected kriging variance). Only evaluation points that are also
    candidates and not yet in the design are eligible; ties go to the
    lowest index. Records max variance and MEK of every intermediate design
    (MEK is NaN where the design cannot estimate ``nu``).
    """
    strategy = strategy.upper()
    if strategy not in ("S1", "S2"):
        raise ValueError("strategy must be S1 or S2")
    crit = criteria or GridCriteria(model, grid)
    eligible_eval = np.flatnonzero(crit.eval_to_cand >= 0)
    if not len(eligible_eval):
        raise ValueError("no evaluation point is a candidate")
    cur = list(base.check(grid).indices)
    designs, added, max_var, meks = [Design(tuple(cur))], [], [], []

    def record(var, cor):
        max_var.append(float(var.max()))
        meks.append(float(cor.max()) if cor is not None else float("nan"))

    for step in range(steps + 1):
        try:
            var, cor = crit.surface(cur, corrected=True)
            crit.mek_evaluations += 1  # the recorded MEK is its maximum
        except (NonEstimableError, SingularMatrixError):
            if strategy == "S2":
                raise NonEstimableError(f"S2 needs an estimable design (step {step})") from None
            var, cor = crit.surface(cur, corrected=False)
        record(var, cor)
        if step == steps:
            break
        score = (var if strategy == "S1" else cor)[eligible_eval]
        cand = crit.eval_to_cand[eligible_eval]
        score = np.where(np.isin(cand, cur), -np.inf, score)
        if not np.isfinite(score.max()):
            break
        best = int(cand[int(np.argmax(score))])
        cur.append(best)
        added.append(best)
        designs.append(Design(tuple(cur)))
    return GreedyResult(designs, added, max_var, meks)


def direct_sa_mek(
    model: GpModel,
    grid: GridSpace,
    n: int,
    cfg: SaConfig = SaConfig(n_max=2000),
    start: Design | None = None,
    criteria: GridCriteria | None = None,
) -> CriterionTrace:
    """Simulated annealing directly on MEK (no local optimization step).

    Trace values and ``best_value`` are MEK values (smaller is better).
    """
    crit = criteria or GridCriteria(model, grid)
    if n == grid.size:
        design = Design(tuple(range(grid.size)))
        value = crit.mek(np.arange(grid.size))
        return CriterionTrace([TraceRow(0, value, True)], design, value, 1, {"proposals": 0})
    _require_estimable(model, grid, n)
    before = crit.mek_evaluations

    def neg_mek(designs):
        return np.array([-crit.mek_or_inf(row) for row in designs])

    trace = simulated_annealing(neg_mek, n, grid, cfg, start, local_opt=False)
    rows = [replace(r, value=-r.value) for r in trace.rows]
    return CriterionTrace(rows, trace.best_design, -trace.best_value, crit.mek_evaluations - before, trace.info)
