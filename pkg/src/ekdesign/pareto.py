"""Non-dominated set for two maximized criteria and its upper convex hull."""
from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Any

__all__ = ["ParetoPoint", "ParetoFront", "dominates", "strictly_dominates", "DUPLICATE_TOL"]

DUPLICATE_TOL = 1e-9
COLLINEAR_RTOL = 1e-12


@dataclass(frozen=True)
class ParetoPoint:
    c_beta: float
    c_nu: float
    design: Any = None
    on_hull: bool = False


def dominates(a: ParetoPoint, b: ParetoPoint) -> bool:
    """True if ``a`` weakly dominates ``b`` (at least as good in both, for maximization)."""
    return a.c_beta >= b.c_beta and a.c_nu >= b.c_nu


def _near(a, b):
    return abs(a.c_beta - b.c_beta) <= DUPLICATE_TOL and abs(a.c_nu - b.c_nu) <= DUPLICATE_TOL


def strictly_dominates(a: ParetoPoint, b: ParetoPoint, tol: float = DUPLICATE_TOL) -> bool:
    """True if ``a`` beats ``b`` by more than ``tol`` in both coordinates."""
    return a.c_beta > b.c_beta + tol and a.c_nu > b.c_nu + tol


@dataclass
class ParetoFront:
    """Non-dominated points sorted by ``c_beta`` ascending.

    By default weak domination discards and near-duplicate criterion pairs
    keep only the first design seen, so ``c_nu`` is strictly descending.
    With ``keep_ties=True`` a point is dropped only when another beats it in
    both coordinates (by more than ``DUPLICATE_TOL``); designs that tie in
    one or both coordinates are all retained, sorted by ``(c_beta, -c_nu)``.
    """

    points: list[ParetoPoint] = field(default_factory=list)
    keep_ties: bool = False

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def insert(self, candidate: ParetoPoint) -> bool:
        """Insert ``candidate`` unless weakly dominated; returns whether it was kept.

        Points the candidate dominates are dropped. A candidate within
        ``DUPLICATE_TOL`` of an existing point in both coordinates is
        rejected, so the first design seen for a criterion pair is kept.
        """
        if not (math.isfinite(candidate.c_beta) and math.isfinite(candidate.c_nu)):
            return False
        if self.keep_ties:
            return self._insert_keep_ties(candidate)
        pts = self.points
        keys = [p.c_beta for p in pts]
        i = bisect.bisect_left(keys, candidate.c_beta)
        if i < len(pts) and pts[i].c_nu >= candidate.c_nu:
            return False
        for j in (i - 1, i):
            if 0 <= j < len(pts) and _near(pts[j], candidate):
                return False
        # pts[i] may share c_beta with a worse c_nu; prefix tail has c_nu <= candidate
        hi = i + 1 if i < len(pts) and pts[i].c_beta == candidate.c_beta else i
        lo = i
        while lo > 0 and pts[lo - 1].c_nu <= candidate.c_nu:
            lo -= 1
        pts[lo:hi] = [replace(candidate, on_hull=False)]
        return True

    def _insert_keep_ties(self, candidate):
        pts = self.points
        if any(strictly_dominates(p, candidate) for p in pts):
            return False
        kept = [p for p in pts if not strictly_dominates(candidate, p)]
        keys = [(p.c_beta, -p.c_nu) for p in kept]
        i = bisect.bisect_right(keys, (candidate.c_beta, -candidate.c_nu))
        kept.insert(i, replace(candidate, on_hull=False))
        self.points = kept
        return True

    def extend(self, candidates) -> None:
        for c in candidates:
            self.insert(c)

    def convex_hull(self) -> list[ParetoPoint]:
        """Flag and return the points on the upper-right convex hull.

        Endpoints are always included; interior collinear points are not.
        Of several points sharing a vertex (ties), only the first is flagged.
        """
        pts = self.points
        hull: list[int] = []
        for k, p in enumerate(pts):
            if hull and _near(pts[hull[-1]], p):
                continue
            while len(hull) >= 2:
                a, b = pts[hull[-2]], pts[hull[-1]]
                u, w = (b.c_beta - a.c_beta, b.c_nu - a.c_nu), (p.c_beta - a.c_beta, p.c_nu - a.c_nu)
                cross = u[0] * w[1] - u[1] * w[0]
                # collinear up to rounding counts as not strictly convex
                if cross >= -COLLINEAR_RTOL * math.hypot(*u) * math.hypot(*w):
                    hull.pop()
                else:
                    break
            hull.append(k)
        on = set(hull)
        self.points = [replace(p, on_hull=k in on) for k, p in enumerate(pts)]
        return [p for p in self.points if p.on_hull]

    def to_table(self) -> str:
        """CSV text with columns ``c_beta, c_nu, on_hull, design``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["c_beta", "c_nu", "on_hull", "design"])
        for p in self.points:
            design = " ".join(str(i) for i in getattr(p.design, "indices", p.design or ()))
            w.writerow([repr(p.c_beta), repr(p.c_nu), int(p.on_hull), design])
        return buf.getvalue()

    @classmethod
    def from_table(cls, text: str) -> "ParetoFront":
        from .model import Design

        rows = list(csv.DictReader(io.StringIO(text)))
        pts = [
            ParetoPoint(
                float(r["c_beta"]),
                float(r["c_nu"]),
                Design(tuple(int(t) for t in r["design"].split())) if r["design"] else None,
                bool(int(r["on_hull"])),
            )
            for r in rows
        ]
        return cls(pts)
