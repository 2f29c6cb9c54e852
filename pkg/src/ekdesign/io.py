"""File formats: field CSV, design documents and SVG heatmaps."""
from __future__ import annotations

import csv
import html
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DesignMismatchError, EkDesignError
from .model import Design, GridSpace

__all__ = [
    "FieldTable",
    "NonRectangularError",
    "read_field_csv",
    "write_field_csv",
    "grid_from_points",
    "design_document",
    "read_design",
    "write_design",
    "render_svg",
]


class NonRectangularError(EkDesignError, ValueError):
    """The points of a field do not form a complete rectangular lattice."""


@dataclass(eq=False)
class FieldTable:
    """Contents of a field CSV: coordinates, value columns and an optional mask."""

    points: np.ndarray
    columns: dict[str, np.ndarray]
    mask: np.ndarray | None = None

    @property
    def values(self) -> np.ndarray:
        return self.columns["value"]


def read_field_csv(path) -> FieldTable:
    """Read ``x1,...,xd,value[,extra...][,mask]``.

    Empty or ``nan`` cells are read as NaN; they are only allowed in rows
    whose mask is 0.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    coords = [h for h in header if h.startswith("x") and h[1:].isdigit()]
    if not coords or coords != [f"x{i + 1}" for i in range(len(coords))]:
        raise ValueError(f"{path}: header must start with x1, x2, ...")
    if "value" not in header:
        raise ValueError(f"{path}: missing 'value' column")
    if any(len(r) != len(header) for r in rows):
        raise ValueError(f"{path}: ragged rows")
    data = np.array([[float(c) if c.strip() else np.nan for c in r] for r in rows], dtype=float).reshape(len(rows), len(header))
    col = {h: data[:, k] for k, h in enumerate(header)}
    pts = np.column_stack([col[c] for c in coords])
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{path}: coordinates must be finite")
    mask = None
    if "mask" in col:
        mask = col.pop("mask") != 0
    observed = np.ones(len(rows), dtype=bool) if mask is None else mask
    if not np.all(np.isfinite(col["value"][observed])):
        raise ValueError(f"{path}: missing values are only allowed where mask is 0")
    columns = {h: v for h, v in col.items() if h not in coords}
    return FieldTable(pts, columns, mask)


def write_field_csv(path, points, values, mask=None, extra: dict | None = None) -> None:
    """Write a field CSV; floats use ``repr`` so a read-back is exact."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cols = {"value": np.asarray(values, dtype=float)}
    cols.update({k: np.asarray(v, dtype=float) for k, v in (extra or {}).items()})
    header = [f"x{i + 1}" for i in range(pts.shape[1])] + list(cols)
    if mask is not None:
        header.append("mask")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, p in enumerate(pts):
            row = [repr(float(c)) for c in p] + [repr(float(v[k])) for v in cols.values()]
            if mask is not None:
                row.append(int(bool(mask[k])))
            w.writerow(row)


def _lattice_shape(pts):
    axes = [np.unique(pts[:, j]) for j in range(pts.shape[1])]
    shape = tuple(len(a) for a in axes)
    if int(np.prod(shape)) != len(pts):
        return None, axes
    return shape, axes


def grid_from_points(points, eval_points=None) -> GridSpace:
    """Candidate grid from explicit points.

    A complete lattice listed in C order (first coordinate slowest) becomes
    a regular grid, so neighbour moves are available.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    shape, axes = _lattice_shape(pts)
    if shape is not None:
        mesh = np.meshgrid(*axes, indexing="ij")
        lattice = np.column_stack([m.ravel() for m in mesh])
        if not np.array_equal(lattice, pts):
            shape = None
    return GridSpace(pts, eval_points, shape)


# -- design documents -------------------------------------------------------


def design_document(grid: GridSpace, design: Design, **extra) -> dict:
    doc = {
        "grid": {"fingerprint": grid.fingerprint(), "size": grid.size, "dim": grid.dim},
        "indices": list(design.indices),
        "points": design.points(grid).tolist(),
    }
    doc.update(extra)
    return doc


def write_design(path, grid: GridSpace, design: Design, **extra) -> None:
    Path(path).write_text(json.dumps(design_document(grid, design, **extra), indent=2) + "\n")


def read_design(path, grid: GridSpace) -> Design:
    """Load a design document and check it belongs to ``grid``.

    Raises :class:`DesignMismatchError` when the grid fingerprint differs or
    an index and its stored coordinates disagree.
    """
    doc = json.loads(Path(path).read_text())
    fp = doc.get("grid", {}).get("fingerprint")
    if fp != grid.fingerprint():
        raise DesignMismatchError(f"design was made for grid {fp}, current grid is {grid.fingerprint()}")
    design = Design(tuple(doc["indices"])).check(grid)
    if "points" in doc and not np.allclose(design.points(grid), np.asarray(doc["points"], dtype=float)):
        raise DesignMismatchError("design indices and coordinates disagree")
    return design


# -- SVG ---------------------------------------------------------------------

_RAMP = np.array([[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]], dtype=float)


def _color(t):
    t = float(np.clip(t, 0.0, 1.0)) * (len(_RAMP) - 1)
    k = min(int(t), len(_RAMP) - 2)
    rgb = _RAMP[k] + (t - k) * (_RAMP[k + 1] - _RAMP[k])
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def render_svg(points, values, design_points=None, cell: int = 12, title: str = "") -> str:
    """Heatmap of a 2-D rectangular field as SVG text.

    Cells are coloured on a fixed five-stop ramp between the field minimum
    and maximum (NaN cells are left grey); design points are drawn as
    circles of class ``design``. Output depends only on the inputs.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    vals = np.asarray(values, dtype=float)
    if pts.shape[1] != 2:
        raise NonRectangularError("only two-dimensional fields can be rendered")
    shape, axes = _lattice_shape(pts)
    if shape is None or len(np.unique(pts, axis=0)) != len(pts):
        raise NonRectangularError("points do not form a complete rectangular grid")
    nx, ny = shape
    ix = np.searchsorted(axes[0], pts[:, 0])
    iy = np.searchsorted(axes[1], pts[:, 1])
    finite = vals[np.isfinite(vals)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 0.0)
    span = hi - lo
    margin, legend_w = 10, 60
    width, height = 2 * margin + nx * cell + legend_w, 2 * margin + ny * cell + (20 if title else 0)
    top = margin + (20 if title else 0)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    if title:
        out.append(f'<text x="{margin}" y="{margin + 12}" font-size="12" font-family="sans-serif">{html.escape(title)}</text>')
    out.append('<g class="field">')
    for a, b, v in zip(ix, iy, vals):
        x = margin + a * cell
        y = top + (ny - 1 - b) * cell  # second coordinate increases upwards
        fill = "#bbbbbb" if not np.isfinite(v) else _color((v - lo) / span if span > 0 else 0.0)
        out.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}"/>')
    out.append("</g>")
    lx = 2 * margin + nx * cell
    out.append('<g class="legend">')
    steps = 10
    sh = ny * cell / steps
    for k in range(steps):
        out.append(
            f'<rect x="{lx}" y="{top + (steps - 1 - k) * sh:.2f}" width="12" height="{sh:.2f}" fill="{_color(k / (steps - 1))}"/>'
        )
    out.append(f'<text x="{lx + 16}" y="{top + 10}" font-size="10" font-family="sans-serif">{hi:.4g}</text>')
    out.append(f'<text x="{lx + 16}" y="{top + ny * cell}" font-size="10" font-family="sans-serif">{lo:.4g}</text>')
    out.append("</g>")
    if design_points is not None:
        dp = np.atleast_2d(np.asarray(design_points, dtype=float))
        dx = np.interp(dp[:, 0], axes[0], np.arange(nx))
        dy = np.interp(dp[:, 1], axes[1], np.arange(ny))
        out.append('<g class="designs">')
        for a, b in zip(dx, dy):
            cx = margin + (a + 0.5) * cell
            cy = top + (ny - 1 - b + 0.5) * cell
            out.append(f'<circle class="design" cx="{cx:.2f}" cy="{cy:.2f}" r="{cell * 0.35:.2f}" fill="none" stroke="#ff0000" stroke-width="2"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
