"""Command-line interface: ``ekdesign {fit,design,eval,predict,render,simulate}``.

Exit codes: 0 ok, 1 other library error, 2 usage/config/parse error,
3 fit failure, 4 non-estimable design problem, 5 design/grid mismatch,
6 missing observations, 7 non-rectangular field.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .covariance import CovParams, KernelFamily, Scaling, Variant
from .criteria import GridCriteria
from .designs import coffeehouse, lh_star_7, snap_to_grid
from .errors import DesignMismatchError, EkDesignError, FitError, NonEstimableError, SingularMatrixError
from .fitting import FieldData, profile_ml
from .io import NonRectangularError, grid_from_points, read_design, read_field_csv, render_svg, write_design, write_field_csv
from .kriging import simulate_field
from .model import Design, GpModel, GridSpace
from .optimize import (
    CriterionTrace,
    SaConfig,
    TraceRow,
    default_start,
    direct_sa_mek,
    exchange_algorithm,
    greedy_augment,
    pareto_sa,
)

log = logging.getLogger("ekdesign")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_FIT, EXIT_NONESTIMABLE, EXIT_MISMATCH, EXIT_MISSING_OBS, EXIT_NONRECT = range(8)

ALGORITHMS = ("pareto-sa", "exchange", "greedy-s1", "greedy-s2", "direct-sa")

DEFAULTS = {
    "model": {
        "trend": "constant",
        "kernel": "exponential",
        "scaling": "plain",
        "sigma2": 1.0,
        "rho": 7.0,
        "gamma": 0.5,
        "free": [True, False],
        "sigma2_known": False,
        "beta": None,
        "fit": None,
    },
    "grid": {"resolution": 25, "extents": None, "eval_resolution": None, "points": None},
    "optimizer": {
        "algorithm": "pareto-sa",
        "n": 7,
        "t0": 0.6,
        "r": 0.93,
        "n_max": 5000,
        "alphas": None,
        "hull_only": False,
        "keep_ties": True,
        "start": None,
        "steps": 15,
    },
    "io": {"input": None, "out": "out", "seed": 0},
}


class UsageError(Exception):
    pass


class MissingObservationsError(EkDesignError):
    pass


# -- configuration ------------------------------------------------------------


def _merge(base, extra, where="config"):
    for key, val in (extra or {}).items():
        if key not in base:
            raise UsageError(f"unknown {where} key '{key}'")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise UsageError(f"{where} key '{key}' must be a mapping")
            _merge(base[key], val, f"{where}.{key}")
        else:
            base[key] = val
    return base


def _parse_overrides(extra: list[str]) -> dict:
    """Turn leftover ``--section.key value`` / ``--section.key=value`` flags into a nested dict."""
    out: dict = {}
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--") or "." not in tok:
            raise UsageError(f"unrecognized argument '{tok}'")
        name, eq, raw = tok[2:].partition("=")
        if not eq:
            raw = next(it, None)
            if raw is None:
                raise UsageError(f"flag --{name} needs a value")
        section, _, key = name.partition(".")
        section, key = section.replace("-", "_"), key.replace("-", "_")
        out.setdefault(section, {})[key] = yaml.safe_load(raw)
    return out


def load_config(args, extra) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            doc = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise UsageError(f"cannot parse {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError(f"{path}: top level must be a mapping")
        _merge(cfg, doc)
    _merge(cfg, _parse_overrides(extra), "flag")
    opt = cfg["optimizer"]
    for flag in ("algorithm", "n", "hull_only", "alphas"):
        val = getattr(args, flag, None)
        if val is not None:
            opt[flag] = val
    if args.seed is not None:
        cfg["io"]["seed"] = args.seed
    if args.out is not None:
        cfg["io"]["out"] = args.out
    if getattr(args, "input", None):
        cfg["io"]["input"] = args.input
    if opt["algorithm"] not in ALGORITHMS:
        raise UsageError(f"algorithm must be one of {', '.join(ALGORITHMS)}")
    return cfg


def _alphas(val):
    if val is None:
        return None
    if isinstance(val, str):
        val = [v for v in val.replace(",", " ").split()]
    try:
        return [float(v) for v in val]
    except (TypeError, ValueError):
        raise UsageError(f"cannot read alphas from {val!r}") from None


def _bool(text):
    low = str(text).lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_family(mc) -> KernelFamily:
    try:
        return KernelFamily(Variant(mc["kernel"]), Scaling(mc["scaling"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def build_model(cfg) -> GpModel:
    mc = dict(cfg["model"])
    if mc.get("fit"):
        path = Path(mc["fit"])
        if not path.is_file():
            raise UsageError(f"fit file not found: {path}")
        fit = json.loads(path.read_text())
        mc.update(sigma2=fit["sigma2_hat"], rho=fit["rho_hat"], gamma=fit["gamma_fixed"], beta=fit["beta_hat"], trend=fit["trend"])
    family = build_family(mc)
    try:
        params = CovParams(rho=float(mc["rho"]), gamma=float(mc["gamma"]), free=tuple(mc["free"]))
        return GpModel(
            family,
            params,
            sigma2=float(mc["sigma2"]),
            trend=mc["trend"],
            beta=mc["beta"],
            sigma2_known=bool(mc["sigma2_known"]),
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid model section: {exc}") from None


def build_grid(cfg) -> GridSpace:
    gc = cfg["grid"]
    try:
        if gc["points"] is not None:
            pts = gc["points"]
            if isinstance(pts, str):
                pts = read_field_csv(_existing(pts)).points
            return grid_from_points(pts)
        return GridSpace.regular(gc["resolution"], gc["extents"], gc["eval_resolution"])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid grid section: {exc}") from None


def _existing(path) -> Path:
    if path is None:
        raise UsageError("no input file given")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"file not found: {p}")
    return p


def _out_dir(cfg) -> Path:
    out = Path(cfg["io"]["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sa_config(cfg, **kw) -> SaConfig:
    opt = cfg["optimizer"]
    try:
        return SaConfig(t0=float(opt["t0"]), r=float(opt["r"]), n_max=int(opt["n_max"]), seed=int(cfg["io"]["seed"]), **kw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid optimizer section: {exc}") from None


def start_design(spec, grid: GridSpace, n: int, seed: int) -> Design:
    """``None``/"random" (seeded random LH), "lh" (7-point maximin LH), "coffeehouse" or a design file."""
    if spec in (None, "random"):
        return default_start(grid, n, seed)
    if spec == "lh":
        if n != 7:
            raise UsageError("the 'lh' start is the 7-point design; set n to 7")
        lo, hi = grid.candidates.min(axis=0), grid.candidates.max(axis=0)
        return snap_to_grid(lo + lh_star_7() * (hi - lo), grid)
    if spec == "coffeehouse":
        return coffeehouse(grid, n)
    design = read_design(_existing(spec), grid)
    return design


# -- reporting ------------------------------------------------------------------


def _report(items: dict) -> None:
    for key, val in items.items():
        if isinstance(val, float):
            val = repr(val)
        elif isinstance(val, (list, tuple)):
            val = " ".join(repr(v) if isinstance(v, float) else str(v) for v in val)
        print(f"{key}: {val}")


# -- commands ---------------------------------------------------------------------


def cmd_fit(cfg) -> int:
    table = read_field_csv(_existing(cfg["io"]["input"]))
    grid = grid_from_points(table.points)
    data = FieldData(grid, table.values, table.mask)
    mc = cfg["model"]
    family = build_family(mc)
    gamma = float(mc["gamma"])
    fit = profile_ml(data, mc["trend"], family, gamma_fixed=gamma)
    doc = fit.to_dict()
    doc.update(kernel=mc["kernel"], scaling=mc["scaling"], n_obs=int(data.observed.sum()))
    out = _out_dir(cfg)
    (out / "fit.json").write_text(json.dumps(doc, indent=2) + "\n")
    _report(
        {
            "neg_log_lik": fit.neg_log_lik,
            "beta_hat": [float(b) for b in fit.beta_hat],
            "sigma2_hat": fit.sigma2_hat,
            "rho_hat": fit.rho_hat,
            "gamma_fixed": fit.gamma_fixed,
            "written": str(out / "fit.json"),
        }
    )
    return EXIT_OK


def cmd_design(cfg) -> int:
    model, grid = build_model(cfg), build_grid(cfg)
    opt, seed = cfg["optimizer"], int(cfg["io"]["seed"])
    n = int(opt["n"])
    if not 1 <= n <= grid.size:
        raise UsageError(f"n must lie in [1, {grid.size}]")
    crit = GridCriteria(model, grid)
    algo = opt["algorithm"]
    out = _out_dir(cfg)
    extra = {}
    if n == grid.size:
        print(f"ekdesign: n equals the number of candidates ({n}); the full grid is the only design", file=sys.stderr)
        design = Design(tuple(range(n)))
        value = crit.mek(np.array(design.indices))
        trace = CriterionTrace([TraceRow(0, value, True)], design, value, crit.mek_evaluations)
    elif algo == "pareto-sa":
        start = None if opt["start"] in (None, "random") else start_design(opt["start"], grid, n, seed)
        res = pareto_sa(model, grid, n, _alphas(opt["alphas"]), _sa_config(cfg), start, crit)
        design, value, trace = res.design, res.mek, res.trace
        (out / "front.csv").write_text(res.front.to_table())
        runs = out / "runs"
        runs.mkdir(exist_ok=True)
        for run in res.runs:
            (runs / f"alpha_{run.info['alpha']:.4f}.csv").write_text(run.to_table())
        extra["front_size"] = len(res.front)
    elif algo == "exchange":
        start = start_design(opt["start"], grid, n, seed)
        trace = exchange_algorithm(model, grid, start, bool(opt["hull_only"]), crit, keep_ties=bool(opt["keep_ties"]))
        design, value = trace.best_design, trace.best_value
        extra["iterations"] = len(trace.rows) - 1
    elif algo in ("greedy-s1", "greedy-s2"):
        base = start_design(opt["start"], grid, n, seed)
        strategy = "S1" if algo == "greedy-s1" else "S2"
        res = greedy_augment(model, grid, base, strategy, int(opt["steps"]), crit)
        design, value = res.designs[-1], res.mek[-1]
        trace = CriterionTrace([TraceRow(k, v, True) for k, v in enumerate(res.mek)], design, value, crit.mek_evaluations)
        extra["added"] = res.added
    else:
        start = None if opt["start"] in (None, "random") else start_design(opt["start"], grid, n, seed)
        trace = direct_sa_mek(model, grid, n, _sa_config(cfg), start, crit)
        design, value = trace.best_design, trace.best_value
    (out / "trace.csv").write_text(trace.to_table())
    write_design(out / "design.json", grid, design, algorithm=algo, mek=float(value), mek_evaluations=crit.mek_evaluations, seed=seed)
    report = {"algorithm": algo, "mek": float(value), "mek_evaluations": crit.mek_evaluations, "indices": list(design.indices)}
    report.update(extra)
    report["written"] = str(out / "design.json")
    _report(report)
    return EXIT_OK


def _surface(crit, idx):
    try:
        return crit.surface(idx)
    except SingularMatrixError as exc:
        raise NonEstimableError(f"design cannot identify the model: {exc}") from None


def cmd_eval(cfg, design_path, alphas) -> int:
    model, grid = build_model(cfg), build_grid(cfg)
    design = read_design(_existing(design_path), grid)
    crit = GridCriteria(model, grid)
    idx = np.array(design.indices)
    _, corrected = _surface(crit, idx)
    i = int(np.argmax(corrected))
    lb, ln = crit.log_dets(idx)[0]
    report = {
        "mek": float(corrected[i]),
        "argmax_index": i,
        "argmax_point": [float(c) for c in grid.eval_points[i]],
        "logdet_m_beta": float(lb),
        "logdet_m_nu": float(ln),
    }
    for a in _alphas(alphas) or [0.5, 0.75, 1.0]:
        report[f"j_alpha[{a:g}]"] = float(crit.j_alpha(idx, a)[0])
    _report(report)
    return EXIT_OK


def cmd_predict(cfg, design_path, obs_path) -> int:
    model, grid = build_model(cfg), build_grid(cfg)
    design = read_design(_existing(design_path), grid)
    obs = read_field_csv(_existing(obs_path))
    observed = np.ones(len(obs.points), dtype=bool) if obs.mask is None else obs.mask
    dpts = design.points(grid)
    y = np.empty(len(design))
    for k, p in enumerate(dpts):
        hit = np.flatnonzero(np.all(np.isclose(obs.points, p, atol=1e-9), axis=1) & observed)
        if hit.size == 0:
            raise MissingObservationsError(f"no observation at design point {p.tolist()}")
        y[k] = obs.values[hit[0]]
    crit = GridCriteria(model, grid)
    var, corrected = _surface(crit, np.array(design.indices))
    system = crit.system(np.array(design.indices))
    c = crit.Ke[:, list(design.indices)]
    pred = system.weights(c, crit.Fe) @ y
    out = _out_dir(cfg)
    write_field_csv(out / "predicted.csv", grid.eval_points, pred, extra={"variance": var, "corrected_variance": corrected})
    # truth where the observation file covers an eval point
    truth = np.full(len(pred), np.nan)
    for k, p in enumerate(grid.eval_points):
        hit = np.flatnonzero(np.all(np.isclose(obs.points, p, atol=1e-9), axis=1) & observed)
        if hit.size:
            truth[k] = obs.values[hit[0]]
    have = np.isfinite(truth)
    resid = truth - pred
    report = {"predicted": str(out / "predicted.csv"), "n_truth": int(have.sum())}
    if have.any():
        write_field_csv(out / "residuals.csv", grid.eval_points[have], resid[have])
        report["residual_rms"] = float(np.sqrt(np.mean(resid[have] ** 2)))
        report["residuals"] = str(out / "residuals.csv")
    _report(report)
    return EXIT_OK


def cmd_render(cfg, column, design_path, output, title) -> int:
    table = read_field_csv(_existing(cfg["io"]["input"]))
    if column not in table.columns:
        raise UsageError(f"column '{column}' not in {cfg['io']['input']} (have {', '.join(table.columns)})")
    dpts = None
    if design_path:
        doc = json.loads(_existing(design_path).read_text())
        dpts = np.asarray(doc["points"], dtype=float)
    svg = render_svg(table.points, table.columns[column], dpts, title=title or "")
    path = Path(output) if output else _out_dir(cfg) / "render.svg"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg)
    _report({"written": str(path)})
    return EXIT_OK


def cmd_simulate(cfg) -> int:
    model, grid = build_model(cfg), build_grid(cfg)
    if model.beta is None:
        model = model.with_(beta=(0.0,) * model.n_trend(grid.dim))
    y = simulate_field(model, grid, int(cfg["io"]["seed"]))
    out = _out_dir(cfg)
    write_field_csv(out / "field.csv", grid.candidates, y)
    _report({"written": str(out / "field.csv"), "mean": float(y.mean()), "sd": float(y.std())})
    return EXIT_OK


# -- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="global random seed (io.seed)")
    common.add_argument("--out", help="output directory (io.out)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = argparse.ArgumentParser(
        prog="ekdesign",
        description="Spatial designs that minimize the maximum corrected kriging variance.",
        epilog="Any config value can be overridden with --section.key VALUE, e.g. --model.rho 7.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", parents=[common], help="profile-likelihood fit of a field CSV")
    f.add_argument("input", nargs="?", help="field CSV (io.input)")

    d = sub.add_parser("design", parents=[common], help="optimize a design")
    d.add_argument("--algorithm", choices=ALGORITHMS)
    d.add_argument("--n", type=int, help="number of design points")
    d.add_argument("--hull-only", dest="hull_only", type=_bool, metavar="BOOL")
    d.add_argument("--alphas", help="comma separated weights in [0, 1]")

    e = sub.add_parser("eval", parents=[common], help="evaluate a design")
    e.add_argument("design", help="design document")
    e.add_argument("--alphas", help="weights for J_alpha")

    r = sub.add_parser("predict", parents=[common], help="kriging prediction from observations")
    r.add_argument("design", help="design document")
    r.add_argument("observations", help="field CSV holding (at least) the design point values")

    h = sub.add_parser("render", parents=[common], help="SVG heatmap of a field CSV")
    h.add_argument("input", nargs="?", help="field CSV (io.input)")
    h.add_argument("--column", default="value")
    h.add_argument("--design", help="design document whose points are marked")
    h.add_argument("--output", help="SVG path (default OUT/render.svg)")
    h.add_argument("--title")

    sub.add_parser("simulate", parents=[common], help="draw a Gaussian field on the grid")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args, extra)
        if args.command == "fit":
            return cmd_fit(cfg)
        if args.command == "design":
            return cmd_design(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.design, args.alphas)
        if args.command == "predict":
            return cmd_predict(cfg, args.design, args.observations)
        if args.command == "render":
            return cmd_render(cfg, args.column, args.design, args.output, args.title)
        return cmd_simulate(cfg)
    except UsageError as exc:
        print(f"ekdesign: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FitError as exc:
        print(f"ekdesign: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except NonEstimableError as exc:
        print(f"ekdesign: not estimable: {exc}", file=sys.stderr)
        return EXIT_NONESTIMABLE
    except DesignMismatchError as exc:
        print(f"ekdesign: design mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except MissingObservationsError as exc:
        print(f"ekdesign: missing observations: {exc}", file=sys.stderr)
        return EXIT_MISSING_OBS
    except NonRectangularError as exc:
        print(f"ekdesign: {exc}", file=sys.stderr)
        return EXIT_NONRECT
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"ekdesign: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EkDesignError as exc:
        print(f"ekdesign: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
