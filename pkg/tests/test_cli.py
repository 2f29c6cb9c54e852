import itertools
import json
import re

import numpy as np
import pytest

from ekdesign import Design, GridCriteria, GridSpace, lh_star_7, mek, snap_to_grid
from ekdesign.cli import DEFAULTS, build_model, main
from ekdesign.io import read_design, read_field_csv, write_design, write_field_csv


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def report(out):
    return dict(line.split(": ", 1) for line in out.strip().splitlines())


@pytest.fixture
def small_cfg(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("grid:\n  resolution: 4\noptimizer:\n  n: 3\n  n_max: 200\n")
    return cfg


def test_help_and_usage(capsys):
    assert run(capsys, "--help")[0] == 0
    assert run(capsys)[0] == 2
    assert run(capsys, "design", "--bogus")[0] == 2
    code, _, err = run(capsys, "design", "--algorithm", "nope")
    assert code == 2


def test_missing_files(capsys, tmp_path):
    missing = tmp_path / "nope.csv"
    code, out, err = run(capsys, "fit", missing)
    assert code == 2 and str(missing) in err and out == ""
    assert run(capsys, "design", "--config", tmp_path / "none.yaml")[0] == 2


def test_bad_config(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("model: [1, 2\n")
    assert run(capsys, "design", "--config", cfg)[0] == 2
    cfg.write_text("model:\n  colour: red\n")
    assert run(capsys, "design", "--config", cfg)[0] == 2


def test_overrides(tmp_path):
    from ekdesign.cli import build_parser, load_config

    args, extra = build_parser().parse_known_args(["design", "--model.rho", "3.5", "--grid.resolution=6", "--n", "4"])
    cfg = load_config(args, extra)
    assert cfg["model"]["rho"] == 3.5 and cfg["grid"]["resolution"] == 6 and cfg["optimizer"]["n"] == 4
    assert DEFAULTS["model"]["rho"] == 7.0  # defaults untouched


def test_eval_example1(capsys, tmp_path):
    g = GridSpace.regular(25)
    path = tmp_path / "lh.json"
    write_design(path, g, snap_to_grid(lh_star_7(), g))
    code, out, _ = run(capsys, "eval", path, "--alphas", "0.75")
    rep = report(out)
    assert code == 0
    assert float(rep["mek"]) == pytest.approx(1.9124, rel=0.02)
    assert "j_alpha[0.75]" in rep and "logdet_m_beta" in rep and "argmax_point" in rep


def test_eval_matches_library(capsys, tmp_path, small_cfg):
    g = GridSpace.regular(4)
    model = build_model(DEFAULTS)
    rng = np.random.default_rng(0)
    for _ in range(3):
        d = Design(tuple(int(i) for i in rng.choice(16, 3, replace=False)))
        path = tmp_path / "d.json"
        write_design(path, g, d)
        code, out, _ = run(capsys, "eval", path, "--config", small_cfg)
        assert code == 0
        ref = mek(model, g, d)
        rep = report(out)
        assert float(rep["mek"]) == pytest.approx(ref.value, rel=1e-9)
        assert int(rep["argmax_index"]) == ref.index


def test_eval_full_grid(capsys, tmp_path, small_cfg):
    g = GridSpace.regular(4)
    path = tmp_path / "full.json"
    write_design(path, g, Design(tuple(range(16))))
    code, out, _ = run(capsys, "eval", path, "--config", small_cfg)
    assert code == 0 and abs(float(report(out)["mek"])) < 1e-12


def test_eval_mismatch(capsys, tmp_path, small_cfg):
    path = tmp_path / "d.json"
    write_design(path, GridSpace.regular(5), Design((0, 1, 2)))
    assert run(capsys, "eval", path, "--config", small_cfg)[0] == 5


def test_design_exchange_small_optimum(capsys, tmp_path, small_cfg):
    g = GridSpace.regular(4)
    model = build_model(DEFAULTS)
    gc = GridCriteria(model, g)
    best = min(gc.mek_or_inf(c) for c in itertools.combinations(range(16), 3))
    code, out, _ = run(capsys, "design", "--config", small_cfg, "--algorithm", "direct-sa", "--out", tmp_path / "o")
    assert code == 0
    rep = report(out)
    assert float(rep["mek"]) == pytest.approx(best, rel=1e-9)
    d = read_design(tmp_path / "o" / "design.json", g)
    assert gc.mek(d.indices) == pytest.approx(best, rel=1e-9)
    assert (tmp_path / "o" / "trace.csv").exists()


@pytest.mark.parametrize("algo", ["pareto-sa", "exchange", "greedy-s1", "greedy-s2"])
def test_design_algorithms(capsys, tmp_path, small_cfg, algo):
    out_dir = tmp_path / algo
    args = ["design", "--config", small_cfg, "--algorithm", algo, "--out", out_dir, "--seed", 3]
    if algo.startswith("greedy"):
        args += ["--optimizer.steps", 2]
    code, out, _ = run(capsys, *args)
    assert code == 0
    rep = report(out)
    assert int(rep["mek_evaluations"]) >= 1
    doc = json.loads((out_dir / "design.json").read_text())
    assert doc["algorithm"] == algo
    if algo == "pareto-sa":
        assert (out_dir / "front.csv").exists() and len(list((out_dir / "runs").iterdir())) == 11
        assert int(rep["mek_evaluations"]) <= 11
    # bit-reproducible given the seed
    first = (out_dir / "design.json").read_bytes(), (out_dir / "trace.csv").read_bytes()
    assert run(capsys, *args)[0] == 0
    assert ((out_dir / "design.json").read_bytes(), (out_dir / "trace.csv").read_bytes()) == first


def test_design_full_grid(capsys, tmp_path, small_cfg):
    code, out, err = run(capsys, "design", "--config", small_cfg, "--n", 16, "--out", tmp_path)
    assert code == 0
    assert abs(float(report(out)["mek"])) < 1e-12
    assert err.count("the full grid is the only design") == 1


def test_design_non_estimable(capsys, tmp_path, small_cfg):
    assert run(capsys, "design", "--config", small_cfg, "--n", 1, "--out", tmp_path)[0] == 4
    assert run(capsys, "design", "--config", small_cfg, "--n", 17, "--out", tmp_path)[0] == 2


def test_simulate_fit_predict_render(capsys, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(
        "model:\n  kernel: matern32\n  trend: linear\n  rho: 2.723\n  gamma: 1.5\n  sigma2: 0.728\n"
        "  beta: [-1.511, -0.051, -0.210]\n"
        "grid:\n  resolution: 11\n  extents: [[0, 10], [0, 10]]\n"
        "optimizer:\n  n: 7\n  n_max: 100\n"
    )
    sim = tmp_path / "sim"
    assert run(capsys, "simulate", "--config", cfg, "--seed", 5, "--out", sim)[0] == 0
    field = sim / "field.csv"
    code, out, _ = run(capsys, "fit", field, "--config", cfg, "--out", tmp_path / "fit")
    assert code == 0 and "neg_log_lik" in report(out)
    fit = json.loads((tmp_path / "fit" / "fit.json").read_text())
    assert fit["trend"] == "linear" and fit["gamma_fixed"] == 1.5

    fitted = ["--config", cfg, "--model.fit", tmp_path / "fit" / "fit.json"]
    code, out, _ = run(capsys, "design", *fitted, "--algorithm", "exchange", "--optimizer.start", "coffeehouse", "--out", tmp_path / "d")
    assert code == 0
    design = tmp_path / "d" / "design.json"
    code, out, _ = run(capsys, "predict", design, field, *fitted, "--out", tmp_path / "p")
    assert code == 0
    pred = read_field_csv(tmp_path / "p" / "predicted.csv")
    truth = read_field_csv(field)
    idx = json.loads(design.read_text())["indices"]
    np.testing.assert_allclose(pred.values[idx], truth.values[idx], atol=1e-9)
    assert np.all(pred.columns["corrected_variance"] >= pred.columns["variance"] - 1e-12)
    rms = float(report(out)["residual_rms"])
    g = GridSpace.regular(11, extents=[(0, 10), (0, 10)])
    one = tmp_path / "one.json"
    write_design(one, g, Design((60,)))
    # one point cannot identify a linear trend
    assert run(capsys, "predict", one, field, *fitted, "--out", tmp_path / "p1")[0] == 4
    # minimal baseline: three points clustered in a corner identify the trend only
    base = tmp_path / "base.json"
    write_design(base, g, Design((0, 1, 11)))
    code, out, _ = run(capsys, "predict", base, field, *fitted, "--out", tmp_path / "p3")
    assert code == 0 and rms < float(report(out)["residual_rms"])

    svg = tmp_path / "f.svg"
    assert run(capsys, "render", tmp_path / "p" / "predicted.csv", "--column", "corrected_variance", "--design", design, "--output", svg)[0] == 0
    text = svg.read_text()
    assert len(re.findall(r'class="design"', text)) == 7
    svg2 = tmp_path / "f2.svg"
    run(capsys, "render", tmp_path / "p" / "predicted.csv", "--column", "corrected_variance", "--design", design, "--output", svg2)
    assert svg.read_bytes() == svg2.read_bytes()
    assert run(capsys, "render", field, "--column", "nope", "--output", svg)[0] == 2


def test_predict_missing_observations(capsys, tmp_path, small_cfg):
    g = GridSpace.regular(4)
    design = tmp_path / "d.json"
    write_design(design, g, Design((0, 5, 10)))
    obs = tmp_path / "obs.csv"
    mask = np.ones(16, bool)
    mask[5] = False
    write_field_csv(obs, g.candidates, np.where(mask, 1.0, np.nan), mask=mask)
    assert run(capsys, "predict", design, obs, "--config", small_cfg, "--out", tmp_path)[0] == 6


def test_render_constant_and_nonrect(capsys, tmp_path):
    g = GridSpace.regular(5)
    f = tmp_path / "c.csv"
    write_field_csv(f, g.candidates, np.full(25, 3.0))
    svg = tmp_path / "c.svg"
    assert run(capsys, "render", f, "--output", svg)[0] == 0
    cells = re.search(r'<g class="field">(.*?)</g>', svg.read_text(), re.S).group(1)
    fills = set(re.findall(r'fill="(#[0-9a-f]{6})"', cells))
    assert len(fills) == 1
    bad = tmp_path / "bad.csv"
    write_field_csv(bad, g.candidates[:-1], np.ones(24))
    assert run(capsys, "render", bad, "--output", svg)[0] == 7


def test_fit_failure(capsys, tmp_path):
    f = tmp_path / "tiny.csv"
    write_field_csv(f, np.array([[0.0, 0.0], [1.0, 0.0]]), [1.0, 2.0])
    assert run(capsys, "fit", f, "--model.trend", "linear")[0] == 3


def test_field_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    pts = rng.uniform(size=(30, 2))
    vals = rng.normal(size=30)
    mask = rng.uniform(size=30) > 0.3
    vals[~mask] = np.nan
    extra = {"variance": rng.uniform(size=30)}
    path = tmp_path / "f.csv"
    write_field_csv(path, pts, vals, mask=mask, extra=extra)
    t = read_field_csv(path)
    np.testing.assert_array_equal(t.points, pts)
    np.testing.assert_array_equal(t.values[mask], vals[mask])
    np.testing.assert_array_equal(t.columns["variance"], extra["variance"])
    np.testing.assert_array_equal(t.mask, mask)


def test_field_csv_rejects_unmasked_gaps(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("x1,x2,value\n0,0,1\n0,1,\n")
    with pytest.raises(ValueError):
        read_field_csv(path)
