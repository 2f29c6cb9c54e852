"""End-to-end acceptance checks at their stated tolerances.

Each test records one PASS/FAIL line (shown in the terminal summary) before
asserting, so a red criterion still reports its measured numbers.
"""
import itertools
import time

import numpy as np
import pytest

from ekdesign import (
    CovParams,
    Design,
    FieldData,
    GpModel,
    GridCriteria,
    GridSpace,
    KernelFamily,
    ParetoFront,
    ParetoPoint,
    SaConfig,
    Variant,
    coffeehouse,
    direct_sa_mek,
    exchange_algorithm,
    greedy_augment,
    kernel_grad_nu,
    kernel_value,
    pareto_sa,
    profile_ml,
    simulate_field,
    v_nu,
    m_theta,
)
from ekdesign.covariance import cov_matrix
from ekdesign.kriging import kriging_weights, weight_jacobian

from .conftest import ACCEPTANCE
from .oracles import pareto_brute

pytestmark = pytest.mark.slow

REFERENCE_MEK_LH = 1.9124


def verdict(k, ok, detail):
    line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[k] = line
    print(line)
    assert ok, line


def central(f, x, h):
    return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h)


@pytest.fixture(scope="session")
def exchange_full(exp7_model, unit_grid, lh7):
    t = time.perf_counter()
    tr = exchange_algorithm(exp7_model, unit_grid, lh7, criteria=GridCriteria(exp7_model, unit_grid))
    return tr, time.perf_counter() - t


@pytest.fixture(scope="session")
def pareto_runs(exp7_model, unit_grid):
    crit = GridCriteria(exp7_model, unit_grid)
    out = {}
    for seed in range(5):
        crit.mek_evaluations = 0
        out[seed] = pareto_sa(exp7_model, unit_grid, 7, cfg=SaConfig(seed=seed), criteria=crit)
    return out


def test_criterion_01_baseline_mek(exp7_model, unit_grid, lh7):
    t = time.perf_counter()
    value = GridCriteria(exp7_model, unit_grid).mek(np.array(lh7.indices))
    elapsed = time.perf_counter() - t
    known = GridCriteria(exp7_model.with_(sigma2_known=True), unit_grid).mek(np.array(lh7.indices))
    linear = GridCriteria(exp7_model.with_(trend="linear"), unit_grid).mek(np.array(lh7.indices))
    rel = value / REFERENCE_MEK_LH - 1
    verdict(
        1,
        abs(rel) <= 0.02 and elapsed < 10,
        f"MEK(xi_Lh)={value:.5f} ({rel:+.3%} vs 1.9124), {elapsed:.2f}s; "
        f"sigma2-known {known:.5f}, linear-in-x trend {linear:.5f}",
    )


def test_criterion_02_exchange(exp7_model, unit_grid, lh7, exchange_full):
    full, t_full = exchange_full
    t = time.perf_counter()
    hull = exchange_algorithm(exp7_model, unit_grid, lh7, hull_only=True, criteria=GridCriteria(exp7_model, unit_grid))
    t_hull = time.perf_counter() - t
    it_full = full.info["iterations"]
    ok = full.best_value <= 1.25 and it_full <= 6 and hull.best_value <= 1.25 and hull.mek_evaluations <= 100
    ok = ok and t_full < 300 and t_hull < 300
    verdict(
        2,
        ok,
        f"full {full.best_value:.7f} after {it_full} moves, {full.mek_evaluations} MEK evals, {t_full:.0f}s; "
        f"hull {hull.best_value:.7f}, {hull.mek_evaluations} MEK evals, {t_hull:.0f}s",
    )


def test_criterion_03_pareto_sa_efficiency(pareto_runs, exchange_full):
    best = exchange_full[0].best_value
    ratios = {s: r.mek / best for s, r in pareto_runs.items()}
    evals = {s: r.trace.mek_evaluations for s, r in pareto_runs.items()}
    good = sum(v <= 1.10 for v in ratios.values())
    verdict(
        3,
        good >= 4 and max(evals.values()) <= 11,
        "ratios " + " ".join(f"{v:.4f}" for v in ratios.values())
        + f" vs exchange {best:.5f} ({good}/5 <= 1.10); MEK evals {sorted(evals.values())}",
    )


def test_criterion_04_random_dominance(pareto_runs, exp7_criteria, unit_grid):
    res = pareto_runs[0]
    k = res.trace.mek_evaluations  # same effort as the Pareto run
    draws = 1000
    meks = np.empty((draws, k))
    for s in range(draws):
        rng = np.random.default_rng(s)
        for j in range(k):
            meks[s, j] = exp7_criteria.mek_or_inf(rng.choice(unit_grid.size, 7, replace=False))
    frac_sets = float(np.mean(meks.min(axis=1) > res.mek))
    frac_single = float(np.mean(meks[:, 0] > res.mek))
    verdict(
        4,
        frac_sets >= 0.90,
        f"MEK(xi_P)={res.mek:.5f} beats {frac_sets:.1%} of {draws} sets of {k} random designs "
        f"(best-of-set); {frac_single:.1%} of single designs",
    )


def test_criterion_05_small_instance():
    t = time.perf_counter()
    g = GridSpace.regular(4)
    model = GpModel(KernelFamily(Variant.EXPONENTIAL), CovParams(7.0))
    gc = GridCriteria(model, g)
    meks = {c: gc.mek_or_inf(np.array(c)) for c in itertools.combinations(range(16), 3)}
    best = min(meks.values())
    hit = lambda v: v <= best * (1 + 1e-9)
    ex = 0
    for s in range(20):
        start = Design(tuple(int(i) for i in np.random.default_rng(s).choice(16, 3, replace=False)))
        ex += hit(exchange_algorithm(model, g, start, criteria=GridCriteria(model, g)).best_value)
    sa = sum(hit(direct_sa_mek(model, g, 3, SaConfig(n_max=2000, seed=s), criteria=GridCriteria(model, g)).best_value) for s in range(5))
    elapsed = time.perf_counter() - t
    verdict(
        5,
        len(meks) == 560 and ex >= 15 and sa >= 4 and elapsed < 120,
        f"optimum {best:.6f} over {len(meks)} designs; exchange {ex}/20, direct SA {sa}/5, {elapsed:.0f}s",
    )


def test_criterion_06_derivatives():
    worst = {}
    gen = KernelFamily(Variant.MATERN)
    # kernel derivatives over the (rho, gamma, d) lattice
    err = 0.0
    for rho, gamma, d in itertools.product([0.4, 1.2, 3.0], [0.6, 1.7, 3.4], [0.05, 0.5, 2.5]):
        g = kernel_grad_nu(gen, CovParams(rho, gamma, free=(True, True)), d)
        fr = central(lambda r: kernel_value(gen, CovParams(r, gamma), d), rho, 1e-3)
        fg = central(lambda s: kernel_value(gen, CovParams(rho, s), d), gamma, 1e-3)
        scale = max(abs(fr), abs(fg), 1e-3)
        err = max(err, abs(g[0] - fr) / scale, abs(g[1] - fg) / scale)
    worst["dc"] = err
    # weight Jacobian and M_nu on random designs
    grid = GridSpace.regular(9)
    models = [
        GpModel(KernelFamily(Variant.EXPONENTIAL), CovParams(7.0)),
        GpModel(KernelFamily(Variant.MATERN32), CovParams(0.4), trend="linear"),
        GpModel(gen, CovParams(0.3, 1.3, free=(True, True))),
    ]
    ej = em = 0.0
    for seed, model in itertools.product(range(3), models):
        rng = np.random.default_rng(seed)
        design = Design(tuple(int(i) for i in rng.choice(grid.size, 7, replace=False)))
        x = rng.random(2)
        J = weight_jacobian(model, grid, design, x)
        pts = design.points(grid)
        C = cov_matrix(model.family, model.params, pts)
        A = []
        for k, name in enumerate(model.free_names):
            p0 = getattr(model.params, name)
            fd = central(lambda t: kriging_weights(model.with_(params=model.params.replace(**{name: t})), grid, design, x), p0, 1e-4)
            ej = max(ej, np.max(np.abs(J[k] - fd)) / max(np.max(np.abs(fd)), 1e-3))
            dC = central(lambda t: cov_matrix(model.family, model.params.replace(**{name: t}), pts), p0, 1e-4)
            A.append(np.linalg.solve(C, dC))
        M_fd = np.array([[0.5 * np.trace(a @ b) for b in A] for a in A])
        M = m_theta(model, grid, design).m_nu
        em = max(em, np.max(np.abs(M - M_fd)) / np.max(np.abs(M_fd)))
    worst["dv"], worst["m_nu"] = ej, em
    d = np.linspace(0, 5, 101)
    closed = max(
        np.max(np.abs(kernel_value(gen, CovParams(r, 1.5), d) - kernel_value(KernelFamily(Variant.MATERN32), CovParams(r), d)))
        for r in (0.3, 1.0, 2.7)
    )
    closed = max(
        closed,
        max(
            np.max(np.abs(kernel_value(gen, CovParams(r, 2.5), d) - kernel_value(KernelFamily(Variant.MATERN52), CovParams(r), d)))
            for r in (0.3, 1.0, 2.7)
        ),
    )
    ok = max(worst.values()) < 1e-5 and closed < 1e-10
    verdict(
        6,
        ok,
        "worst relative FD error " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f"; closed forms {closed:.1e}",
    )


def test_criterion_07_sigma2_invariance(exp7_model, unit_grid, lh7, exchange_full):
    base = m_theta(exp7_model, unit_grid, lh7)
    v_err = mek_err = 0.0
    designs = {}
    ref_mek = GridCriteria(exp7_model, unit_grid).mek(np.array(lh7.indices))
    for s2 in (0.5, 1.0, 4.0):
        model = exp7_model.with_(sigma2=s2)
        v_err = max(v_err, np.max(np.abs(v_nu(m_theta(model, unit_grid, lh7)) - v_nu(base))))
        mek_err = max(mek_err, abs(GridCriteria(model, unit_grid).mek(np.array(lh7.indices)) / s2 - ref_mek) / ref_mek)
        tr = exchange_full[0] if s2 == 1.0 else exchange_algorithm(model, unit_grid, lh7, criteria=GridCriteria(model, unit_grid))
        designs[s2] = tr.best_design.key()
    same = len(set(designs.values())) == 1
    verdict(
        7,
        v_err <= 1e-10 and mek_err <= 1e-12 and same,
        f"max |dV_nu| {v_err:.1e}, MEK/sigma2 spread {mek_err:.1e}, exchange designs identical: {same}",
    )


def test_criterion_08_pareto(exchange_full):
    mismatches = 0
    hull_ok = True
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        b, v = rng.normal(size=(2, 200))
        f = ParetoFront()
        f.extend(ParetoPoint(float(x), float(y), k) for k, (x, y) in enumerate(zip(b, v)))
        mismatches += sorted(p.design for p in f) != sorted(pareto_brute(b, v))
        hull = f.convex_hull()
        hull_ok &= {p.design for p in hull} <= {p.design for p in f}
    first = exchange_full[0].info["per_iteration"][0]
    fr, hl = first["front"] / 296 - 1, first["hull"] / 15 - 1
    verdict(
        8,
        mismatches == 0 and hull_ok and abs(fr) <= 0.2 and abs(hl) <= 0.2,
        f"brute-force mismatches {mismatches}/50, hull subset {hull_ok}; "
        f"first exchange iteration front {first['front']} ({fr:+.0%} vs 296), hull {first['hull']} ({hl:+.0%} vs 15)",
    )


def test_criterion_09_synthetic_end_to_end():
    t = time.perf_counter()
    grid = GridSpace.regular(21, extents=[(0, 20), (0, 20)])
    fam = KernelFamily(Variant.MATERN32)
    truth = GpModel(fam, CovParams(rho=2.723), sigma2=0.728, trend="linear", beta=(-1.511, -0.051, -0.210))
    fit = profile_ml(FieldData(grid, simulate_field(truth, grid, 2024)), "linear", fam, gamma_fixed=1.5)
    model = fit.to_model(fam)
    crit = GridCriteria(model, grid)
    res = pareto_sa(model, grid, 7, cfg=SaConfig(seed=0), criteria=crit)
    ex = exchange_algorithm(model, grid, res.design, criteria=crit)
    coffee = crit.mek(np.array(coffeehouse(grid, 7).indices))
    elapsed = time.perf_counter() - t
    ok = ex.best_value <= res.mek <= coffee and elapsed < 900
    verdict(
        9,
        ok,
        f"fit rho={fit.rho_hat:.3f} sigma2={fit.sigma2_hat:.3f}; MEK exchange {ex.best_value:.4f}, "
        f"xi_P {res.mek:.4f}, coffeehouse {coffee:.4f}; {elapsed:.0f}s",
    )


def test_criterion_10_greedy(exp7_model, unit_grid, lh7, exp7_criteria):
    s1 = greedy_augment(exp7_model, unit_grid, lh7, "S1", 15, exp7_criteria).mek
    s2 = greedy_augment(exp7_model, unit_grid, lh7, "S2", 15, exp7_criteria).mek
    tail_ok = all(np.all(np.diff(s[10:]) <= 1e-9 * s[10]) for s in (s1, s2))
    gap = abs(s1[15] - s2[15]) / min(s1[15], s2[15])
    verdict(
        10,
        tail_ok and gap < 0.10,
        f"MEK at k=10..15 S1 {np.round(s1[10:], 4).tolist()} S2 {np.round(s2[10:], 4).tolist()}; gap at k=15 {gap:.1%}",
    )
