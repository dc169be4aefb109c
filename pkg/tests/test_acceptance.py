"""Acceptance criteria, each run at its stated tolerance.

Every test records a single "CRITERION n: PASS/FAIL ..." line (shown in the
terminal summary) and then asserts the criterion.
"""
import json
import math
import time

import numpy as np

from mrfscreen.cli import main
from mrfscreen.diagnostics import (condition1_lhs_quadrature, kappa_closed_form,
                                   normality_study, population_giso, population_giso_gradient)
from mrfscreen.fixtures import (chain_model, linear_s1_model, pair_linear_model,
                                random_sparse_model, reference_pair_model)
from mrfscreen.grise import (GriseConfig, entropic_descent_features, fit_all_nodes,
                             giso_gradient, giso_value, project_to_feasible, screening_gap)
from mrfscreen.model import (HARMONIC, POLYNOMIAL, BasisFamily, Domain, family_moments,
                             feature_matrix, write_model)
from mrfscreen.node_recovery import (BackwardMapConfig, LassoProblem, backward_map,
                                     design_matrix, BinningScheme, lasso_mspe_bound,
                                     mrw_budget, mrw_mean_estimate, robust_lasso)
from mrfscreen.pipeline import evaluate, fit
from mrfscreen.report import Hyper
from mrfscreen.sampler import SamplerConfig, exact_sample_joint, gibbs_sample, make_rng
from mrfscreen.structure import recover_edges

import oracles


def rel_err(got, want):
    return abs(got - want) / abs(want)


def test_criterion_01_reference_oracle(tmp_path, criterion):
    mp, out = tmp_path / "ref.json", tmp_path / "diag.json"
    write_model(reference_pair_model(), mp)
    t0 = time.perf_counter()
    code = main(["diagnose", str(mp), "--out", str(out)])
    sec = time.perf_counter() - t0
    b = json.loads(out.read_text())["bundle"]
    sand, jinv = np.diag(b["sandwich"]), np.diag(b["J_inv"])
    errs = [rel_err(sand[0], 3.50), rel_err(sand[1], 11.30),
            rel_err(jinv[0], 3.007), rel_err(jinv[1], 8.90)]
    ok = code == 0 and max(errs) < 0.01 and sec < 5
    criterion(1, ok, f"sandwich=({sand[0]:.4f}, {sand[1]:.4f}) J_inv=({jinv[0]:.4f}, "
                     f"{jinv[1]:.4f}) rel_errs={[round(float(e), 4) for e in errs]} time={sec:.2f}s")
    assert ok


def test_criterion_02_population_stationarity(criterion):
    t0 = time.perf_counter()
    m = reference_pair_model()
    truth = m.vertex_parameter(0)
    g = population_giso_gradient(m, 0, truth)
    best = population_giso(m, 0, truth)
    rng = make_rng(2002)
    beaten, worst_margin = 0, np.inf
    while beaten < 100:
        d = rng.normal(size=truth.size)
        d *= rng.uniform(0.05, 1.0) / np.abs(d).max()
        v = project_to_feasible(truth + d, m.theta_min, m.theta_max)
        if np.abs(v - truth).max() < 0.05:
            continue
        margin = population_giso(m, 0, v) - best
        worst_margin = min(worst_margin, margin)
        beaten += 1
    sec = time.perf_counter() - t0
    ok = np.abs(g).max() < 1e-8 and worst_margin > 0 and sec < 30
    criterion(2, ok, f"grad_inf={np.abs(g).max():.2e} min_margin={worst_margin:.3e} "
                     f"time={sec:.1f}s")
    assert ok


def test_criterion_03_gradient_finite_differences(criterion):
    rng = make_rng(2003)
    worst = 0.0
    h = 1e-5
    for _ in range(50):
        kind = POLYNOMIAL if rng.random() < 0.5 else HARMONIC
        k = int(rng.integers(1, 3)) * (2 if kind == HARMONIC else 1)
        p = int(rng.integers(2, 5))
        basis, dom = BasisFamily(kind, k), Domain.symmetric(p)
        X = rng.uniform(-1, 1, (int(rng.integers(10, 80)), p))
        i = int(rng.integers(p))
        v = rng.normal(scale=0.3, size=k + k * k * (p - 1))
        g = giso_gradient(X, i, v, basis, dom)
        fd = np.empty_like(v)
        for l in range(v.size):
            e = np.zeros_like(v)
            e[l] = h
            fd[l] = (giso_value(X, i, v + e, basis, dom) - giso_value(X, i, v - e, basis, dom)) / (2 * h)
        worst = max(worst, np.linalg.norm(g - fd) / np.linalg.norm(g))
    ok = worst < 1e-6
    criterion(3, ok, f"max_relative_error={worst:.2e} over 50 instances")
    assert ok


def test_criterion_04_entropic_descent_optimality(criterion):
    rng = make_rng(2004)
    eps, worst = 1e-3, -np.inf
    cfg = GriseConfig(gamma=2.0, epsilon=eps, eta0="auto")
    for _ in range(20):
        c, nd = rng.uniform(-1, 1), tuple(rng.uniform(-0.5, 0.5, 2))
        m = pair_linear_model(coupling=c, node=nd, theta_max=1.0,
                              theta_min=min(abs(c), *map(abs, nd)))
        X = exact_sample_joint(m, 50, rng)
        F = feature_matrix(m.basis, m.domain, 0, X)
        sol = entropic_descent_features(F, cfg)
        worst = max(worst, sol.objective - oracles.grid_min_giso_pair(F, 2.0, 0.01))
    ok = worst <= eps
    criterion(4, ok, f"max(objective - grid_min)={worst:.2e} (eps={eps})")
    assert ok


def test_criterion_05_screening_inequality(criterion):
    z = make_rng(2005).uniform(-50, 50, 10 ** 6)
    holds = bool(np.all(screening_gap(z) >= z * z / (2 + np.abs(z))))
    at_zero = float(screening_gap(0.0))
    ok = holds and at_zero == 0.0
    criterion(5, ok, f"holds_on_1e6={holds} gap_at_0={at_zero}")
    assert ok


def test_criterion_06_structure_recovery(criterion):
    t0 = time.perf_counter()
    m = chain_model(p=12)
    cfg = GriseConfig(gamma=m.gamma, epsilon=1e-4, eta0="auto")
    exact = 0
    for trial in range(20):
        X = gibbs_sample(m, 50000, SamplerConfig(seed=6000 + trial))
        sols = fit_all_nodes(X, cfg, m.basis, m.domain, bounds=(m.theta_min, m.theta_max))
        exact += recover_edges(sols, m.theta_min) == m.edge_set()
    sec = time.perf_counter() - t0
    ok = exact >= 18 and sec < 600
    criterion(6, ok, f"exact_recovery={exact}/20 time={sec:.0f}s")
    assert ok


def test_criterion_07_consistency(criterion):
    m = reference_pair_model()
    cfg = GriseConfig(gamma=m.gamma, epsilon=1e-6, eta0="auto")
    truth = [m.vertex_parameter(i) for i in range(m.p)]
    medians = []
    for a, n in enumerate((10 ** 3, 10 ** 4, 10 ** 5)):
        errs = []
        for trial in range(5):
            X = exact_sample_joint(m, n, make_rng(2007, a, trial))
            sols = fit_all_nodes(X, cfg, m.basis, m.domain, bounds=(m.theta_min, m.theta_max))
            errs.append(max(np.abs(s.vertex - t).max() for s, t in zip(sols, truth)))
        medians.append(float(np.median(errs)))
    ok = medians[0] > medians[1] > medians[2] and medians[2] < 0.1
    criterion(7, ok, "median_linf at n=1e3,1e4,1e5: " + ", ".join(f"{e:.4f}" for e in medians))
    assert ok


def test_criterion_08_normality(criterion):
    res = normality_study(reference_pair_model(), 2000, 500, seed=2008)
    diag = np.diag(res["covariance"])
    rel = np.abs(diag - [3.50, 11.30]) / [3.50, 11.30]
    zs = np.abs(res["mean"]) / res["mean_se"]
    ok = bool(np.all(rel < 0.15) and np.all(zs < 3))
    criterion(8, ok, f"cov_diag=({diag[0]:.3f}, {diag[1]:.3f}) rel_errs={np.round(rel, 3).tolist()} "
                     f"mean_z={np.round(zs, 2).tolist()}")
    assert ok


def test_criterion_09_mrw_mean(criterion):
    tau1, tau2 = mrw_budget(1, 2.0, 2.0, 1.0, 1.0, 0.01, 0.1)
    est = mrw_mean_estimate(BasisFamily(POLYNOMIAL, 1), [1.0], -1, 1, tau1, tau2, make_rng(2009))
    want = 1 / math.tanh(1) - 1
    ok = abs(est[0] - want) < 0.01
    criterion(9, ok, f"estimate={est[0]:.5f} target={want:.5f} tau1={tau1} tau2={tau2}")
    assert ok


def test_criterion_10_backward_map(criterion):
    rng = make_rng(2010)
    families = [BasisFamily(POLYNOMIAL, 1), BasisFamily(POLYNOMIAL, 2), BasisFamily(HARMONIC, 2)]
    cfg = BackwardMapConfig(rho_max=2.0, quadrature_mode=True)
    worst = 0.0
    for a in range(20):
        basis = families[a % 3]
        rho = rng.uniform(-1, 1, basis.k)
        ups = family_moments(basis, rho, -1, 1)[0]
        worst = max(worst, np.linalg.norm(backward_map(basis, ups, -1, 1, cfg) - rho))
    ok = worst < 0.05
    criterion(10, ok, f"max_l2_error={worst:.2e} over 20 targets")
    assert ok


def test_criterion_11_robust_lasso(criterion):
    """One-hot bin design (|v| <= 1), a smooth bin-constant signal, bounded noise
    |w| <= 0.05 correlated with the regressor and independent Gaussian noise."""
    omega0, sigma, c1 = 0.05, 0.3, 1.0
    dom = Domain.symmetric(2)
    scheme = BinningScheme.for_neighbors(0.25, dom, [0, 1])
    rng = make_rng(2011)
    beta_star = rng.uniform(-1, 1, scheme.size)
    c2 = float(np.abs(beta_star).sum())
    ok, parts = True, []
    for n in (10 ** 3, 10 ** 4, 10 ** 5):
        X = rng.uniform(-1, 1, (n, 2))
        V = design_matrix(X, scheme)
        signal = V @ beta_star
        y = signal + omega0 * np.cos(7 * X[:, 0] * X[:, 1]) + rng.normal(scale=sigma, size=n)
        beta = robust_lasso(LassoProblem(V, y, c2))
        mspe = float(np.mean((signal - V @ beta) ** 2))
        bound = float(lasso_mspe_bound(omega0, c1, c2, sigma, scheme.size, n))
        ok &= mspe <= bound
        parts.append(f"n={n}: mspe={mspe:.2e} bound={bound:.2e}")
    criterion(11, ok, "; ".join(parts))
    assert ok


def test_criterion_12_node_recovery(criterion):
    t0 = time.perf_counter()
    m = random_sparse_model(8, 2, make_rng(7))
    hyper = Hyper.from_model(m, node_recovery={"average_over_z": 10})
    errs = []
    for trial in range(5):
        seed = 12000 + trial
        X = gibbs_sample(m, 10 ** 5, SamplerConfig(seed=seed))
        errs.append(evaluate(fit(X, hyper, seed=seed), m)["linf"])
    sec = time.perf_counter() - t0
    good = sum(e < 0.15 for e in errs)
    ok = good >= 4 and sec < 900
    criterion(12, ok, f"linf={[round(float(e), 4) for e in errs]} below_0.15={good}/5 time={sec:.0f}s")
    assert ok


def test_criterion_13_condition_one(criterion):
    m = linear_s1_model()
    kappa = kappa_closed_form("LinearS1", 1, 1, 0.1)
    rng = make_rng(2013)
    worst = np.inf
    for _ in range(50):
        tb, tt = rng.uniform(-0.1, 0.1, 2)
        lhs = condition1_lhs_quadrature(m, 0, 1, [[tb]], [[tt]])
        worst = min(worst, lhs / (kappa * (tb - tt) ** 2))
    ok = worst >= 1.0
    criterion(13, ok, f"min lhs/(kappa |delta|^2)={worst:.4f} kappa={kappa:.5f}")
    assert ok
