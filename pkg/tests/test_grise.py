import numpy as np
import pytest

from mrfscreen.errors import ConfigError
from mrfscreen.fixtures import chain_model, reference_pair_model
from mrfscreen.grise import (GriseConfig, entropic_descent, entropic_descent_features,
                             fit_all_nodes, giso_from_features, giso_gradient, giso_value,
                             project_to_feasible, theory_eta0, theory_iterations)
from mrfscreen.model import POLYNOMIAL, BasisFamily, Domain, feature_matrix
from mrfscreen.sampler import SamplerConfig, exact_sample_joint, gibbs_sample, make_rng

import oracles

POLY1 = BasisFamily(POLYNOMIAL, 1)
D2 = Domain.symmetric(2)


def fd_gradient(f, v, h=1e-5):
    g = np.empty_like(v)
    for l in range(v.size):
        e = np.zeros_like(v)
        e[l] = h
        g[l] = (f(v + e) - f(v - e)) / (2 * h)
    return g


def test_config_validation():
    with pytest.raises(ConfigError):
        GriseConfig(gamma=0)
    with pytest.raises(ConfigError):
        GriseConfig(gamma=1, epsilon=0)
    with pytest.raises(ConfigError):
        GriseConfig(gamma=1, eta0="fast")
    with pytest.raises(ConfigError):
        GriseConfig(gamma=1, max_iters=0)


def test_giso_examples():
    X = make_rng(0).uniform(-1, 1, (30, 2))
    assert giso_value(X, 0, np.zeros(2), POLY1, D2) == 1.0
    v = np.array([0.3, -0.7])
    f = feature_matrix(POLY1, D2, 1, X[:1])[0]
    assert giso_value(X[:1], 1, v, POLY1, D2) == pytest.approx(np.exp(-f @ v), rel=1e-15)


def test_giso_bounds():
    rng = make_rng(1)
    m = chain_model(p=4)
    X = rng.uniform(-1, 1, (200, 4))
    for _ in range(20):
        v = rng.normal(size=4)
        v *= m.gamma / np.abs(v).sum()
        val = giso_value(X, 1, v, m.basis, m.domain)
        bound = m.gamma * m.phi_max_c
        assert np.exp(-bound) <= val <= np.exp(bound)


def test_gradient_finite_differences():
    rng = make_rng(2)
    dom = Domain.symmetric(3)
    basis = BasisFamily(POLYNOMIAL, 2)
    for _ in range(10):
        X = rng.uniform(-1, 1, (40, 3))
        v = rng.normal(scale=0.3, size=2 + 4 * 2)
        g = giso_gradient(X, 0, v, basis, dom)
        fd = fd_gradient(lambda w: giso_value(X, 0, w, basis, dom), v)
        assert np.linalg.norm(g - fd) / np.linalg.norm(g) < 1e-6


def test_gradient_at_zero_is_negative_feature_mean():
    X = make_rng(3).uniform(-1, 1, (25, 2))
    F = feature_matrix(POLY1, D2, 0, X)
    assert np.allclose(giso_gradient(X, 0, np.zeros(2), POLY1, D2), -F.mean(0), atol=1e-15)


def test_gradient_at_truth_vanishes_in_probability():
    m = reference_pair_model()
    X = exact_sample_joint(m, 200000, make_rng(4))
    F = feature_matrix(m.basis, m.domain, 0, X)
    v = m.vertex_parameter(0)
    terms = F * np.exp(-(F @ v))[:, None]
    g = giso_gradient(X, 0, v, m.basis, m.domain)
    assert np.all(np.abs(g) < 3 * terms.std(0) / np.sqrt(X.shape[0]))


def test_entropic_descent_beats_grid_oracle():
    rng = make_rng(5)
    for _ in range(3):
        X = rng.uniform(-1, 1, (50, 2))
        F = feature_matrix(POLY1, D2, 0, X)
        cfg = GriseConfig(gamma=2.0, epsilon=1e-4, eta0="auto")
        sol = entropic_descent_features(F, cfg)
        assert sol.objective <= oracles.grid_min_giso_pair(F, 2.0) + 1e-3
        assert np.abs(sol.vertex).sum() <= 2.0 + 1e-12


def test_zero_features_return_zero():
    sol = entropic_descent_features(np.zeros((10, 3)), GriseConfig(gamma=1.0, max_iters=50))
    assert np.all(sol.vertex == 0) and sol.objective == 1.0


def test_initialization_and_simplex_invariant():
    X = make_rng(6).uniform(-1, 1, (60, 3))
    F = feature_matrix(POLY1, Domain.symmetric(3), 1, X)
    D = 2 * F.shape[1] + 1
    seen = []

    def check(t, wp, wm, y):
        if t == 1:
            assert np.allclose(wp, np.e / D) and np.allclose(wm, np.e / D)
            assert y == pytest.approx(np.e / D)
        else:
            assert wp.min() >= 0 and wm.min() >= 0 and y >= 0
            assert abs(wp.sum() + wm.sum() + y - 1) < 1e-12
        seen.append(t)

    entropic_descent_features(F, GriseConfig(gamma=1.5, max_iters=300, eta0="auto"), callback=check)
    assert len(seen) > 10


def test_returns_best_visited_iterate():
    X = make_rng(7).uniform(-1, 1, (40, 2))
    F = feature_matrix(POLY1, D2, 0, X)
    objs = []
    cfg = GriseConfig(gamma=2.0, max_iters=200, eta0=5.0)
    sol = entropic_descent_features(
        F, cfg, callback=lambda t, wp, wm, y: objs.append(giso_from_features(F, 2.0 * (wp - wm))))
    assert sol.objective == pytest.approx(min(objs), abs=1e-15)
    assert sol.objective == pytest.approx(giso_from_features(F, sol.vertex), abs=1e-12)
    assert objs[sol.best_iterate_index - 1] == pytest.approx(sol.objective, abs=1e-15)


def test_theory_step_and_iterations():
    assert theory_eta0(1.0, 1.0, 1) == pytest.approx(np.sqrt(np.log(3)) / (2 * np.e))
    assert theory_iterations(1.0, 1.0, 0.1, 1) == pytest.approx(np.exp(2) * 100 * np.log(3))


def test_entropic_descent_wrapper_matches_features():
    m = chain_model(p=3)
    X = make_rng(8).uniform(-1, 1, (100, 3))
    cfg = GriseConfig(gamma=m.gamma, eta0="auto")
    a = entropic_descent(X, 1, cfg, m.basis, m.domain)
    b = entropic_descent_features(feature_matrix(m.basis, m.domain, 1, X), cfg)
    assert np.array_equal(a.vertex, b.vertex)


def test_projection_examples():
    tmin, tmax = 0.5, 2.0
    v = np.array([0.0, 0.5, -1.2, 2.0])
    assert np.array_equal(project_to_feasible(v, tmin, tmax), v)
    assert project_to_feasible(np.array([2.1]), tmin, tmax)[0] == 2.0
    assert project_to_feasible(np.array([0.4 * tmin]), tmin, tmax)[0] == 0.0
    assert project_to_feasible(np.array([-0.8 * tmin]), tmin, tmax)[0] == -tmin
    assert project_to_feasible(np.array([tmin / 2]), tmin, tmax)[0] == 0.0


def test_fit_all_nodes_single_node():
    dom = Domain.symmetric(1)
    X = make_rng(9).uniform(-1, 1, (100, 1))
    sols = fit_all_nodes(X, GriseConfig(gamma=1.0, eta0="auto"), POLY1, dom)
    assert len(sols) == 1 and sols[0].vertex.size == 1


def test_fit_all_nodes_row_permutation_and_threads():
    m = chain_model(p=5)
    X = gibbs_sample(m, 3000, SamplerConfig(seed=1))
    cfg = GriseConfig(gamma=m.gamma, epsilon=1e-4, eta0="auto")
    a = fit_all_nodes(X, cfg, m.basis, m.domain, threads=1)
    b = fit_all_nodes(X, cfg, m.basis, m.domain, threads=3)
    for s, t in zip(a, b):
        assert np.array_equal(s.vertex, t.vertex)
    perm = make_rng(2).permutation(X.shape[0])
    c = fit_all_nodes(X[perm], cfg, m.basis, m.domain)
    for s, t in zip(a, c):
        assert np.allclose(s.vertex, t.vertex, atol=1e-9)


def test_fit_all_nodes_projection():
    m = chain_model(p=4)
    X = gibbs_sample(m, 20000, SamplerConfig(seed=2))
    cfg = GriseConfig(gamma=m.gamma, epsilon=1e-4, eta0="auto")
    sols = fit_all_nodes(X, cfg, m.basis, m.domain, bounds=(m.theta_min, m.theta_max))
    for i, s in enumerate(sols):
        nz = np.abs(s.vertex[s.vertex != 0])
        assert np.all(nz >= m.theta_min) and np.all(nz <= m.theta_max)
        assert s.unconstrained is not None
        F = feature_matrix(m.basis, m.domain, i, X)
        assert s.objective == pytest.approx(giso_from_features(F, s.vertex), abs=1e-12)
