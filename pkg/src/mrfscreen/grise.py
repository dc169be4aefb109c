"""Interaction screening objective and its per-node minimization."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, ShapeError
from .model import feature_matrix, vertex_dim


AUTO_STEP = 4.0


@dataclass(frozen=True)
class GriseConfig:
    """epsilon: target gap; gamma: l1 radius; max_iters: T.

    eta0: None uses the worst-case theory step; "auto" swaps the worst-case
    gradient bound for the observed feature scale; a float is used as given.
    """

    gamma: float
    epsilon: float = 1e-3
    max_iters: int = 20000
    eta0: float | str | None = None
    patience: int = 200

    def __post_init__(self):
        if not (self.epsilon > 0 and self.gamma > 0 and self.max_iters >= 1):
            raise ConfigError("need epsilon > 0, gamma > 0, max_iters >= 1")
        if isinstance(self.eta0, str):
            if self.eta0 != "auto":
                raise ConfigError("eta0 must be a positive number, 'auto' or None")
        elif self.eta0 is not None and not self.eta0 > 0:
            raise ConfigError("eta0 must be positive")


@dataclass
class GriseSolution:
    vertex: np.ndarray
    objective: float
    iterations_used: int
    best_iterate_index: int
    unconstrained: np.ndarray | None = None


def theory_iterations(gamma, phi_max, epsilon, dim):
    """Iteration count guaranteeing an epsilon-optimal point (often astronomically large)."""
    D = 2 * dim + 1
    return gamma ** 2 * phi_max ** 2 * np.exp(2 * gamma * phi_max) / epsilon ** 2 * np.log(D)


def theory_eta0(gamma, phi_max, dim):
    D = 2 * dim + 1
    return np.sqrt(np.log(D)) / (2 * gamma * phi_max * np.exp(gamma * phi_max))


def giso_from_features(F, v):
    return float(np.mean(np.exp(-(F @ v))))


def giso_grad_from_features(F, v):
    e = np.exp(-(F @ v))
    return -(e @ F) / F.shape[0]


def giso_value(samples, i, v, basis, domain):
    """S_n(v) = mean_t exp(-v . phi^(i)(x_t))."""
    return giso_from_features(feature_matrix(basis, domain, i, samples), np.asarray(v, float))


def giso_gradient(samples, i, v, basis, domain):
    return giso_grad_from_features(feature_matrix(basis, domain, i, samples), np.asarray(v, float))


def entropic_descent_features(F, config, phi_bound=None, callback=None):
    """Entropic descent over the lifted simplex (w+, w-, y) for min S(v), ||v||_1 <= gamma.

    F holds one feature row per sample. Returns the best visited iterate.
    callback(t, w_plus, w_minus, y), if given, sees the weights of every iterate.
    """
    n, L = F.shape
    gamma = config.gamma
    D = 2 * L + 1
    if config.eta0 == "auto":
        scale = float(np.abs(F).max()) if F.size else 1.0
        eta = AUTO_STEP * np.sqrt(np.log(D)) / (gamma * max(scale, 1e-12))
    elif config.eta0 is not None:
        eta = float(config.eta0)
    else:
        if phi_bound is None:
            phi_bound = float(np.abs(F).max()) if F.size else 1.0
        eta = theory_eta0(gamma, max(phi_bound, 1e-300), L)
    # log-weights; initial mass e/D each (the first normalization removes the scale)
    lw_p = np.full(L, 1.0 - np.log(D))
    lw_m = lw_p.copy()
    ly = 1.0 - np.log(D)
    best_obj = np.inf
    best_v = np.zeros(L)
    best_t = 1
    last_gain_t = 1
    ref_obj = np.inf
    t = 1
    for t in range(1, config.max_iters + 1):
        v = gamma * (np.exp(lw_p) - np.exp(lw_m))
        if callback is not None:
            callback(t, np.exp(lw_p), np.exp(lw_m), float(np.exp(ly)))
        e = np.exp(-(F @ v))
        obj = e.mean()
        if obj < best_obj:
            best_obj, best_v, best_t = obj, v, t
        if best_obj < ref_obj - config.epsilon / 10:
            ref_obj = best_obj
            last_gain_t = t
        elif t - last_gain_t >= config.patience:
            break
        g = gamma * (-(e @ F) / n)
        xp = lw_p - eta * g
        xm = lw_m + eta * g
        lz = logsumexp(np.concatenate([xp, xm, [ly]]))
        lw_p, lw_m, ly = xp - lz, xm - lz, ly - lz
        eta *= np.sqrt(t / (t + 1))
    return GriseSolution(best_v.copy(), float(giso_from_features(F, best_v)), t, best_t)


def entropic_descent(samples, i, config, basis, domain):
    F = feature_matrix(basis, domain, i, samples)
    pm = basis.phi_max(domain)
    bound = (1.0 + domain.b_u) * max(pm, pm * pm)
    return entropic_descent_features(F, config, bound)


def project_to_feasible(v, theta_min, theta_max):
    """Coordinatewise map into Lambda: clamp to theta_max, |v| < theta_min/2 -> 0,
    theta_min/2 <= |v| < theta_min -> sign(v) theta_min."""
    v = np.asarray(v, dtype=float)
    a = np.abs(v)
    out = np.sign(v) * np.minimum(a, theta_max)
    out = np.where(a < theta_min, np.sign(v) * theta_min, out)
    # ties at exactly theta_min/2 break toward zero
    out = np.where(a <= theta_min / 2, 0.0, out)
    return out


def worker_count():
    try:
        return max(1, int(os.environ.get("MRFSCREEN_THREADS", "1")))
    except ValueError:
        raise ConfigError("MRFSCREEN_THREADS must be an integer") from None


def fit_all_nodes(samples, config, basis, domain, bounds=None, threads=None):
    """One GRISE solve per node; bounds=(theta_min, theta_max) adds the Lambda projection."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    if X.shape[1] != domain.p:
        raise ShapeError("sample columns do not match the domain")
    if X.shape[0] == 0:
        raise ShapeError("no samples")
    pm = basis.phi_max(domain)
    bound = (1.0 + domain.b_u) * max(pm, pm * pm)

    def solve(i):
        F = feature_matrix(basis, domain, i, X)
        sol = entropic_descent_features(F, config, bound)
        if bounds is not None:
            sol.unconstrained = sol.vertex
            sol.vertex = project_to_feasible(sol.vertex, *bounds)
            sol.objective = giso_from_features(F, sol.vertex)
        return sol

    threads = worker_count() if threads is None else threads
    if threads <= 1:
        return [solve(i) for i in range(domain.p)]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(solve, range(domain.p)))


def screening_gap(z):
    """e^{-z} - 1 + z, accurate near zero."""
    z = np.asarray(z, dtype=float)
    out = np.expm1(-z) + z
    small = np.abs(z) < 0.1
    if np.any(small):
        zs = z[small]
        term = zs * zs / 2
        acc = term.copy()
        for m in range(3, 20):
            term = term * (-zs) / m
            acc += term
        out = out.copy() if out.ndim else np.array(out)
        out[small] = acc
    return out


def default_gamma(theta_max, k, d):
    return theta_max * (k + k * k * d)

