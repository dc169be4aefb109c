"""Quadrature oracles and theory checks for small models."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, ConfigError
from .grise import GriseConfig, entropic_descent_features, worker_count
from .model import (conditional_canonical, feature_matrix,
                    log_density_unnormalized)
from .quadrature import gauss_legendre
from .sampler import exact_sample_joint, make_rng

MAX_TENSOR_P = 3
KAPPA_EXAMPLES = ("LinearS1", "HarmonicS2", "PolyDeg2S3", "PolyProdS4")


def tensor_grid(model, nodes=96):
    """Points and normalized density weights of a tensor Gauss-Legendre rule."""
    if model.p > MAX_TENSOR_P:
        raise CapabilityError(f"tensor quadrature supports p <= {MAX_TENSOR_P}")
    rules = [gauss_legendre(model.domain.lower[i], model.domain.upper[i], nodes)
             for i in range(model.p)]
    pts = np.stack(np.meshgrid(*[r[0] for r in rules], indexing="ij"), -1).reshape(-1, model.p)
    w = np.ones(pts.shape[0])
    for i, r in enumerate(rules):
        shape = [1] * model.p
        shape[i] = -1
        w = (w.reshape([len(rr[1]) for rr in rules]) * r[1].reshape(shape)).ravel()
    e = log_density_unnormalized(model, pts)
    q = w * np.exp(e - e.max())
    return pts, q / q.sum()


def population_giso(model, i, v, quadrature_nodes=96):
    """E[exp(-v . phi^(i)(x))] under the model."""
    pts, q = tensor_grid(model, quadrature_nodes)
    F = feature_matrix(model.basis, model.domain, i, pts)
    return float(q @ np.exp(-(F @ np.asarray(v, float))))


def population_giso_gradient(model, i, v, quadrature_nodes=96):
    pts, q = tensor_grid(model, quadrature_nodes)
    F = feature_matrix(model.basis, model.domain, i, pts)
    e = np.exp(-(F @ np.asarray(v, float)))
    return -((q * e) @ F)


@dataclass
class CovarianceBundle:
    A: np.ndarray
    B: np.ndarray
    J: np.ndarray
    sandwich: np.ndarray | None
    J_inv: np.ndarray | None
    B_condition: float

    def to_dict(self):
        f = lambda a: None if a is None else np.asarray(a).tolist()
        return {"A": f(self.A), "B": f(self.B), "J": f(self.J), "sandwich": f(self.sandwich),
                "J_inv": f(self.J_inv), "B_condition": self.B_condition}


def covariance_bundle(model, i, quadrature_nodes=96):
    """A = Cov(phi e), B = Cov(phi, phi e), J = Cov(phi) at the true vertex, e = exp(-v*.phi)."""
    pts, q = tensor_grid(model, quadrature_nodes)
    F = feature_matrix(model.basis, model.domain, i, pts)
    e = np.exp(-(F @ model.vertex_parameter(i)))
    G = F * e[:, None]
    mF, mG = q @ F, q @ G
    A = (G * q[:, None]).T @ G - np.outer(mG, mG)
    B = (F * q[:, None]).T @ G - np.outer(mF, mG)
    J = (F * q[:, None]).T @ F - np.outer(mF, mF)
    A, J = 0.5 * (A + A.T), 0.5 * (J + J.T)
    cond = float(np.linalg.cond(B))
    sandwich = None
    if cond < 1e12:
        Bi = np.linalg.inv(B)
        sandwich = Bi @ A @ Bi.T
    J_inv = np.linalg.inv(J) if np.linalg.cond(J) < 1e12 else None
    return CovarianceBundle(A, B, J, sandwich, J_inv, cond)


# ---------------------------------------------------------------- entropy lower bound

def kappa_closed_form(example, b, d, theta_max):
    """Edge-entropy constant for the four worked two-variable families."""
    if b <= 0 or d < 1:
        raise ConfigError("need b > 0 and d >= 1")
    s = 1 + 2 * b
    if example == "LinearS1":
        return 4 * b ** 4 / 3 * np.exp(-6 * theta_max * (d + 1) * s * max(b, b ** 2))
    g = theta_max * (4 * d + 2)
    if example == "HarmonicS2":
        return (np.pi * np.exp(-2 * g * s) / 2) ** (2 * np.exp(2 * g * s))
    m4 = max(b, b ** 4)
    if example == "PolyDeg2S3":
        return 16 * b ** 4 * min(45 / 12, b ** 2) / 45 * np.exp(-6 * g * s * m4)
    if example == "PolyProdS4":
        base = b * s * np.exp(-2 * g * s * m4) / np.e
        power = s / b * np.exp(2 * g * s * m4) + 1
        return np.e * (15 * b + 4 * b ** 3) / (45 * s) * base ** power
    raise ConfigError(f"unknown example {example!r}; expected one of {KAPPA_EXAMPLES}")


def _transformed_entropy(x, w, fx, g, dg):
    """Differential entropy of g(X) for X with density fx on nodes x (weights w).

    Uses f_Y(y) = sum over preimages of f_X / |g'| with monotone pieces of g
    located from sign changes of g' on the grid.
    """
    sgn = np.sign(dg)
    cuts = np.nonzero(np.diff(sgn) != 0)[0] + 1
    pieces = np.split(np.arange(x.size), cuts)
    dens = np.zeros(x.size)
    y = g
    for piece in pieces:
        if piece.size < 2:
            # isolated node at a turning point: own contribution only
            dens[piece] += fx[piece] / np.maximum(np.abs(dg[piece]), 1e-300)
            continue
        gy, jac = g[piece], fx[piece] / np.maximum(np.abs(dg[piece]), 1e-300)
        order = np.argsort(gy)
        gy, jac = gy[order], jac[order]
        inside = (y >= gy[0]) & (y <= gy[-1])
        dens[inside] += np.interp(y[inside], gy, jac)
    keep = (fx > 0) & (dens > 0)
    return float(-np.sum(w[keep] * fx[keep] * np.log(dens[keep])))


def condition1_lhs_quadrature(model, i, j, theta_bar, theta_tilde, grid=2048, outer=128):
    """E over x_i of exp(2 h(Delta . psi^(i)(x_i, x_j) | x_i)) for a two-node model."""
    if model.p != 2:
        raise CapabilityError("condition-1 quadrature is implemented for p = 2 only")
    delta = np.asarray(theta_bar, float) - np.asarray(theta_tilde, float)
    k = model.k
    delta = delta.reshape(k, k)
    if not np.any(delta):
        return 0.0
    basis, dom = model.basis, model.domain
    ci = basis.mean_over(dom.lower[i], dom.upper[i])
    xo, wo = gauss_legendre(dom.lower[i], dom.upper[i], outer)
    xj, wj = gauss_legendre(dom.lower[j], dom.upper[j], grid)
    # marginal of x_i on the outer nodes
    pts = np.zeros((xo.size * xj.size, 2))
    pts[:, i] = np.repeat(xo, xj.size)
    pts[:, j] = np.tile(xj, xo.size)
    e = log_density_unnormalized(model, pts).reshape(xo.size, xj.size)
    e -= e.max()
    joint = np.exp(e)
    marg = wo * (joint @ wj)
    marg /= marg.sum()
    phj, dphj = basis.eval(xj), basis.deriv(xj)
    total = 0.0
    for a, xi in enumerate(xo):
        coef = (basis.eval(xi) - ci) @ delta  # a_s
        fx = joint[a] / (joint[a] @ wj)
        h = _transformed_entropy(xj, wj, fx, phj @ coef, dphj @ coef)
        total += marg[a] * np.exp(2 * h)
    return float(total)


# ---------------------------------------------------------------- constants

@dataclass
class SampleComplexityConstants:
    gamma: float
    varphi_max: float
    kappa: float
    q_s: float
    log10_c1: float
    log10_c2: float
    log10_c3: float

    @staticmethod
    def _value(log10):
        return 10.0 ** log10 if log10 < 300 else float("inf")

    @property
    def c1(self):
        return self._value(self.log10_c1)

    @property
    def c2(self):
        return self._value(self.log10_c2)

    @property
    def c3(self):
        return self._value(self.log10_c3)

    def to_dict(self):
        out = dict(self.__dict__)
        for name in ("c1", "c2", "c3"):
            v = getattr(self, name)
            out[name] = v if np.isfinite(v) else None
        return out


def complexity_constants(summary, alpha):
    """c1, c2, c3 as printed, kept as base-10 logs since they overflow doubles quickly.

    summary holds k, d, b_u, theta_max, phi_max, phi_bar_max, kappa, q_s.
    """
    if not 0 < alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    k, d = summary["k"], summary["d"]
    kappa, q_s = float(summary["kappa"]), float(summary["q_s"])
    if kappa <= 0 or q_s <= 0:
        raise ConfigError("kappa and q_s must be positive")
    b_u, tmax = summary["b_u"], summary["theta_max"]
    pm, pbar = summary["phi_max"], summary["phi_bar_max"]
    gamma = tmax * (k + k * k * d)
    vm = (1 + b_u) * max(pm, pm * pm)
    gv = gamma * vm
    log_c1 = (np.log(2 ** 4 * np.pi ** 2) + 2 + 2 * np.log(d + 1) + 2 * np.log(gamma * vm)
              + 2 * np.log1p(gv) + 4 * gv - 2 * np.log(kappa) - 4 * np.log(alpha))
    log_c2 = ((37 * d + 73) * np.log(2) + 2 * d * np.log(b_u) + (12 * d + 16) * np.log(k)
              + (6 * d + 9) * np.log(d) + (6 * d + 8) * np.log(tmax) + (8 * d + 12) * np.log(pm)
              + 2 * d * np.log(pbar) - (8 * d + 16) * np.log(alpha) - (4 * d + 8) * np.log(q_s))
    log_c3 = (2 * np.log(k) + 4 * np.log(d) + 8 * np.log(gamma * vm) + 8 * gv
              - 4 * np.log(kappa) - 8 * np.log(alpha))
    ln10 = np.log(10)
    return SampleComplexityConstants(gamma, vm, kappa, q_s, float(log_c1 / ln10),
                                     float(log_c2 / ln10), float(log_c3 / ln10))


def model_summary(model, kappa, q_s):
    return {"k": model.k, "d": model.d, "b_u": model.domain.b_u, "theta_max": model.theta_max,
            "phi_max": model.phi_max, "phi_bar_max": model.phi_bar_max, "kappa": kappa, "q_s": q_s}


# ---------------------------------------------------------------- asymptotics

def normality_study(model, n, replications, seed, node=0, config=None, threads=None):
    """Scaled errors sqrt(n) (v_hat - v*) of the l1-ball GISO minimizer over independent
    exact-sample replications, with their covariance and the sandwich for comparison."""
    if model.p != 2:
        raise CapabilityError("normality study needs an exactly sampled two-node model")
    cfg = config or GriseConfig(gamma=model.gamma, epsilon=1e-9, eta0="auto", max_iters=20000)
    truth = model.vertex_parameter(node)

    def one(r):
        X = exact_sample_joint(model, n, make_rng(seed, 2, r))
        F = feature_matrix(model.basis, model.domain, node, X)
        return np.sqrt(n) * (entropic_descent_features(F, cfg).vertex - truth)

    threads = worker_count() if threads is None else threads
    if threads <= 1:
        errs = [one(r) for r in range(replications)]
    else:
        with ThreadPoolExecutor(threads) as pool:
            errs = list(pool.map(one, range(replications)))
    errs = np.array(errs)
    bundle = covariance_bundle(model, node)
    return {
        "scaled_errors": errs,
        "mean": errs.mean(0),
        "mean_se": errs.std(0, ddof=1) / np.sqrt(replications),
        "covariance": np.cov(errs, rowvar=False),
        "sandwich": bundle.sandwich,
    }


def lipschitz_check(model, i, grid=41, nodes=256):
    """Max ratio |mu(x) - mu(x')| / |x - x'| of the conditional mean of phi(x_i) in x_j (p = 2)."""
    if model.p != 2:
        raise CapabilityError("Lipschitz check is for p = 2")
    from .model import family_moments
    j = 1 - i
    xs = np.linspace(model.domain.lower[j], model.domain.upper[j], grid)
    mus = []
    for x in xs:
        pt = np.zeros(2)
        pt[j] = x
        lam = conditional_canonical(model, i, pt)
        mus.append(family_moments(model.basis, lam, model.domain.lower[i],
                                  model.domain.upper[i], nodes)[0])
    mus = np.array(mus)
    dx = np.abs(xs[:, None] - xs[None, :])
    np.fill_diagonal(dx, np.inf)
    ratio = np.abs(mus[:, None, :] - mus[None, :, :]).max(-1) / dx
    return float(ratio.max())


