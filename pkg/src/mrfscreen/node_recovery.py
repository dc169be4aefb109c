"""Node-parameter recovery: binned robust Lasso, MRW means, backward mapping."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, NumericError, ShapeError
from .model import Domain, family_moments, split_vertex
from .sampler import initial_point, make_rng

MAX_FEATURES = 10 ** 6


# ---------------------------------------------------------------- binning

@dataclass(frozen=True, eq=False)
class BinningScheme:
    """Bins of width t over each neighbor's interval, offset from its lower bound."""

    t: float
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if not self.t > 0:
            raise ConfigError("bin width t must be positive")
        lo = np.atleast_1d(np.asarray(self.lower, float))
        hi = np.atleast_1d(np.asarray(self.upper, float))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if self.size > MAX_FEATURES:
            raise ConfigError(f"{self.size} binned features exceed the cap of {MAX_FEATURES}; "
                              "use a larger bin width t")

    @classmethod
    def for_neighbors(cls, t, domain, neighbors):
        nb = list(neighbors)
        return cls(t, domain.lower[nb], domain.upper[nb])

    @property
    def counts(self):
        # tolerance guards widths that are an exact multiple of t up to rounding
        return np.maximum(np.ceil((self.upper - self.lower) / self.t - 1e-9), 1).astype(np.int64)

    @property
    def size(self):
        return int(np.prod(self.counts.astype(float))) if self.lower.size else 1

    def index(self, Xnb):
        """Flat one-hot index per row of neighbor values (row-major over neighbors)."""
        Xnb = np.asarray(Xnb, dtype=float)
        m = self.lower.size
        if m == 0:
            return np.zeros(Xnb.shape[0] if Xnb.ndim == 2 else 1, dtype=np.int64)
        Xnb = Xnb.reshape(-1, m)
        # M(x) = zeta*t for x - l in ((zeta-1)t, zeta*t]; x = l goes to the first bin
        zeta = np.ceil((Xnb - self.lower) / self.t - 1e-9).astype(np.int64)
        zeta = np.clip(zeta, 1, self.counts) - 1
        flat = np.zeros(Xnb.shape[0], dtype=np.int64)
        for c in range(m):
            flat = flat * self.counts[c] + zeta[:, c]
        return flat


def bin_features(x_neighbors, scheme):
    """Dense 0/1 vector with a single 1 at the tensor-product bin of x_neighbors."""
    out = np.zeros(scheme.size)
    out[scheme.index(np.atleast_1d(x_neighbors))[0]] = 1.0
    return out


def design_matrix(Xnb, scheme):
    idx = scheme.index(Xnb)
    n = idx.size
    return sp.csr_matrix((np.ones(n), (np.arange(n), idx)), shape=(n, scheme.size))


# ---------------------------------------------------------------- robust Lasso

@dataclass(frozen=True, eq=False)
class LassoProblem:
    design: object
    response: np.ndarray
    l1_radius: float

    def __post_init__(self):
        if not self.l1_radius > 0:
            raise ConfigError("l1 radius must be positive")


def robust_lasso(problem, max_iters=200000, tol=None, return_info=False):
    """min ||y - V b||^2 over ||b||_1 <= c by pairwise Frank-Wolfe.

    The l1 ball is conv{+c e_j, -c e_j}; each step moves weight from the worst
    active atom to the linear-minimization atom with exact line search. Stops
    once the Frank-Wolfe duality gap is <= tol (default 1e-8 ||y||^2).
    """
    y = np.asarray(problem.response, dtype=float)
    if not np.all(np.isfinite(y)):
        raise NumericError("non-finite response")
    V = sp.csc_matrix(problem.design)
    if V.shape[0] != y.size:
        raise ShapeError("design rows must match the response length")
    c = float(problem.l1_radius)
    yy = float(y @ y)
    tol = 1e-8 * yy if tol is None else tol
    G = (V.T @ V).tocsc()
    bvec = np.asarray(V.T @ y).ravel()
    return _pairwise_fw(G, bvec, yy, c, max_iters, tol, return_info)


def _column(G, j):
    s, e = G.indptr[j], G.indptr[j + 1]
    return G.indices[s:e], G.data[s:e]


def _pairwise_fw(G, bvec, yy, c, max_iters, tol, return_info):
    q = bvec.size
    diag = G.diagonal()
    beta = np.zeros(q)
    Gb = np.zeros(q)
    # atom a < q is +c e_a, atom a >= q is -c e_(a-q); zero = half of each
    alpha = np.zeros(2 * q)
    alpha[0] = alpha[q] = 0.5
    gap = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        g = 2.0 * (Gb - bvec)
        j = int(np.argmax(np.abs(g)))
        gap = float(g @ beta + c * abs(g[j]))
        if gap <= tol:
            break
        s_atom = j + q if g[j] > 0 else j
        # away atom: active atom with the largest <g, atom>
        score = np.concatenate([c * g, -c * g])
        score[alpha <= 0] = -np.inf
        a_atom = int(np.argmax(score))
        js, ss = s_atom % q, (1.0 if s_atom < q else -1.0) * c
        ja, sa = a_atom % q, (1.0 if a_atom < q else -1.0) * c
        # d = ss e_js - sa e_ja
        slope = ss * g[js] - sa * g[ja]
        if js == ja:
            curv = (ss - sa) ** 2 * diag[js]
        else:
            ri, rv = _column(G, js)
            gja = rv[np.searchsorted(ri, ja)] if np.any(ri == ja) else 0.0
            curv = ss * ss * diag[js] - 2 * ss * sa * gja + sa * sa * diag[ja]
        gmax = alpha[a_atom]
        step = gmax if curv <= 0 else min(gmax, -slope / (2.0 * curv))
        if step <= 0:
            break
        alpha[s_atom] += step
        alpha[a_atom] -= step
        if alpha[a_atom] < 1e-15:
            alpha[a_atom] = 0.0
        beta[js] += step * ss
        beta[ja] -= step * sa
        ri, rv = _column(G, js)
        Gb[ri] += step * ss * rv
        ri, rv = _column(G, ja)
        Gb[ri] -= step * sa * rv
    # representation rounding can leave the norm a hair above c
    nrm = np.abs(beta).sum()
    if nrm > c:
        beta *= c / nrm
    if return_info:
        obj = float(beta @ (G @ beta) - 2 * bvec @ beta + yy)
        return beta, {"iterations": it, "gap": gap, "objective": obj}
    return beta


def lasso_mspe_bound(omega0, c1, c2, sigma, p_tilde, n):
    """Expected in-sample prediction error bound 4 w0^2 + 4 c1 c2 sigma sqrt(2 log(2 p) / n)."""
    return 4 * omega0 ** 2 + 4 * c1 * c2 * sigma * np.sqrt(2 * np.log(2 * p_tilde) / n)


def lipschitz_L1(k, theta_max, phi_max, phi_bar_max):
    return 2 * k * k * theta_max * phi_max ** 2 * phi_bar_max


def proof_bin_width(eps4, L1, d):
    return eps4 ** 2 / (8 * np.sqrt(2) * L1 * d)


def estimate_conditional_means(samples, i, neighbors, t, z, basis, domain,
                               max_iters=200000, tol_rel=1e-8, return_info=False):
    """mu_hat(x_{-i}^(z)) by one binned robust-Lasso regression per basis coordinate."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    n = X.shape[0]
    if n == 0 or X.shape[1] != domain.p:
        raise ShapeError("samples must be a nonempty n x p matrix")
    nb = sorted(neighbors)
    scheme = BinningScheme.for_neighbors(t, domain, nb)
    V = design_matrix(X[:, nb], scheme).tocsc()
    G = (V.T @ V).tocsc()
    phi_max = basis.phi_max(domain)
    c2 = phi_max * (domain.b_u / t) ** len(nb)
    Y = basis.eval(X[:, i])
    zi = scheme.index(X[z, nb][None, :])[0]
    mu = np.empty(basis.k)
    infos = []
    for r in range(basis.k):
        y = Y[:, r]
        yy = float(y @ y)
        beta, info = _pairwise_fw(G, np.asarray(V.T @ y).ravel(), yy, c2, max_iters,
                                  tol_rel * yy, True)
        mu[r] = beta[zi]
        infos.append(info)
    if return_info:
        return mu, {"p_tilde": scheme.size, "c2": c2, "lasso": infos}
    return mu


# ---------------------------------------------------------------- MRW means

def mrw_budget(k, b_l, b_u, rho_max, phi_max, eps, delta):
    """(tau1, tau2) sized so each coordinate is within eps w.p. 1 - delta."""
    tau1 = (8 * k * b_l ** -2 * rho_max * phi_max * np.exp(12 * k * rho_max * phi_max)
            * np.log(4 * phi_max * np.sqrt(b_u) / (eps * np.sqrt(b_l))))
    tau2 = 8 * phi_max ** 2 / eps ** 2 * np.log(2 / delta)
    return int(np.ceil(tau1)), int(np.ceil(tau2))


def mixing_time_bound(k, b_l, b_u, rho_max, phi_max, eps):
    return (8 * k * b_l ** -2 * rho_max * phi_max * np.exp(12 * k * rho_max * phi_max)
            * np.log(np.sqrt(b_u) / (eps * np.sqrt(b_l))))


def _interval_phi_max(basis, lo, hi):
    return basis.phi_max(Domain(np.array([lo]), np.array([hi])))


def mrw_final_states(basis, rho, lo, hi, tau1, tau2, rng, method="regenerative"):
    """Final states w_(m, tau1+1) of tau2 independent MRW chains started at w0.

    "direct" runs every step. "regenerative" yields the same law in O(1) expected
    work per chain: proposals are uniform, so a step whose uniform u satisfies
    u < exp(rho.phi(z) - M), with M >= sup rho.phi, is accepted from every state.
    Scanning the i.i.d. (z, u) pairs backwards from the last step to the latest
    such step fixes the state there; the later steps are then replayed forward.
    """
    rho = np.asarray(rho, dtype=float)
    steps = int(tau1) + 1
    m = int(tau2)
    w0 = initial_point(lo, hi)

    def h(w):
        return basis.eval(w) @ rho

    if method == "direct":
        w = np.full(m, w0)
        hw = h(w)
        for _ in range(steps):
            z = lo + (hi - lo) * rng.random(m)
            hz = h(z)
            acc = np.log(rng.random(m)) < hz - hw
            w = np.where(acc, z, w)
            hw = np.where(acc, hz, hw)
        return w
    if method != "regenerative":
        raise ConfigError(f"unknown MRW method {method!r}")
    M = float(np.abs(rho).sum() * _interval_phi_max(basis, lo, hi))
    zs, us, regen_round = [], [], np.full(m, -1, dtype=np.int64)
    active = np.arange(m)
    r = 0
    while active.size and r < steps:
        z = np.full(m, np.nan)
        u = np.full(m, np.nan)
        z[active] = lo + (hi - lo) * rng.random(active.size)
        u[active] = rng.random(active.size)
        zs.append(z)
        us.append(u)
        hit = np.log(u[active]) < h(z[active]) - M
        regen_round[active[hit]] = r
        active = active[~hit]
        r += 1
    # state right after the regeneration step, or w0 before the first step
    w = np.full(m, w0)
    got = regen_round >= 0
    w[got] = np.array([zs[rr][c] for c, rr in zip(np.nonzero(got)[0], regen_round[got])])
    last = np.where(got, regen_round - 1, len(zs) - 1)  # rounds to replay, newest index
    hw = h(w)
    for rr in range(len(zs) - 1, -1, -1):
        sel = last >= rr
        if not np.any(sel):
            continue
        z = zs[rr][sel]
        hz = h(z)
        acc = np.log(us[rr][sel]) < hz - hw[sel]
        w[sel] = np.where(acc, z, w[sel])
        hw[sel] = np.where(acc, hz, hw[sel])
    return w


def mrw_mean_estimate(basis, rho, lo, hi, tau1, tau2, rng, method="regenerative"):
    """Average of phi over the final states of tau2 MRW chains of tau1 + 1 steps."""
    w = mrw_final_states(basis, rho, lo, hi, tau1, tau2, rng, method)
    return basis.eval(w).mean(axis=0)


# ---------------------------------------------------------------- backward map

@dataclass(frozen=True)
class BackwardMapConfig:
    rho_max: float
    xi: float | None = None  # None -> 1 / (2 k phi_max^2)
    tau1: int = 200
    tau2: int = 20000
    tau3: int = 2000
    quadrature_mode: bool = True
    quadrature_nodes: int = 256
    mrw_method: str = "regenerative"

    def __post_init__(self):
        if min(self.tau1, self.tau2, self.tau3) < 1:
            raise ConfigError("tau1, tau2, tau3 must be >= 1")
        if not self.rho_max > 0 or (self.xi is not None and not self.xi > 0):
            raise ConfigError("rho_max and xi must be positive")


def smoothness_c2(k, phi_max):
    return 2 * k * phi_max ** 2


def backward_map(basis, upsilon_hat, lo, hi, config, rng=None, history=False):
    """Projected gradient descent on Phi(rho) - rho.upsilon over the box |rho| <= rho_max."""
    ups = np.asarray(upsilon_hat, dtype=float)
    if ups.size != basis.k:
        raise ShapeError("mean vector must have k entries")
    phi_max = _interval_phi_max(basis, lo, hi)
    xi = config.xi if config.xi is not None else 1.0 / smoothness_c2(basis.k, phi_max)
    if not config.quadrature_mode and rng is None:
        rng = make_rng(0)
    rho = np.zeros(basis.k)
    path = [rho.copy()]
    for _ in range(config.tau3 + 1):
        if config.quadrature_mode:
            nu = family_moments(basis, rho, lo, hi, config.quadrature_nodes)[0]
        else:
            nu = mrw_mean_estimate(basis, rho, lo, hi, config.tau1, config.tau2, rng,
                                   config.mrw_method)
        rho = np.clip(rho - xi * (nu - ups), -config.rho_max, config.rho_max)
        if history:
            path.append(rho.copy())
    return (rho, np.array(path)) if history else rho


def q_s_grid(basis, lo, hi, rho_max, points=21, nodes=256):
    """Smallest Fisher-information eigenvalue over a points^k grid on the box."""
    axes = [np.linspace(-rho_max, rho_max, points)] * basis.k
    best = np.inf
    for rho in np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, basis.k):
        cov = family_moments(basis, rho, lo, hi, nodes)[1]
        best = min(best, float(np.linalg.eigvalsh(cov)[0]))
    return best


def pgd_iterations(c1, c2, k, rho_max, eps6, c3=0.0):
    """tau3 = (c2 / c1) log(k rho_max^2 / (eps6^2 - c3))."""
    if eps6 ** 2 <= c3:
        raise ConfigError("eps6^2 must exceed c3")
    return int(np.ceil(max(c2 / c1 * np.log(k * rho_max ** 2 / (eps6 ** 2 - c3)), 1)))


# ---------------------------------------------------------------- assembly

def recover_node_params(lambda_hat, edge_estimates, x_z, basis):
    """theta_i = lambda_hat - sum_j Theta_ij phi(x_j^(z)); edge_estimates maps j -> k x k (r on i)."""
    lam = np.asarray(lambda_hat, dtype=float)
    if lam.size != basis.k:
        raise ShapeError("lambda_hat must have k entries")
    out = lam.copy()
    x_z = np.asarray(x_z, dtype=float)
    for j, blk in edge_estimates.items():
        blk = np.asarray(blk, dtype=float)
        if blk.shape != (basis.k, basis.k):
            raise ShapeError("edge estimate must be k x k")
        out -= blk @ basis.eval(x_z[j])
    return out


@dataclass(frozen=True)
class NodeRecoveryConfig:
    t: float | None = None  # None -> 0.1 * b_u
    rho_max: float | None = None  # None -> 2 k d theta_max phi_max
    xi: float | None = None
    tau1: int = 200
    tau2: int = 20000
    tau3: int = 2000
    quadrature_mode: bool = True
    lasso_max_iters: int = 200000
    lasso_tol: float = 1e-8
    average_over_z: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.average_over_z < 1:
            raise ConfigError("average_over_z must be >= 1")


def full_node_pipeline(samples, solutions, edge_set, config, basis, domain,
                       theta_max, d, return_info=False):
    """Per node: conditional means at a random sample z, backward map, subtract edges."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    n, p = X.shape
    if len(solutions) != p:
        raise ShapeError("need one GRISE solution per node")
    t = config.t if config.t is not None else 0.1 * domain.b_u
    phi_max = basis.phi_max(domain)
    rho_max = config.rho_max if config.rho_max is not None else 2 * basis.k * d * theta_max * phi_max
    bm = BackwardMapConfig(rho_max, config.xi, config.tau1, config.tau2, config.tau3,
                           config.quadrature_mode)
    out, infos = [], []
    for i in range(p):
        rng = make_rng(config.seed, 1, i)
        nb = sorted(b if a == i else a for a, b in edge_set if i in (a, b))
        blocks = split_vertex(solutions[i].vertex if hasattr(solutions[i], "vertex")
                              else solutions[i], i, p, basis.k)[1]
        est = {j: blocks[j] for j in nb}
        acc = np.zeros(basis.k)
        for _ in range(config.average_over_z):
            z = int(rng.integers(n))
            mu, info = estimate_conditional_means(X, i, nb, t, z, basis, domain,
                                                  config.lasso_max_iters, config.lasso_tol, True)
            lam = backward_map(basis, mu, domain.lower[i], domain.upper[i], bm, rng)
            acc += recover_node_params(lam, est, X[z], basis)
            info.update(node=i, z=z, mu=mu.tolist(), lam=lam.tolist())
            infos.append(info)
        out.append(acc / config.average_over_z)
    return (out, infos) if return_info else out
