"""Basis families, pairwise densities and locally centered features."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, NumericError, ShapeError
from .quadrature import gauss_legendre

POLYNOMIAL = "polynomial"
HARMONIC = "harmonic"


@dataclass(frozen=True)
class BasisFamily:
    """Polynomial basis x^r (r=1..k) or harmonic sin/cos pairs at r*pi/b."""

    kind: str
    k: int
    b: float = 1.0  # frequency scale, harmonic only

    def __post_init__(self):
        if self.kind not in (POLYNOMIAL, HARMONIC):
            raise ConfigError(f"unknown basis kind {self.kind!r}")
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError("basis dimension k must be a positive integer")
        if self.kind == HARMONIC and self.k % 2:
            raise ConfigError("harmonic basis needs an even k")
        if self.b <= 0:
            raise ConfigError("harmonic scale b must be positive")

    @property
    def m(self):
        return self.k // 2

    def _freqs(self):
        return np.pi * np.arange(1, self.m + 1) / self.b

    def eval(self, x):
        """phi(x) with a trailing axis of length k; x may be any array."""
        x = np.asarray(x, dtype=float)
        if self.kind == POLYNOMIAL:
            return x[..., None] ** np.arange(1, self.k + 1)
        wx = x[..., None] * self._freqs()
        out = np.empty(x.shape + (self.k,))
        out[..., 0::2] = np.sin(wx)
        out[..., 1::2] = np.cos(wx)
        return out

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == POLYNOMIAL:
            r = np.arange(1, self.k + 1)
            return r * x[..., None] ** (r - 1)
        w = self._freqs()
        wx = x[..., None] * w
        out = np.empty(x.shape + (self.k,))
        out[..., 0::2] = w * np.cos(wx)
        out[..., 1::2] = -w * np.sin(wx)
        return out

    def mean_over(self, lo, hi):
        """Uniform average of phi over [lo, hi], closed form."""
        L = hi - lo
        if self.kind == POLYNOMIAL:
            r = np.arange(1, self.k + 1)
            return (hi ** (r + 1) - lo ** (r + 1)) / ((r + 1) * L)
        w = self._freqs()
        out = np.empty(self.k)
        out[0::2] = (np.cos(w * lo) - np.cos(w * hi)) / (w * L)
        out[1::2] = (np.sin(w * hi) - np.sin(w * lo)) / (w * L)
        return out

    def phi_max(self, domain):
        if self.kind == HARMONIC:
            return 1.0
        B = domain.abs_bound
        return float(max(B, B ** self.k))

    def phi_bar_max(self, domain):
        if self.kind == HARMONIC:
            return float(self.m * np.pi / self.b)
        B = domain.abs_bound
        r = np.arange(1, self.k + 1)
        # equals max{1, k B^(k-1)} whenever B >= 1
        return float(np.max(r * B ** (r - 1.0)))

    def to_dict(self):
        d = {"kind": self.kind, "k": int(self.k)}
        if self.kind == HARMONIC:
            d["b"] = self.b
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(str(d["kind"]).lower(), int(d["k"]), float(d.get("b", 1.0)))


@dataclass(frozen=True, eq=False)
class Domain:
    """Per-variable intervals [l_i, u_i] with length bounds b_l, b_u."""

    lower: np.ndarray
    upper: np.ndarray
    b_l: float | None = None
    b_u: float | None = None

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ShapeError("lower and upper bounds must be equal-length vectors")
        lengths = hi - lo
        if np.any(~np.isfinite(lengths)) or np.any(lengths <= 0):
            raise ConfigError("every interval needs finite l < u")
        b_l = float(lengths.min()) if self.b_l is None else float(self.b_l)
        b_u = float(lengths.max()) if self.b_u is None else float(self.b_u)
        if not (0 < b_l <= lengths.min() + 1e-12 and lengths.max() <= b_u + 1e-12):
            raise ConfigError("b_l <= u_i - l_i <= b_u must hold with b_l > 0")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "b_l", b_l)
        object.__setattr__(self, "b_u", b_u)

    @classmethod
    def symmetric(cls, p, b=1.0):
        return cls(np.full(p, -float(b)), np.full(p, float(b)))

    @property
    def p(self):
        return self.lower.size

    @property
    def lengths(self):
        return self.upper - self.lower

    @property
    def abs_bound(self):
        return float(max(np.abs(self.lower).max(), np.abs(self.upper).max()))

    def check(self, X, cols=None):
        X = np.asarray(X, dtype=float)
        lo, hi = self.lower, self.upper
        if cols is not None:
            lo, hi = lo[cols], hi[cols]
        if np.any(X < lo) or np.any(X > hi) or np.any(np.isnan(X)):
            raise DomainError("value outside its domain interval")
        return X

    def to_dict(self):
        return {"l": self.lower.tolist(), "u": self.upper.tolist(),
                "b_l": self.b_l, "b_u": self.b_u}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["l"], float), np.asarray(d["u"], float),
                   d.get("b_l"), d.get("b_u"))


def vertex_dim(p, k):
    return k + k * k * (p - 1)


def centering_table(basis, domain):
    """(p, k) table of per-node uniform averages of phi."""
    return np.stack([basis.mean_over(domain.lower[i], domain.upper[i])
                     for i in range(domain.p)])


def eval_basis(basis, x, interval=None):
    if interval is not None:
        x = np.asarray(x, float)
        if np.any(x < interval[0]) or np.any(x > interval[1]):
            raise DomainError("x outside the basis interval")
    return basis.eval(x)


def eval_edge_basis(basis, x, y):
    """psi(x, y) = phi(x) (x) phi(y), row-major in (r, s)."""
    px, py = basis.eval(x), basis.eval(y)
    return (px[..., :, None] * py[..., None, :]).reshape(px.shape[:-1] + (basis.k ** 2,))


def centered_basis(basis, domain, i, x):
    """phi(x) minus its uniform average over X_i."""
    domain.check(x, i)
    return basis.eval(x) - basis.mean_over(domain.lower[i], domain.upper[i])


def centered_edge_basis(basis, domain, i, x, y):
    """psi(x, y) centered over the first argument on X_i."""
    domain.check(x, i)
    c = basis.mean_over(domain.lower[i], domain.upper[i])
    px = basis.eval(x) - c
    py = basis.eval(y)
    return (px[..., :, None] * py[..., None, :]).reshape(px.shape[:-1] + (basis.k ** 2,))


def feature_matrix(basis, domain, i, X, centers=None):
    """Rows are phi^(i)(x) for each sample x (rows of X), in vertex layout.

    Layout: node block (k) then, for j ascending and j != i, the k*k block
    (phi_r(x_i) - c_r) * phi_s(x_j) flattened row-major.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, p = X.shape
    if p != domain.p:
        raise ShapeError(f"samples have {p} columns, domain has {domain.p}")
    k = basis.k
    if centers is None:
        centers = basis.mean_over(domain.lower[i], domain.upper[i])
    pi = basis.eval(X[:, i]) - centers
    others = [j for j in range(p) if j != i]
    out = np.empty((n, vertex_dim(p, k)))
    out[:, :k] = pi
    if others:
        po = basis.eval(X[:, others])  # (n, p-1, k)
        blk = pi[:, None, :, None] * po[:, :, None, :]  # (n, p-1, k, k)
        out[:, k:] = blk.reshape(n, -1)
    return out


def feature_vector(basis, domain, i, x):
    x = np.asarray(x, dtype=float)
    domain.check(x)
    return feature_matrix(basis, domain, i, x[None, :])[0]


def split_vertex(v, i, p, k):
    """Node block and {j: k x k block oriented with r on node i}."""
    v = np.asarray(v, dtype=float)
    if v.size != vertex_dim(p, k):
        raise ShapeError("vertex parameter has the wrong length")
    blocks = {}
    pos = k
    for j in range(p):
        if j == i:
            continue
        blocks[j] = v[pos:pos + k * k].reshape(k, k)
        pos += k * k
    return v[:k].copy(), blocks


def join_vertex(node, blocks, i, p, k):
    v = np.zeros(vertex_dim(p, k))
    v[:k] = node
    pos = k
    for j in range(p):
        if j == i:
            continue
        if j in blocks:
            v[pos:pos + k * k] = np.asarray(blocks[j]).reshape(-1)
        pos += k * k
    return v


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Pairwise density exp(sum_i theta_i.phi(x_i) + sum_{i<j} phi(x_i)^T Theta_ij phi(x_j))."""

    basis: BasisFamily
    domain: Domain
    node_params: np.ndarray
    edges: dict = field(default_factory=dict)
    theta_max: float = 1.0
    theta_min: float = 0.1
    d: int | None = None

    def __post_init__(self):
        p, k = self.domain.p, self.basis.k
        node = np.array(self.node_params, dtype=float).reshape(p, k)
        edges = {}
        for key, blk in dict(self.edges).items():
            i, j = int(key[0]), int(key[1])
            blk = np.array(blk, dtype=float)
            if i > j:
                i, j, blk = j, i, blk.T
            if i == j or not (0 <= i < p and 0 <= j < p):
                raise ConfigError(f"bad edge ({i}, {j})")
            if blk.shape != (k, k):
                raise ShapeError("edge block must be k x k")
            if np.any(blk != 0):
                edges[(i, j)] = blk
        object.__setattr__(self, "node_params", node)
        object.__setattr__(self, "edges", dict(sorted(edges.items())))
        if self.theta_max <= 0 or self.theta_min <= 0:
            raise ConfigError("theta_max and theta_min must be positive")
        allv = np.concatenate([node.ravel()] + [b.ravel() for b in edges.values()])
        if allv.size and np.abs(allv).max() > self.theta_max:
            raise ConfigError("a parameter exceeds theta_max")
        nz = allv[allv != 0]
        if nz.size and np.abs(nz).min() < self.theta_min:
            raise ConfigError("a nonzero parameter is below theta_min")
        deg = self.degrees()
        dmax = int(deg.max()) if p else 0
        if self.d is None:
            object.__setattr__(self, "d", max(dmax, 1))
        elif dmax > self.d:
            raise ConfigError(f"max degree {dmax} exceeds d={self.d}")

    @property
    def p(self):
        return self.domain.p

    @property
    def k(self):
        return self.basis.k

    def degrees(self):
        deg = np.zeros(self.p, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbors(self, i):
        return sorted([b if a == i else a for a, b in self.edges if i in (a, b)])

    def edge_set(self):
        return set(self.edges)

    @property
    def gamma(self):
        return self.theta_max * (self.k + self.k ** 2 * self.d)

    @property
    def phi_max(self):
        return self.basis.phi_max(self.domain)

    @property
    def phi_bar_max(self):
        return self.basis.phi_bar_max(self.domain)

    @property
    def phi_max_c(self):
        pm = self.phi_max
        return (1.0 + self.domain.b_u) * max(pm, pm * pm)

    @property
    def f_lower(self):
        return float(np.exp(-2 * self.gamma * self.phi_max_c) / self.domain.b_u)

    @property
    def f_upper(self):
        return float(np.exp(2 * self.gamma * self.phi_max_c) / self.domain.b_l)

    def coupling_tensor(self):
        """(p, p, k, k) array C with C[i, j][r, s] multiplying phi_r(x_i) phi_s(x_j)."""
        p, k = self.p, self.k
        C = np.zeros((p, p, k, k))
        for (i, j), blk in self.edges.items():
            C[i, j] = blk
            C[j, i] = blk.T
        return C

    def vertex_parameter(self, i):
        C = self.coupling_tensor()
        return join_vertex(self.node_params[i], {j: C[i, j] for j in range(self.p) if j != i},
                           i, self.p, self.k)

    def parameter_vector(self):
        """Node params then upper-triangle edge blocks (i<j, row-major)."""
        C = self.coupling_tensor()
        parts = [self.node_params.ravel()]
        for i in range(self.p):
            for j in range(i + 1, self.p):
                parts.append(C[i, j].ravel())
        return np.concatenate(parts)

    def to_dict(self):
        return {
            "p": int(self.p),
            "basis": self.basis.to_dict(),
            "domain": self.domain.to_dict(),
            "theta_max": self.theta_max,
            "theta_min": self.theta_min,
            "d": int(self.d),
            "node_params": self.node_params.tolist(),
            "edges": [{"i": i + 1, "j": j + 1, "block": b.tolist()}
                      for (i, j), b in self.edges.items()],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            basis = BasisFamily.from_dict(d["basis"])
            domain = Domain.from_dict(d["domain"])
            if int(d["p"]) != domain.p:
                raise ShapeError("p does not match the domain length")
            edges = {(int(e["i"]) - 1, int(e["j"]) - 1): e["block"] for e in d.get("edges", [])}
            return cls(basis, domain, np.asarray(d["node_params"], float), edges,
                       float(d["theta_max"]), float(d["theta_min"]),
                       None if d.get("d") is None else int(d["d"]))
        except KeyError as exc:
            raise ConfigError(f"model file missing field {exc}") from None


def write_model(model, path):
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, indent=1)
        fh.write("\n")


def read_model(path):
    with open(path) as fh:
        return ModelSpec.from_dict(json.load(fh))


def log_density_unnormalized(model, x):
    x = np.asarray(x, dtype=float)
    X = np.atleast_2d(x)
    phi = model.basis.eval(X)  # (n, p, k)
    e = np.einsum("npk,pk->n", phi, model.node_params)
    for (i, j), blk in model.edges.items():
        e += np.einsum("nr,rs,ns->n", phi[:, i], blk, phi[:, j])
    return e[0] if x.ndim == 1 else e


def conditional_canonical(model, i, x):
    """lambda*(x_{-i}); x is a full point (or rows of points), x_i is ignored."""
    x = np.asarray(x, dtype=float)
    X = np.atleast_2d(x)
    lam = np.tile(model.node_params[i], (X.shape[0], 1))
    C = model.coupling_tensor()
    for j in model.neighbors(i):
        lam += model.basis.eval(X[:, j]) @ C[i, j].T
    return lam[0] if x.ndim == 1 else lam


def log_partition_1d(basis, rho, lo, hi, nodes=256):
    t, w = gauss_legendre(lo, hi, nodes)
    a = basis.eval(t) @ np.asarray(rho, float)
    m = a.max()
    s = np.dot(w, np.exp(a - m))
    if not np.isfinite(s) or s <= 0:
        raise NumericError("non-finite normalizing integral")
    return float(m + np.log(s))


def density_1d(basis, rho, lo, hi, x, nodes=256):
    """Density proportional to exp(rho.phi(x)) on [lo, hi]."""
    logz = log_partition_1d(basis, rho, lo, hi, nodes)
    return np.exp(basis.eval(x) @ np.asarray(rho, float) - logz)


def family_moments(basis, rho, lo, hi, nodes=256):
    """Mean vector and covariance of phi under exp(rho.phi) on [lo, hi]."""
    t, w = gauss_legendre(lo, hi, nodes)
    ph = basis.eval(t)
    a = ph @ np.asarray(rho, float)
    q = w * np.exp(a - a.max())
    q /= q.sum()
    mu = q @ ph
    dev = ph - mu
    cov = (dev * q[:, None]).T @ dev
    return mu, cov


def conditional_density(model, i, x_i, x, quadrature_nodes=256):
    if quadrature_nodes < 64:
        raise ConfigError("conditional density needs at least 64 quadrature nodes")
    lam = conditional_canonical(model, i, x)
    lo, hi = model.domain.lower[i], model.domain.upper[i]
    model.domain.check(x_i, i)
    return density_1d(model.basis, lam, lo, hi, x_i, quadrature_nodes)
