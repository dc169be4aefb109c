"""Gibbs sampling with Metropolized random-walk site updates, plus exact samplers."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numba
import numpy as np

from .errors import CapabilityError, ConfigError, ShapeError
from .model import HARMONIC, conditional_canonical, log_density_unnormalized

CHUNK_SWEEPS = 2000


@dataclass(frozen=True)
class SamplerConfig:
    burn_in: int = 1000
    thin: int = 10
    inner_mrw_steps: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.burn_in < 0 or self.thin < 1 or self.inner_mrw_steps < 1:
            raise ConfigError("need burn_in >= 0, thin >= 1, inner_mrw_steps >= 1")


def make_rng(seed, *stream):
    """Counter-based generator for a (seed, stream...) key."""
    ss = np.random.SeedSequence(int(seed) & (2 ** 64 - 1), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def initial_point(lo, hi):
    """MRW start w0: zero when it lies in the interval, else the midpoint."""
    return 0.0 if lo <= 0.0 <= hi else 0.5 * (lo + hi)


def mrw_site_step(model, i, current, rng):
    """One accept/reject step for x_i given the rest of `current`."""
    x = np.asarray(current, dtype=float)
    lam = conditional_canonical(model, i, x)
    lo, hi = model.domain.lower[i], model.domain.upper[i]
    z = lo + (hi - lo) * rng.random()
    dlog = lam @ (model.basis.eval(z) - model.basis.eval(x[i]))
    if np.log(rng.random()) < min(0.0, dlog):
        return float(z)
    return float(x[i])


@numba.njit(cache=True)
def _phi(kind, b, k, x, out):
    if kind == 0:
        v = x
        for r in range(k):
            out[r] = v
            v *= x
    else:
        for r in range(k // 2):
            w = np.pi * (r + 1) / b
            out[2 * r] = np.sin(w * x)
            out[2 * r + 1] = np.cos(w * x)


@numba.njit(cache=True)
def _gibbs_chunk(state, phis, node, C, nbr_ptr, nbr_idx, lo, hi, kind, b, unif, accepts):
    sweeps, p, inner = unif.shape[0], unif.shape[1], unif.shape[2]
    k = node.shape[1]
    lam = np.empty(k)
    pz = np.empty(k)
    for t in range(sweeps):
        for i in range(p):
            for r in range(k):
                lam[r] = node[i, r]
            for q in range(nbr_ptr[i], nbr_ptr[i + 1]):
                j = nbr_idx[q]
                for r in range(k):
                    acc = 0.0
                    for s in range(k):
                        acc += C[i, j, r, s] * phis[j, s]
                    lam[r] += acc
            for m in range(inner):
                z = lo[i] + (hi[i] - lo[i]) * unif[t, i, m, 0]
                _phi(kind, b, k, z, pz)
                dlog = 0.0
                for r in range(k):
                    dlog += lam[r] * (pz[r] - phis[i, r])
                if dlog >= 0.0 or np.log(unif[t, i, m, 1]) < dlog:
                    state[i] = z
                    for r in range(k):
                        phis[i, r] = pz[r]
                    accepts[i] += 1


def gibbs_sample(model, n, config=SamplerConfig(), return_stats=False):
    """Single-site Gibbs chain; each site update runs `inner_mrw_steps` MRW steps.

    Returns an (n, p) array of retained states (after burn_in, every thin sweeps).
    """
    p, k = model.p, model.k
    if n < 0:
        raise ConfigError("n must be nonnegative")
    out = np.empty((n, p))
    stats = {"acceptance": np.zeros(p), "sweeps": 0}
    if n == 0:
        return (out, stats) if return_stats else out
    rng = make_rng(config.seed, 0)
    lo, hi = model.domain.lower.copy(), model.domain.upper.copy()
    state = np.array([initial_point(a, c) for a, c in zip(lo, hi)])
    phis = model.basis.eval(state)
    C = model.coupling_tensor()
    ptr = [0]
    idx = []
    for i in range(p):
        nb = model.neighbors(i)
        idx.extend(nb)
        ptr.append(len(idx))
    ptr = np.array(ptr, dtype=np.int64)
    idx = np.array(idx, dtype=np.int64)
    kind = 1 if model.basis.kind == HARMONIC else 0
    accepts = np.zeros(p, dtype=np.int64)
    total = config.burn_in + n * config.thin
    done = 0
    kept = 0
    while done < total:
        m = min(CHUNK_SWEEPS, total - done)
        unif = rng.random((m, p, config.inner_mrw_steps, 2))
        # advance in pieces that end exactly on recorded sweeps
        start = done
        pos = 0
        while pos < m:
            t = start + pos  # sweeps completed before this block
            if t < config.burn_in:
                step = min(m - pos, config.burn_in - t)
            else:
                since = (t - config.burn_in) % config.thin
                step = min(m - pos, config.thin - since)
            _gibbs_chunk(state, phis, model.node_params, C, ptr, idx, lo, hi, kind,
                         float(model.basis.b), unif[pos:pos + step], accepts)
            pos += step
            t += step
            if t > config.burn_in and (t - config.burn_in) % config.thin == 0 and kept < n:
                out[kept] = state
                kept += 1
        done += m
    stats["acceptance"] = accepts / (total * config.inner_mrw_steps)
    stats["sweeps"] = total
    return (out, stats) if return_stats else out


def exact_sample_1d(basis, rho, lo, hi, n, rng, grid=8193):
    """Inverse-CDF draws from exp(rho.phi(x)) on [lo, hi] via a tabulated CDF."""
    t = np.linspace(lo, hi, grid)
    a = basis.eval(t) @ np.asarray(rho, float)
    f = np.exp(a - a.max())
    area = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t))])
    target = rng.random(n) * area[-1]
    idx = np.clip(np.searchsorted(area, target, side="right") - 1, 0, grid - 2)
    x0, f0 = t[idx], f[idx]
    slope = (f[idx + 1] - f0) / (t[idx + 1] - x0)
    du = target - area[idx]
    # density is linear inside a cell: solve f0*s + slope*s^2/2 = du (stable root)
    s = 2 * du / (f0 + np.sqrt(np.maximum(f0 * f0 + 2 * slope * du, 0.0)))
    return np.clip(x0 + s, lo, hi)


def exact_sample_joint(model, n, rng):
    """I.i.d. draws by rejection from the uniform box; only for p <= 2."""
    if model.p > 2:
        raise CapabilityError("exact joint sampling is limited to p <= 2")
    pm = model.phi_max
    bound = np.abs(model.node_params).sum() * pm
    bound += sum(np.abs(b).sum() for b in model.edges.values()) * pm * pm
    lo, hi = model.domain.lower, model.domain.upper
    out = np.empty((0, model.p))
    while out.shape[0] < n:
        m = max(2 * (n - out.shape[0]), 64)
        x = lo + (hi - lo) * rng.random((m, model.p))
        keep = np.log(rng.random(m)) < log_density_unnormalized(model, x) - bound
        out = np.vstack([out, x[keep]])
    return out[:n]


def write_samples(X, path):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeError("sample matrix must be 2-D")
    with open(path, "w", newline="") as fh:
        fh.write(samples_to_csv(X))


def samples_to_csv(X, p=None):
    X = np.asarray(X, dtype=float).reshape(-1, p if p is not None else np.shape(X)[-1])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{j + 1}" for j in range(X.shape[1])])
    for row in X:
        w.writerow([format(v, ".17g") for v in row])
    return buf.getvalue()


def read_samples(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ShapeError("empty sample file")
    head = rows[0]
    p = len(head)
    if head != [f"x{j + 1}" for j in range(p)]:
        raise ShapeError("sample header must be x1,...,xp")
    body = [r for r in rows[1:] if r]
    if any(len(r) != p for r in body):
        raise ShapeError("ragged sample rows")
    try:
        X = np.array(body, dtype=float).reshape(len(body), p)
    except ValueError:
        raise ShapeError("non-numeric sample value") from None
    if not np.all(np.isfinite(X)):
        raise ShapeError("non-finite sample value")
    return X
