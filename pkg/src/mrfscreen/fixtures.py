"""Standard model constructors used by tests, examples and the CLI."""
import numpy as np

from .model import POLYNOMIAL, BasisFamily, Domain, ModelSpec


def pair_linear_model(coupling=1.0, node=(0.0, 0.0), b=1.0, theta_max=1.5, theta_min=0.5):
    """Two variables on [-b, b] with density proportional to exp(node.x + coupling x1 x2)."""
    return ModelSpec(BasisFamily(POLYNOMIAL, 1), Domain.symmetric(2, b),
                     np.asarray(node, float).reshape(2, 1), {(0, 1): [[coupling]]},
                     theta_max=theta_max, theta_min=theta_min, d=1)


def reference_pair_model():
    """The two-node x1*x2 model with unit coupling on [-1, 1]^2."""
    return pair_linear_model(1.0)


def chain_model(p=12, weight=0.25, theta_min=0.2, theta_max=None, node=0.0, b=1.0):
    """Path graph 1-2-...-p with alternating-sign couplings of magnitude `weight`."""
    edges = {(i, i + 1): [[weight if i % 2 == 0 else -weight]] for i in range(p - 1)}
    theta_max = max(weight, abs(node)) if theta_max is None else theta_max
    return ModelSpec(BasisFamily(POLYNOMIAL, 1), Domain.symmetric(p, b),
                     np.full((p, 1), node), edges, theta_max=theta_max,
                     theta_min=theta_min, d=2)


def random_sparse_model(p, d, rng, k=1, lo=0.2, hi=0.5, node_lo=0.2, node_hi=0.5, b=1.0,
                        kind=POLYNOMIAL, edge_prob=1.0):
    """Random graph with max degree d; magnitudes uniform in [lo, hi] with random signs."""
    basis = BasisFamily(kind, k)
    deg = np.zeros(p, dtype=int)
    edges = {}
    pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
    for idx in rng.permutation(len(pairs)):
        i, j = pairs[idx]
        if deg[i] < d and deg[j] < d and rng.random() < edge_prob:
            blk = rng.uniform(lo, hi, (k, k)) * rng.choice([-1.0, 1.0], (k, k))
            edges[(i, j)] = blk
            deg[i] += 1
            deg[j] += 1
    node = rng.uniform(node_lo, node_hi, (p, k)) * rng.choice([-1.0, 1.0], (p, k))
    return ModelSpec(basis, Domain.symmetric(p, b), node, edges,
                     theta_max=max(hi, node_hi), theta_min=min(lo, node_lo), d=d)


def linear_s1_model(b=1.0, theta_max=0.1, coupling=None, node=None):
    """Two-node linear model used for the entropy lower-bound closed form."""
    c = theta_max if coupling is None else coupling
    nd = (0.0, 0.0) if node is None else node
    return ModelSpec(BasisFamily(POLYNOMIAL, 1), Domain.symmetric(2, b),
                     np.asarray(nd, float).reshape(2, 1), {(0, 1): [[c]]},
                     theta_max=theta_max, theta_min=min(abs(c), theta_max), d=1)
