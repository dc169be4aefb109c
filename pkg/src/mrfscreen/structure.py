"""Graph recovery by thresholding per-node edge estimates."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .model import split_vertex


def infer_p(dim, k):
    """Node count from vertex length k + k^2 (p - 1)."""
    p, rem = divmod(dim - k, k * k)
    if rem or p < 0:
        raise ShapeError("vertex length is inconsistent with k")
    return p + 1


@dataclass
class EdgeRecovery:
    edges: set
    disagreements: int


def edge_blocks(solutions, k):
    """{(i, j): (block from node i, block from node j transposed)} for i < j."""
    p = len(solutions)
    parts = []
    for i, sol in enumerate(solutions):
        v = sol.vertex if hasattr(sol, "vertex") else sol
        if infer_p(np.size(v), k) != p:
            raise ShapeError("solution length does not match the number of nodes")
        parts.append(split_vertex(v, i, p, k)[1])
    return {(i, j): (parts[i][j], parts[j][i].T) for i in range(p) for j in range(i + 1, p)}


def recover_edges(solutions, theta_min, k=1, report=False):
    """Edge (i, j) is kept iff some |theta_ij[r, s]| > theta_min / 3, read from node i < j."""
    thr = theta_min / 3.0
    edges = set()
    disagree = 0
    for (i, j), (a, b) in edge_blocks(solutions, k).items():
        on_i = bool(np.any(np.abs(a) > thr))
        on_j = bool(np.any(np.abs(b) > thr))
        if on_i:
            edges.add((i, j))
        disagree += on_i != on_j
    return EdgeRecovery(edges, disagree) if report else edges


def score_recovery(truth, estimate):
    truth, estimate = set(truth), set(estimate)
    hit = len(truth & estimate)
    precision = hit / len(estimate) if estimate else 1.0
    recall = hit / len(truth) if truth else 1.0
    return {"precision": precision, "recall": recall, "exact": truth == estimate}


def write_edges(edges, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j"])
        for i, j in sorted(edges):
            w.writerow([i + 1, j + 1])


def read_edges(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["i", "j"]:
        raise ShapeError("edge file needs an i,j header")
    out = set()
    for r in rows[1:]:
        if r:
            i, j = int(r[0]) - 1, int(r[1]) - 1
            out.add((min(i, j), max(i, j)))
    return out
