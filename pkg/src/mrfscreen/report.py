"""Run report serialization and the hyper-parameter file."""
from __future__ import annotations

import hashlib
import json
import math

import numpy as np

from .errors import ConfigError
from .grise import GriseConfig
from .model import BasisFamily, Domain
from .node_recovery import NodeRecoveryConfig

SCHEMA_VERSION = "1.0"


def model_fingerprint(model):
    text = json.dumps(model.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _check_finite(obj, path="report"):
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ConfigError(f"non-finite number at {path}")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{path}.{k}")
    elif isinstance(obj, list):
        for n, v in enumerate(obj):
            _check_finite(v, f"{path}[{n}]")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dump_report(report):
    rep = _plain(dict(report))
    rep.setdefault("schema_version", SCHEMA_VERSION)
    _check_finite(rep)
    return json.dumps(rep, indent=1, allow_nan=False) + "\n"


def parse_report(text):
    try:
        rep = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"report is not valid JSON: {exc}") from None
    ver = str(rep.get("schema_version", ""))
    major = ver.split(".")[0]
    if major != SCHEMA_VERSION.split(".")[0]:
        raise ConfigError(f"unsupported report schema version {ver!r}")
    for key in ("p", "n", "edges", "grise"):
        if key not in rep:
            raise ConfigError(f"report missing field {key!r}")
    _check_finite(rep)
    return rep


def write_report(report, path):
    with open(path, "w") as fh:
        fh.write(dump_report(report))


def read_report(path):
    with open(path) as fh:
        return parse_report(fh.read())


class Hyper:
    """Fitting inputs: declared bounds, basis, domain and solver settings (never the truth)."""

    def __init__(self, basis, domain, theta_min, theta_max, d, grise, node, seed=0):
        self.basis, self.domain = basis, domain
        self.theta_min, self.theta_max, self.d = float(theta_min), float(theta_max), int(d)
        self.grise, self.node, self.seed = grise, node, int(seed)

    @classmethod
    def from_dict(cls, d):
        try:
            basis = BasisFamily.from_dict(d["basis"])
            domain = Domain.from_dict(d["domain"])
            tmin, tmax, deg = float(d["theta_min"]), float(d["theta_max"]), int(d["d"])
        except KeyError as exc:
            raise ConfigError(f"hyper file missing field {exc}") from None
        g = dict(d.get("grise", {}))
        gamma = g.pop("gamma", None) or tmax * (basis.k + basis.k ** 2 * deg)
        g.setdefault("eta0", "auto")
        try:
            grise = GriseConfig(gamma=gamma, **g)
            node = NodeRecoveryConfig(**d.get("node_recovery", {}))
        except TypeError as exc:
            raise ConfigError(f"bad hyper setting: {exc}") from None
        return cls(basis, domain, tmin, tmax, deg, grise, node, d.get("seed", 0))

    @classmethod
    def from_model(cls, model, **over):
        d = {"basis": model.basis.to_dict(), "domain": model.domain.to_dict(),
             "theta_min": model.theta_min, "theta_max": model.theta_max, "d": model.d}
        d.update(over)
        return cls.from_dict(d)

    def to_dict(self):
        g = self.grise
        n = self.node
        return {"basis": self.basis.to_dict(), "domain": self.domain.to_dict(),
                "theta_min": self.theta_min, "theta_max": self.theta_max, "d": self.d,
                "grise": {"gamma": g.gamma, "epsilon": g.epsilon, "max_iters": g.max_iters,
                          "eta0": g.eta0, "patience": g.patience},
                "node_recovery": dict(n.__dict__), "seed": self.seed}


def read_hyper(path):
    with open(path) as fh:
        try:
            return Hyper.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"hyper file is not valid JSON: {exc}") from None
