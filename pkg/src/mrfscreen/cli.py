"""Command line: mrfscreen gen | fit | eval | curve | diagnose."""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from .errors import CapabilityError, ConfigError, DomainError, MrfError, ShapeError
from .model import read_model
from .pipeline import evaluate, fit, report_edges
from .report import (Hyper, dump_report, model_fingerprint, read_hyper, read_report,
                     write_report)
from .sampler import SamplerConfig, gibbs_sample, make_rng, read_samples, write_samples

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def meta_path(csv_path):
    return str(csv_path) + ".meta.json"


def _sampler_config(args, seed):
    return SamplerConfig(burn_in=args.burn_in, thin=args.thin,
                         inner_mrw_steps=args.inner_mrw_steps, seed=seed)


def cmd_gen(args):
    model = read_model(args.model)
    X, stats = gibbs_sample(model, args.n, _sampler_config(args, args.seed), return_stats=True)
    write_samples(X, args.out)
    with open(meta_path(args.out), "w") as fh:
        json.dump({"fingerprint": model_fingerprint(model), "seed": args.seed, "n": args.n,
                   "p": model.p}, fh, indent=1)
    acc = " ".join(f"{a:.3f}" for a in stats["acceptance"])
    print(f"n={args.n} p={model.p} acceptance=[{acc}]")
    return EXIT_OK


def cmd_fit(args):
    X = read_samples(args.samples)
    hyper = read_hyper(args.config)
    ref = None
    if os.path.exists(meta_path(args.samples)):
        with open(meta_path(args.samples)) as fh:
            ref = json.load(fh)
    # the hyper file decides quadrature vs MRW unless the flag forces quadrature
    quad = True if args.quadrature_backward_map else None
    rep = fit(X, hyper, edges_only=args.edges_only, quadrature=quad, seed=args.seed,
              model_reference=ref)
    text = dump_report(rep)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"n={rep['n']} p={rep['p']} edges={len(rep['edges'])} "
          f"seconds={rep['timings']['total']:.3f}", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args):
    rep = read_report(args.report)
    truth = read_model(args.truth)
    ref = rep.get("model_reference") or {}
    if ref.get("fingerprint") and ref["fingerprint"] != model_fingerprint(truth):
        raise ConfigError("truth model does not match the model the samples were drawn from")
    m = evaluate(rep, truth)
    linf = "n/a" if m["linf"] is None else f"{m['linf']:.6g}"
    print(f"linf={linf} edge_linf={m['edge_linf']:.6g} precision={m['precision']:.4f} "
          f"recall={m['recall']:.4f} exact={int(m['exact'])}")
    if args.out:
        rep["errors"] = m
        write_report(rep, args.out)
    return EXIT_OK


def _parse_n_list(text):
    try:
        ns = [int(float(s)) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"bad --n-list {text!r}") from None
    if not ns or any(n <= 0 for n in ns) or any(a >= b for a, b in zip(ns, ns[1:])):
        raise ConfigError("--n-list must be positive and strictly ascending")
    return ns


def curve_rows(model, ns, trials, seed, hyper=None, edges_only=False, sampler=SamplerConfig()):
    hyper = hyper or Hyper.from_model(model)
    truth_edges = model.edge_set()
    rows = []
    for a, n in enumerate(ns):
        for trial in range(trials):
            s = int(make_rng(seed, 3, a, trial).integers(2 ** 62))
            t0 = time.perf_counter()
            X = gibbs_sample(model, n, SamplerConfig(sampler.burn_in, sampler.thin,
                                                     sampler.inner_mrw_steps, s))
            rep = fit(X, hyper, edges_only=edges_only, seed=s)
            sec = time.perf_counter() - t0
            m = evaluate(rep, model)
            err = m["edge_linf"] if m["linf"] is None else m["linf"]
            rows.append((n, trial, int(report_edges(rep) == truth_edges), err, sec))
    return rows


def cmd_curve(args):
    model = read_model(args.model)
    ns = _parse_n_list(args.n_list)
    if args.trials < 1:
        raise ConfigError("--trials must be positive")
    hyper = read_hyper(args.config) if args.config else None
    rows = curve_rows(model, ns, args.trials, args.seed, hyper, args.edges_only,
                      _sampler_config(args, args.seed))
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "trial", "exact_recovery", "linf_error", "seconds"])
        for n, trial, ok, err, sec in rows:
            w.writerow([n, trial, ok, format(err, ".17g"), format(sec, ".6f")])
    for n in ns:
        rate = np.mean([r[2] for r in rows if r[0] == n])
        print(f"n={n} exact_recovery={rate:.3f}")
    return EXIT_OK


def diagnose(model, node=0, alpha=0.5, kappa_example=None, quadrature_nodes=96):
    from .diagnostics import (complexity_constants, covariance_bundle, kappa_closed_form,
                              model_summary, population_giso_gradient)
    from .node_recovery import q_s_grid
    if not 0 <= node < model.p:
        raise ConfigError(f"node must lie in 1..{model.p}")
    t0 = time.perf_counter()
    bundle = covariance_bundle(model, node, quadrature_nodes)
    grad = population_giso_gradient(model, node, model.vertex_parameter(node), quadrature_nodes)
    out = {"node": node + 1, "bundle": bundle.to_dict(),
           "stationarity_residual": float(np.abs(grad).max())}
    if kappa_example:
        kappa = float(kappa_closed_form(kappa_example, model.domain.b_u, model.d, model.theta_max))
        rho_max = 2 * model.k * model.d * model.theta_max * model.phi_max
        q_s = min(q_s_grid(model.basis, model.domain.lower[i], model.domain.upper[i], rho_max)
                  for i in range(model.p))
        out["kappa"] = {kappa_example: kappa}
        out["complexity_constants"] = complexity_constants(
            model_summary(model, kappa, q_s), alpha).to_dict()
    out["seconds"] = time.perf_counter() - t0
    return out


def cmd_diagnose(args):
    model = read_model(args.model)
    out = diagnose(model, args.node - 1, args.alpha, args.kappa_example, args.quadrature_nodes)
    text = json.dumps(out, indent=1, allow_nan=False) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    b = out["bundle"]
    if b["sandwich"] is not None:
        print("sandwich diag:", " ".join(f"{v:.6g}" for v in np.diag(b["sandwich"])))
    if b["J_inv"] is not None:
        print("J_inv diag:", " ".join(f"{v:.6g}" for v in np.diag(b["J_inv"])))
    print(f"stationarity residual: {out['stationarity_residual']:.3g}")
    for name, v in out.get("kappa", {}).items():
        print(f"kappa[{name}]: {v:.6g}")
    if args.report:
        rep = read_report(args.report)
        rep["diagnostics"] = out
        write_report(rep, args.report)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def _add_sampler_flags(sp):
    sp.add_argument("--burn-in", type=int, default=1000)
    sp.add_argument("--thin", type=int, default=10)
    sp.add_argument("--inner-mrw-steps", type=int, default=1)


def build_parser():
    ap = argparse.ArgumentParser(prog="mrfscreen",
                                 description="Learn continuous pairwise MRFs by interaction screening.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen", help="draw Gibbs samples from a model file")
    sp.add_argument("model")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    _add_sampler_flags(sp)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("fit", help="estimate structure and parameters from samples")
    sp.add_argument("samples")
    sp.add_argument("--config", required=True, help="hyper-parameter JSON")
    sp.add_argument("--out")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--edges-only", action="store_true")
    sp.add_argument("--quadrature-backward-map", action="store_true")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("eval", help="compare a report with the true model")
    sp.add_argument("report")
    sp.add_argument("truth")
    sp.add_argument("--out", help="write the report with errors filled in")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("curve", help="error and recovery rate versus n")
    sp.add_argument("model")
    sp.add_argument("--n-list", required=True)
    sp.add_argument("--trials", type=int, default=5)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--config")
    sp.add_argument("--edges-only", action="store_true")
    _add_sampler_flags(sp)
    sp.set_defaults(func=cmd_curve)

    sp = sub.add_parser("diagnose", help="population oracles for small models")
    sp.add_argument("model")
    sp.add_argument("--node", type=int, default=1)
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--kappa-example", choices=["LinearS1", "HarmonicS2", "PolyDeg2S3",
                                                "PolyProdS4"])
    sp.add_argument("--quadrature-nodes", type=int, default=96)
    sp.add_argument("--out")
    sp.add_argument("--report", help="attach the diagnostics to this run report")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_diagnose)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ShapeError, DomainError, CapabilityError, OSError) as exc:
        print(f"mrfscreen {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MrfError, ArithmeticError, ValueError) as exc:
        print(f"mrfscreen {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
