"""Command line interface.

Subcommands: gen-data, enumerate, select, audit, experiment, margin.
The experiment subcommand reads a flat key=value config file; every key can
also be overridden with a flag of the same name.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from dpselect import bench, dp
from dpselect.data import (DataBounds, SynthConfig, clip_dataset,
                           generate_synthetic,
                           generate_synthetic_classification, read_dataset,
                           read_model, write_dataset, write_model,
                           write_results)
from dpselect.enumeration import (brute_force_enumerate, mistakes_enumerate,
                                  practical_top_r, top_r_enumerate,
                                  write_enumeration)
from dpselect.oa import OAConfig


def _add_oa_flags(sub, lam_default=120.0):
    sub.add_argument("--s", type=int, required=True)
    sub.add_argument("--r", type=float, default=1.1)
    sub.add_argument("--lambda", dest="lam", type=float, default=lam_default)
    sub.add_argument("--a", type=float, default=0.001)
    sub.add_argument("--b", type=float, default=0.005)
    sub.add_argument("--tol", type=float, default=0.005)
    sub.add_argument("--loss", choices=["ls", "hinge"], default="ls")


def _gen_data(args) -> int:
    cfg = SynthConfig(n=args.n, p=args.p, s=args.s, rho=args.rho,
                      snr=args.snr, seed=args.seed)
    if args.loss == "ls":
        dataset, model = generate_synthetic(cfg)
    else:
        dataset, model = generate_synthetic_classification(cfg)
    write_dataset(args.out, dataset)
    if args.model_out:
        write_model(args.model_out, model)
    return 0


def _enumerate(args) -> int:
    dataset = read_dataset(args.data)
    cfg = OAConfig(lam=args.lam, a=args.a, b=args.b, tol=args.tol)
    rng = np.random.default_rng(args.seed)
    if args.mode == "top_r":
        enum = top_r_enumerate(dataset, args.s, args.r, args.R, cfg,
                               loss=args.loss, rng=rng)
    elif args.mode == "mistakes":
        enum = mistakes_enumerate(dataset, args.s, args.r, cfg,
                                  loss=args.loss, rng=rng)
    elif args.mode == "practical":
        enum = practical_top_r(dataset, args.s, args.r, cfg,
                               loss=args.loss, rng=rng)
    else:
        enum = brute_force_enumerate(dataset, args.s, args.r,
                                     R=args.R, loss=args.loss, cfg=cfg)
    write_enumeration(args.out, enum)
    return 0


def _select(args) -> int:
    dataset = read_dataset(args.data)
    bounds = DataBounds(args.bx, args.by)
    clipped = clip_dataset(dataset, bounds)
    cfg = OAConfig(lam=args.lam, a=args.a, b=args.b, tol=args.tol)
    rng = np.random.default_rng(args.seed)
    p, s = clipped.p, args.s
    if args.loss == "ls":
        delta = dp.sensitivity_ls(bounds, args.r, s).delta
    else:
        delta = dp.sensitivity_hinge(bounds, args.r, s, clipped.n).delta
    if args.method == "top_r":
        enum = practical_top_r(clipped, s, args.r, cfg, loss=args.loss, rng=rng)
        dist = dp.build_p0(enum, delta, args.epsilon, p, s)
        support = dp.sample_top_r(enum, dist, math.inf, p, s, rng)
    elif args.method == "mistakes":
        enum = mistakes_enumerate(clipped, s, args.r, cfg, loss=args.loss, rng=rng)
        dist = dp.mistakes_distribution(enum, delta, args.epsilon, p, s)
        support = dp.sample_mistakes(enum, dist, p, s, rng)
    else:
        enum = brute_force_enumerate(clipped, s, args.r, loss=args.loss)
        table = {it.support: it.score for it in enum.items}
        dist = dp.exact_exponential_mechanism(table, delta, args.epsilon)
        cdf = np.cumsum(dist.weights)
        slot = int(np.searchsorted(cdf, rng.random() * cdf[-1], "right"))
        support = dist.outcomes[slot]
    print(";".join(str(i) for i in support))
    return 0


def _audit(args) -> int:
    d = read_dataset(args.data)
    d_prime = read_dataset(args.data_prime)
    bounds = DataBounds(args.bx, args.by)
    rows = []
    for mech in args.methods.split(","):
        spec = dp.MechanismSpec(mechanism=mech.strip(), epsilon=args.epsilon,
                                s=args.s, r=args.r, bounds=bounds,
                                loss=args.loss, R=args.R)
        res = dp.privacy_audit(d, d_prime, spec)
        rows.append([mech.strip(), args.epsilon, res.max_log_ratio,
                     int(res.gap_ok), args.seed])
    dp.write_audit(args.out, rows)
    return 0


def _experiment(args) -> int:
    mapping = bench.read_config_file(args.config) if args.config else {}
    for key in ("method", "loss", "p", "s", "rho", "snr", "n_grid", "trials",
                "draws_per_trial", "epsilon", "lam", "r", "a", "b", "tol",
                "b_x", "b_y", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            mapping[key] = value
    cfg = bench.ExperimentConfig.from_mapping(mapping)
    result = bench.run_experiment(cfg)
    write_results(args.out, bench.RESULT_COLUMNS, result.rows)
    agg_path = args.aggregate_out or (str(args.out) + ".agg.csv")
    write_results(agg_path, bench.AGGREGATE_COLUMNS, result.aggregates)
    for err in result.errors:
        print(f"trial failed: {err}", file=sys.stderr)
    return 0 if not result.errors else 1


def _margin(args) -> int:
    dataset = read_dataset(args.data)
    model = read_model(args.model)
    tau = bench.identifiability_margin(dataset.x, model.beta, len(model.support))
    print(repr(tau))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpselect",
        description="Differentially private sparse support selection")
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("gen-data", help="write a synthetic dataset CSV")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--p", type=int, required=True)
    gen.add_argument("--s", type=int, required=True)
    gen.add_argument("--rho", type=float, default=0.1)
    gen.add_argument("--snr", type=float, default=5.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--loss", choices=["ls", "hinge"], default="ls")
    gen.add_argument("--out", required=True)
    gen.add_argument("--model-out", default=None)
    gen.set_defaults(func=_gen_data)

    enum = subs.add_parser("enumerate", help="rank supports and write a CSV")
    enum.add_argument("--data", required=True)
    enum.add_argument("--mode", choices=["top_r", "mistakes", "practical",
                                         "brute_force"], default="practical")
    enum.add_argument("--R", type=int, default=None)
    enum.add_argument("--seed", type=int, default=0)
    enum.add_argument("--out", required=True)
    _add_oa_flags(enum)
    enum.set_defaults(func=_enumerate)

    sel = subs.add_parser("select", help="draw one private support")
    sel.add_argument("--data", required=True)
    sel.add_argument("--method", choices=list(bench.METHODS), default="mistakes")
    sel.add_argument("--epsilon", type=float, required=True)
    sel.add_argument("--bx", type=float, default=0.5)
    sel.add_argument("--by", type=float, default=0.5)
    sel.add_argument("--seed", type=int, default=0)
    _add_oa_flags(sel)
    sel.set_defaults(func=_select)

    aud = subs.add_parser("audit", help="exact audit on two neighbor datasets")
    aud.add_argument("--data", required=True)
    aud.add_argument("--data-prime", required=True)
    aud.add_argument("--methods", default="exp_mech,top_r,mistakes")
    aud.add_argument("--epsilon", type=float, required=True)
    aud.add_argument("--s", type=int, required=True)
    aud.add_argument("--r", type=float, default=1.1)
    aud.add_argument("--R", type=int, default=None)
    aud.add_argument("--bx", type=float, default=0.5)
    aud.add_argument("--by", type=float, default=0.5)
    aud.add_argument("--loss", choices=["ls", "hinge"], default="ls")
    aud.add_argument("--seed", type=int, default=0)
    aud.add_argument("--out", required=True)
    aud.set_defaults(func=_audit)

    exp = subs.add_parser("experiment", help="run a seeded recovery sweep")
    exp.add_argument("--config", default=None)
    exp.add_argument("--out", required=True)
    exp.add_argument("--aggregate-out", default=None)
    exp.add_argument("--method", choices=list(bench.METHODS), default=None)
    exp.add_argument("--loss", choices=["ls", "hinge"], default=None)
    exp.add_argument("--p", type=int, default=None)
    exp.add_argument("--s", type=int, default=None)
    exp.add_argument("--rho", type=float, default=None)
    exp.add_argument("--snr", type=float, default=None)
    exp.add_argument("--n-grid", dest="n_grid", default=None)
    exp.add_argument("--trials", type=int, default=None)
    exp.add_argument("--draws-per-trial", dest="draws_per_trial", type=int,
                     default=None)
    exp.add_argument("--epsilon", type=float, default=None)
    exp.add_argument("--lambda", dest="lam", type=float, default=None)
    exp.add_argument("--r", type=float, default=None)
    exp.add_argument("--a", type=float, default=None)
    exp.add_argument("--b", type=float, default=None)
    exp.add_argument("--tol", type=float, default=None)
    exp.add_argument("--b-x", dest="b_x", type=float, default=None)
    exp.add_argument("--b-y", dest="b_y", type=float, default=None)
    exp.add_argument("--seed", type=int, default=None)
    exp.set_defaults(func=_experiment)

    mar = subs.add_parser("margin", help="exact identifiability margin")
    mar.add_argument("--data", required=True)
    mar.add_argument("--model", required=True)
    mar.set_defaults(func=_margin)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
