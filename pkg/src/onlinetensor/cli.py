"""Command line entry point: ``onlinetensor {datagen,run,compare,verify,bound}``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import datagen, harness
from .checks import run_checks
from .oteg import OtegConfig, compute_tau_beta, nominal_learning_rate, regret_bound, regret_threshold
from .spectral import pn_decompose
from .tensorio import load_tensor, save_tensor


def _add_run_flags(p):
    """One optional flag per RunConfig field; unset flags leave the config alone."""
    for f in dataclasses.fields(harness.RunConfig):
        flag = "--" + f.name.replace("_", "-")
        p.add_argument(flag, dest=f.name, default=None, metavar=f.name.upper(),
                       help=f"override {f.name} (default {f.default!r})")


def _run_config(args) -> harness.RunConfig:
    values = harness.read_config(args.config) if args.config else {}
    for f in dataclasses.fields(harness.RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    config = harness.RunConfig.from_mapping(values)
    config.outdir = harness.resolve_outdir(config, getattr(args, "outdir", None))
    return config


def cmd_datagen(args):
    R = datagen.generate_dataset(args.kind, args.users, args.movies, args.epochs, args.seed,
                                 rank=args.rank, k_ring=args.k_ring, p_rewire=args.p_rewire,
                                 per_user=args.per_user)
    out = Path(args.out)
    data = datagen.to_game_scale(R) if args.game_scale else R.data
    save_tensor(out, data)
    manifest = out.with_name(out.stem + ".manifest.txt")
    params = {k: v for k, v in vars(args).items() if k != "func"}
    params["shape"] = "x".join(str(s) for s in data.shape)
    datagen.write_manifest(manifest, params)
    print(f"wrote {out} and {manifest}")
    return 0


def cmd_run(args):
    config = _run_config(args)
    traces = harness.run_experiment(config)
    harness.emit_outputs(traces, config.outdir, R=config.R, window=config.window, config=config,
                         plot=config.plot)
    _print_summary({name: tr.round_average(min(config.R, tr.T), config.window) for name, tr in traces.items()})
    print(f"outputs in {config.outdir}")
    return 0


def _print_summary(curves, k=5):
    print(f"{'algorithm':<12}{'round 1':>12}{'last ' + str(k):>12}")
    for name, c in curves.items():
        print(f"{name:<12}{c[0]:>12.5f}{harness.tail_mean(c, k):>12.5f}")


def cmd_compare(args):
    curves = {}
    for d in args.dirs:
        with open(Path(d) / "compare.csv") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        prefix = f"{Path(d).name}:" if len(args.dirs) > 1 else ""
        for col, name in enumerate(header[1:], 1):
            curves[prefix + name] = np.array([float(r[col]) for r in body])
    _print_summary(curves, args.last)
    if args.plot:
        harness.plot_rounds(curves, args.plot)
        print(f"wrote {args.plot}")
    return 0


def cmd_verify(args):
    failed = 0
    for name, ok, detail in run_checks(args.seed):
        failed += not ok
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return 1 if failed else 0


def cmd_bound(args):
    if args.tensor:
        X = load_tensor(args.tensor)
        m, n, d = X.shape
        if args.witness:
            dec = pn_decompose(X)
            tau, beta = dec.tau, np.maximum(dec.beta, 1.0 / d)
        else:
            params = compute_tau_beta(X, amplitude=0.0)
            tau, beta = params.tau, params.beta
    else:
        m, n, d = args.m, args.n, args.d
        tau = np.full(d, args.tau)
        beta = np.full(d, args.beta if args.beta is not None else np.sqrt(m + n))
    cfg = OtegConfig(m, n, d, tau, beta, T=args.T, G=args.G)
    print(f"m={m} n={n} d={d} T={args.T} G={args.G}")
    print(f"sum_tau={tau.sum():.6g} sum_beta={beta.sum():.6g}")
    print(f"threshold_T={regret_threshold(cfg):.6g}")
    print(f"eta_nominal={nominal_learning_rate(cfg):.6g}")
    print(f"regret_bound={regret_bound(cfg):.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onlinetensor", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", help="generate a Dataset A or B ratings tensor")
    p.add_argument("--kind", choices=["A", "B"], default="A")
    p.add_argument("--users", type=int, default=30)
    p.add_argument("--movies", type=int, default=20)
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--rank", type=int, default=3)
    p.add_argument("--k-ring", type=int, default=6)
    p.add_argument("--p-rewire", type=float, default=0.1)
    p.add_argument("--per-user", action="store_true", help="draw a(s) separately for each user")
    p.add_argument("--game-scale", action="store_true", help="write (r - 3) / 2 instead of raw ratings")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True, help="output .t3d or .csv path")
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser("run", help="run the selected learners on one game")
    p.add_argument("--config", help="key=value config file")
    _add_run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="summarize compare.csv from one or more run directories")
    p.add_argument("dirs", nargs="+")
    p.add_argument("--last", type=int, default=5)
    p.add_argument("--plot", help="write a combined SVG here")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify", help="run the invariant checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bound", help="print the regret bound for a configuration")
    p.add_argument("--tensor", help="derive tau and beta from this tensor")
    p.add_argument("--witness", action="store_true", help="use P/N witnesses instead of the experimental budgets")
    p.add_argument("--m", type=int, default=30)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--beta", type=float)
    p.add_argument("--T", type=int, default=960)
    p.add_argument("--G", type=float, default=1.0)
    p.set_defaults(func=cmd_bound)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
