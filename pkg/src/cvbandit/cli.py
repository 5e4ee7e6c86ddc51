"""Command line entry point: ``cvbandit run | bound | selftest``."""
import argparse
import sys

from . import harness, selftest
from .stats_core import percentile_v


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="cvbandit", description="Side-information UCB bandit experiments.")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run a batch of replications and write CSV results")
    r.add_argument("--config", required=True, help="JSON experiment config")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--seed", type=_u64, help="base seed (overrides the config)")
    r.add_argument("--runs", type=_positive, help="replications per policy (overrides the config)")
    r.add_argument("--workers", type=_positive, default=1, help="worker processes")

    b = sub.add_parser("bound", help="print the regret upper bound for a Gaussian config")
    b.add_argument("--config", required=True)

    s = sub.add_parser("selftest", help="run the Monte-Carlo invariant checks")
    s.add_argument("--seed", type=_u64, default=20240611)
    return p


def _run(args):
    cfg = harness.load_config(args.config)
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.runs is not None:
        cfg.runs = args.runs
    res = harness.run_batch(cfg, out_dir=args.out, workers=args.workers)
    print(f"mu* = {res.mu_star:.6g}; results in {res.out_dir}")
    print(res.summary_csv(), end="")
    return 0


def _bound(args):
    cfg = harness.load_config(args.config)
    params = harness.BoundParams.from_gaussian_arms(cfg.arms, C=cfg.C)
    T = cfg.horizon
    v = percentile_v(T, params.alpha, T - 2)
    print(f"T = {T}, V = {v:.10g}, C = {cfg.C}")
    print(harness.fmt(harness.theoretical_regret_bound(params, T, v)))
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "run":
            return _run(args)
        if args.cmd == "bound":
            return _bound(args)
        return 0 if selftest.run(args.seed) else 1
    except (ValueError, OSError) as e:
        print(f"cvbandit: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
