"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 numeric divergence.
"""

import argparse
import logging
import sys

from ..errors import ConfigError
from .config import SCHEMES, SimConfig, load_config, parse_schemes
from .experiments import run_ber_vs_snr, run_ber_vs_symbols, run_ber_vs_users
from .results import emit_results
from .simulate import NumericDivergenceError

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3

EXPERIMENTS = {
    "ber-vs-symbols": run_ber_vs_symbols,
    "ber-vs-snr": run_ber_vs_snr,
    "ber-vs-users": run_ber_vs_users,
}


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser():
    parser = argparse.ArgumentParser(
        prog="coopcdma",
        description="BER experiments for blind cooperative DS-CDMA receivers.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="TOML configuration (defaults when omitted)")
        p.add_argument("--out", default="results.csv", help="CSV output path")
        p.add_argument("--seed", type=_u64, help="master seed, overrides the config")
        p.add_argument("--threads", type=_positive, default=1, help="worker threads for trials")
        p.add_argument("--scheme", action="append",
                       help=f"scheme to run, repeatable ({', '.join(SCHEMES)}); overrides the config")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args):
    cfg = load_config(args.config) if args.config else SimConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.scheme:
        names = [s for item in args.scheme for s in item.split(",") if s]
        changes["scheme"] = parse_schemes(names)
    return cfg.replace(**changes) if changes else cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        records = EXPERIMENTS[args.command](cfg, threads=args.threads)
    except (ConfigError, OSError, UnicodeDecodeError) as exc:
        # an unreadable config file is a configuration problem too
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericDivergenceError as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    try:
        emit_results(records, args.out, cfg, command=args.command)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
