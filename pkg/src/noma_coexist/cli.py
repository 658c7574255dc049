"""Command line: ``noma-coexist run|sweep|verify|selftest``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError
from .experiment import VerifyError, run_experiment, verify_run
from .io import parse_config


def _load(args):
    spec = parse_config(args.config)
    if args.seed is not None:
        spec.seed0 = args.seed
        spec.base = spec.base.replace(seed=args.seed)
    return spec


def cmd_run(args) -> int:
    spec = _load(args)
    spec.axes = {}
    if args.seed is not None or spec.replications == 1:
        spec.replications = 1
    return run_experiment(spec, args.out, workers=args.workers,
                          proxy_oour=True if args.proxy_oour else None)


def cmd_sweep(args) -> int:
    spec = _load(args)
    return run_experiment(spec, args.out, workers=args.workers,
                          proxy_oour=True if args.proxy_oour else None)


def cmd_verify(args) -> int:
    report = verify_run(args.dir)
    for v in report["violations"]:
        print(v)
    print(f"checked {report['checked_slots']} slots, {len(report['violations'])} violations")
    return 1 if report["violations"] else 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest
    return run_selftest(verbose=True)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="noma-coexist", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)
    for name, fn, helptext in (("run", cmd_run, "run one scenario"),
                               ("sweep", cmd_sweep, "run every point of the [sweep] grid")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default="results")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--proxy-oour", action="store_true",
                        help="rank matches by a cheap proxy instead of full OOUR solves")
        sp.set_defaults(func=fn)
    sp = sub.add_parser("verify", help="audit a results directory")
    sp.add_argument("dir")
    sp.set_defaults(func=cmd_verify)
    sp = sub.add_parser("selftest", help="run the built-in invariant checks")
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, VerifyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
