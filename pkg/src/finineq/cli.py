"""``finineq`` command line: measures, estimate, lp, report, simulate."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .config import load_config
from .errors import ConfigError, FinIneqError

EXIT_OK, EXIT_DATA, EXIT_ESTIMATION, EXIT_CONFIG = 0, 1, 2, 3


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # sub-parser copies must not reset values given before the subcommand
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON run configuration", **kw)
    p.add_argument("--seed", type=int, help="master seed", **kw)
    p.add_argument("--out", help="run directory", **kw)
    p.add_argument("--threads", type=int, help="worker threads for rotation search", **kw)
    p.add_argument("-v", "--verbose", action="store_true", **kw)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    ap = argparse.ArgumentParser(prog="finineq", parents=[_global_flags(suppress=False)],
                                 description="Financial shocks and income inequality pipeline.")
    sub = ap.add_subparsers(dest="command", required=True)

    m = sub.add_parser("measures", parents=[common], help="inequality measures from microdata")
    m.add_argument("--interp", choices=("linear", "flat", "both"))

    e = sub.add_parser("estimate", parents=[common], help="panel VAR and shock identification")
    e.add_argument("--scheme", help="sign-restriction scheme name")
    e.add_argument("--identification", choices=("sign", "recursive"))
    e.add_argument("--iterations", type=int)
    e.add_argument("--burn-in", type=int)
    e.add_argument("--save-draws", action="store_true")

    lp = sub.add_parser("lp", parents=[common], help="local projections on extracted shocks")
    lp.add_argument("--no-uncertainty", action="store_true", help="drop the uncertainty controls")
    lp.add_argument("--hac", choices=("h_plus_1", "p_plus_1", "p_plus_h_plus_1"))
    lp.add_argument("--signed", action="store_true", help="split the shock by sign")
    lp.add_argument("--interp", choices=("linear", "flat", "both"))
    lp.add_argument("--horizons", type=int)

    r = sub.add_parser("report", parents=[common], help="summary tables and scatter data")
    r.add_argument("run_dir", nargs="?", help="defaults to --out or the configured run directory")

    s = sub.add_parser("simulate", parents=[common], help="write a synthetic fixture")
    s.add_argument("--scheme")
    s.add_argument("--countries", type=int)
    s.add_argument("--periods", type=int)
    return ap


def overrides_from_args(args) -> dict:
    o: dict = {}

    def put(section, key, value):
        if value is not None:
            o.setdefault(section, {})[key] = value

    if args.seed is not None:
        o["seed"] = args.seed
    if args.threads is not None:
        o["threads"] = args.threads
    if args.out is not None:
        o["paths"] = {"out": args.out}
    cmd = args.command
    if cmd == "measures":
        put("measures", "interp", args.interp)
    elif cmd == "estimate":
        put("identification", "scheme", args.scheme)
        put("identification", "method", args.identification)
        put("gibbs", "iterations", args.iterations)
        put("gibbs", "burn_in", args.burn_in)
        if args.save_draws:
            put("identification", "save_draws", True)
    elif cmd == "lp":
        if args.no_uncertainty:
            put("lp", "include_uncertainty", False)
        put("lp", "hac_rule", args.hac)
        put("lp", "interp", args.interp)
        put("lp", "horizons", args.horizons)
        if args.signed:
            put("lp", "signed", True)
    elif cmd == "simulate":
        put("simulate", "scheme", args.scheme)
        put("simulate", "countries", args.countries)
        put("simulate", "T", args.periods)
    return o


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, overrides_from_args(args))
        if args.command == "measures":
            result = pipeline.cmd_measures(cfg)
        elif args.command == "estimate":
            result = pipeline.cmd_estimate(cfg)
        elif args.command == "lp":
            result = pipeline.cmd_lp(cfg)
        elif args.command == "report":
            run_dir = args.run_dir or cfg["paths"]["out"]
            result = pipeline.cmd_report(run_dir, cfg if args.config else None)
        else:
            result = pipeline.cmd_simulate(cfg)
    except FinIneqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (KeyError, TypeError) as exc:
        print(f"error: bad configuration ({exc!r})", file=sys.stderr)
        return ConfigError.exit_code
    print(json.dumps({"command": args.command, **{k: v for k, v in result.items() if k == "files"}}))
    return EXIT_OK


def main() -> None:
    sys.exit(run())
