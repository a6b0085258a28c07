"""Command-line entry point: ``nessrates <task> --config run.toml``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import config as cfgmod
from .errors import NessRateError
from .plots import emit_plots
from .runner import _jsonable, run

SUBCOMMANDS = ("ness", "rates", "dynamics", "markov", "sweep", "validate-config")


def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise NessRateError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = cfgmod._parse_env_value(value.strip())
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nessrates", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="TOML file with flat dotted keys")
        s.add_argument("--output", help="output directory (overrides output_dir)")
        s.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
        s.add_argument("--full-scale", action="store_true", help="400-function spin-boson basis, 50 Omega_2 cutoff")
        s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        s.add_argument("--no-plots", action="store_true", help="skip plot-script emission")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = _parse_set(args.set)
        if args.command != "validate-config":
            overrides["task"] = args.command
        if args.output:
            overrides["output_dir"] = args.output
        if args.full_scale:
            overrides["full_scale"] = True
        cfg = cfgmod.load(args.config, overrides=overrides)
        if args.command == "validate-config":
            print(json.dumps(_jsonable(cfg.as_flat()), indent=2, sort_keys=True))
            return 0
        manifest = run(cfg, threads=args.threads)
        if not args.no_plots:
            emit_plots(cfg.output_dir)
        print(f"{cfg.task}: wrote {', '.join(manifest['artifacts'])} to {cfg.output_dir}")
        return 0
    except NessRateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
