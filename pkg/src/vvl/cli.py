"""Command-line entry point: ``vvl <command> --config <path> [--out <dir>] [--set k=v ...]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, parse_config, parse_overrides
from .harness import COMMANDS, execute


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vvl", description="Vanishing-viscosity numerical lab on the 2D torus.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to a section.key = value config file")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key; may be repeated")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = parse_overrides(args.overrides)
        if args.out:
            overrides["output.dir"] = args.out
        cfg = parse_config(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"vvl: config error: {exc}", file=sys.stderr)
        return 2
    try:
        ok, files, notes = execute(args.command, cfg)
    except Exception as exc:  # noqa: BLE001 - surfaced as a failing exit status
        print(f"vvl: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for note in notes:
        print(note, file=sys.stderr)
    print(f"{args.command}: {len(files)} file(s) written to {cfg.output_dir}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
