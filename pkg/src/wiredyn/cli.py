"""Command line entry point.

    wiredyn <verb> [config.yaml] [--set section.key=value ...] [--check]

Verbs: static-scan, calibrate, switch, pulse, superpose, plot. Exit codes:
0 success, 2 invalid configuration or usage, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import yaml

from .negf import CalibrationError, NumericalError
from .tdse import ExtensionError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("wiredyn")

VERBS = ("static-scan", "calibrate", "switch", "pulse", "superpose")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wiredyn", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        p = sub.add_parser(verb)
        p.add_argument("config", nargs="?", help="YAML configuration or an emitted manifest")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="override one configuration value")
        p.add_argument("--check", action="store_true",
                       help="validate and print the resolved configuration without running")
        p.add_argument("-v", "--verbose", action="store_true")
    p = sub.add_parser("plot", help="render SVG figures from the CSV files of a run")
    p.add_argument("directory", help="output directory of an earlier run")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")

    if args.verb == "plot":
        from .plotting import render_directory
        try:
            written = render_directory(args.directory)
        except (FileNotFoundError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for path in written:
            print(path)
        return EXIT_OK

    from .scenarios import ConfigError, load_config, run
    from .negf import ConfigurationError

    try:
        cfg = load_config(args.config, args.overrides, args.verb)
    except (ConfigurationError, OSError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.check:
        sys.stdout.write(yaml.safe_dump(cfg, sort_keys=False))
        return EXIT_OK
    try:
        result = run(args.verb, cfg)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CalibrationError, NumericalError, ExtensionError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for name in result.files:
        print(result.directory / name)
    print(result.directory / "manifest.yaml")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
