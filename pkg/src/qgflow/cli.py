"""The `qg` command line front end.

Usage: qg <experiment> --config FILE [--jobs N] [--out DIR]

Exit codes: 0 when the run completed and every contract held, 2 when the
run completed but a theorem-shaped contract failed (the manifest records
the violations), 1 on configuration or runtime errors.
"""

import argparse
import logging
import os
import sys

from .configfile import EXPERIMENTS, ConfigError, parse_config
from .harness import ContractViolation, run

log = logging.getLogger("qgflow")

_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qg",
        description="quasi-geostrophic averaging experiments",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker pool size for parallel sweeps (default 1)")
        p.add_argument("--out", default=None,
                       help="output directory (overrides the config)")
    return parser


def _configure_logging() -> None:
    level = _LEVELS.get(os.environ.get("QG_LOG", "error").lower(), logging.ERROR)
    logging.basicConfig(level=level,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    args = _build_parser().parse_args(argv)
    try:
        config = parse_config(args.config)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for err in exc.errors:
            print(f"  - {err}", file=sys.stderr)
        return 1
    if config.experiment != args.experiment:
        print(
            f"config declares experiment '{config.experiment}' but the "
            f"'{args.experiment}' subcommand was invoked",
            file=sys.stderr,
        )
        return 1
    if args.jobs < 1:
        print("--jobs must be a positive integer", file=sys.stderr)
        return 1
    try:
        manifest = run(config, jobs=args.jobs, out=args.out)
    except ContractViolation as exc:
        print("contract violation:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and map to exit code 1
        log.debug("run failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{manifest.experiment}: ok ({manifest.wall_clock_seconds:.2f} s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
