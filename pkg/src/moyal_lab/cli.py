"""``moyal-lab <command> --config <path> [--out <dir>] [--force]``.

Exit status: 0 when every check passes, 1 when a check fails, 2 for
configuration errors (including grids over the dense ceiling without
``--force``).
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ConfigurationError
from .experiments import SUITES, resource_check
from .report import emit, run

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="moyal-lab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=list(SUITES))
    parser.add_argument("--config", required=True, help="flat key = value config file")
    parser.add_argument("--out", help="output directory (default: the config's out key)")
    parser.add_argument("--force", action="store_true", help="allow N^d above the dense ceiling")
    parser.add_argument("--quiet", action="store_true", help="print only the final status line")
    return parser


def _grid_sizes(command: str, config) -> tuple[int, ...]:
    if command == "sweep":
        return tuple(config.sweep_N)
    if command in ("cif", "verify-algebra"):
        return (config.N,)
    return ()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        resource_check(config, args.force, _grid_sizes(args.command, config))
        report = run(args.command, config)
    except ConfigurationError as exc:
        print(f"moyal-lab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"moyal-lab: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    path = emit(report, args.out or config.out)
    if not args.quiet:
        for line in report.summary_lines():
            print(line)
    status = "all checks passed" if report.passed else "some checks FAILED"
    print(f"{args.command}: {status}; report at {path}")
    return EXIT_OK if report.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
