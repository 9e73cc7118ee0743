"""
Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 validation failure.
"""
import argparse
import logging
import sys
from typing import List, Optional

from . import __version__
from .commands import evaluate, gen_data, infer, inspect_graph, train
from .exceptions import PanoSegError
from .log import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2

COMMANDS = (gen_data, train, evaluate, infer, inspect_graph)


class UsageErrorParser(argparse.ArgumentParser):
    """ArgumentParser that exits with status 1 on usage errors."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def common_options() -> argparse.ArgumentParser:
    parent = UsageErrorParser(add_help=False)
    parent.add_argument("--seed", type=int, default=None, help="Random seed")
    parent.add_argument("--out", default=None, help="Output path")
    parent.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parent.add_argument("--log-file", default=None, help="Also write logs to this file")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = UsageErrorParser(
        prog="openset-panoseg",
        description="Open-set domain-adaptive panoramic segmentation on a synthetic benchmark",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=UsageErrorParser)
    subparsers.required = True
    parent = common_options()
    for command in COMMANDS:
        command.register(subparsers, parent)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK

    setup_logging(logging.DEBUG if args.verbose else logging.INFO, args.log_file)
    try:
        return args.handler(args)
    except PanoSegError as e:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
