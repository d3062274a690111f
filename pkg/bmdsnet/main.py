"""Command-line entry point."""

from typing import List, Optional
import argparse
import logging
import sys

from bmdsnet import __version__
from bmdsnet.cli import data, diagnostics, evaluation, experiments, training
from bmdsnet.cli.context import RunContext, common_parser
from bmdsnet.config import get_settings
from bmdsnet.errors import BmdsError, MissingConfigError
from bmdsnet.formats.config_file import dump_default_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

COMMAND_GROUPS = (data, training, evaluation, experiments, diagnostics)


class UsageError(Exception):
    """Bad command line."""


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so usage errors map to exit 1."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> CliParser:
    parser = CliParser(
        prog="bmdsnet",
        description="Multimodal fusion + decoder gating segmentation with a Bayesian head, at desk scale",
    )
    parser.add_argument("--version", action="version", version=f"bmdsnet {__version__}")
    parser.add_argument("--print-default-config", action="store_true",
                        help="Print every config key with its default and description")
    subparsers = parser.add_subparsers(dest="command", metavar="<command>", parser_class=CliParser)

    # Include command groups
    common = common_parser(CliParser)
    for group in COMMAND_GROUPS:
        group.register(subparsers, common)
    return parser


def configure_logging() -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=get_settings().BMDS_LOG_LEVEL.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def cli_dispatch(argv: Optional[List[str]] = None) -> int:
    """
    Parse argv and run one subcommand.

    Returns:
        0 on success, 1 on a usage error or missing config file, 2 on any
        other failure
    """
    configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help and --version
        return int(e.code or 0)

    if args.print_default_config:
        sys.stdout.write(dump_default_config())
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("bmdsnet: error: a command is required", file=sys.stderr)
        return EXIT_USAGE

    try:
        ctx = RunContext.from_args(args)
        args.handler(ctx, args)
    except MissingConfigError as e:
        print(f"bmdsnet {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except BmdsError as e:
        logger.debug("command failed", exc_info=True)
        print(f"bmdsnet {args.command}: {e}", file=sys.stderr)
        return EXIT_RUNTIME

    print(f"OK {args.command}", flush=True)
    return EXIT_OK


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
