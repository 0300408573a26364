from __future__ import annotations

import argparse
from typing import Sequence

from .cli import SUBCOMMANDS
from .cli.common import EXIT_RUNTIME, EXIT_USAGE, CliArgumentParser, CliUsageError, echo_error
from .config import ConfigError


def build_parser() -> argparse.ArgumentParser:
    parser = CliArgumentParser(
        prog="negotiation-rl",
        description="Train and evaluate graph-attention negotiation policies.",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=CliArgumentParser)
    for module in SUBCOMMANDS:
        module.register(subparsers)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = getattr(args, "handler", None)
        if handler is None:
            parser.print_help()
            return EXIT_USAGE
        return int(handler(args))
    except (CliUsageError, ConfigError) as error:
        echo_error(str(error))
        return EXIT_USAGE
    except KeyboardInterrupt:
        echo_error("interrupted.")
        return EXIT_RUNTIME
    except Exception as error:  # noqa: BLE001
        echo_error(str(error))
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
