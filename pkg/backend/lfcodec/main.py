"""
Light Field D2GAN Codec - command-line entry point
"""

import argparse
import sys
from typing import List, Optional

import structlog

from lfcodec.cli import coding, evaluation, training
from lfcodec.core.config import settings
from lfcodec.core.exceptions import LFCodecError
from lfcodec.core.logging import configure_logging

logger = structlog.get_logger()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lfcodec",
        description="Light field compression with D2GAN view synthesis and RD-optimised view dropping",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Register subcommand groups
    coding.register(subparsers)
    training.register(subparsers)
    evaluation.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging(settings)
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        return args.handler(args)
    except LFCodecError as e:
        logger.error("Command failed", command=args.command, error=str(e), error_type=type(e).__name__)
        return 1
    except ValueError as e:
        # pydantic ValidationError included
        logger.error("Invalid configuration", command=args.command, error=str(e))
        return 1


if __name__ == "__main__":
    sys.exit(main())
