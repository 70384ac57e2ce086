"""
Structured logging setup
"""

import logging
import sys

import structlog
from structlog.stdlib import LoggerFactory, ProcessorFormatter

from lfcodec.core.config import Settings, settings as default_settings


def configure_logging(config: Settings = default_settings) -> None:
    """Route structlog through the standard library logging module"""

    # Use ConsoleRenderer for development, JSON for batch runs
    if config.DEBUG or config.LOG_FORMAT == "console":
        renderer = structlog.dev.ConsoleRenderer(colors=False)
    else:
        renderer = structlog.processors.JSONRenderer()

    shared_processors = [
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        structlog.processors.UnicodeDecoder(),
    ]

    structlog.configure(
        processors=[structlog.stdlib.filter_by_level, *shared_processors, ProcessorFormatter.wrap_for_formatter],
        context_class=dict,
        logger_factory=LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    # Results go to stdout and files, logs to stderr
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(ProcessorFormatter(processor=renderer, foreign_pre_chain=shared_processors))

    root = logging.getLogger()
    root.handlers = [handler]
    root.setLevel("DEBUG" if config.DEBUG else config.LOG_LEVEL.upper())
