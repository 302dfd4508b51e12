"""Logging configuration for the command line and services."""

import logging
import os
from logging.handlers import RotatingFileHandler

import structlog
from structlog.dev import ConsoleRenderer
from structlog.processors import JSONRenderer
from structlog.types import EventDict, Processor
from uuid6 import uuid7

from .config import Settings, settings as default_settings

CONTEXT_KEYS = ("run_id", "command", "epoch")


def _context_filter(include: dict[str, bool]) -> Processor:
    """Drop bound context fields whose include switch is off."""

    def _filter(_, __, event_dict: EventDict) -> EventDict:
        for key, keep in include.items():
            if not keep:
                event_dict.pop(key, None)
        return event_dict

    return _filter


# Shared processors for all loggers
timestamper = structlog.processors.TimeStamper(fmt="iso")
SHARED_PROCESSORS: list[Processor] = [
    structlog.contextvars.merge_contextvars,
    structlog.stdlib.add_logger_name,
    structlog.stdlib.add_log_level,
    structlog.stdlib.PositionalArgumentsFormatter(),
    structlog.stdlib.ExtraAdder(),
    timestamper,
    structlog.processors.StackInfoRenderer(),
]


def build_formatter(
    *, json_output: bool, pre_chain: list[Processor], context_filter: Processor | None = None
) -> structlog.stdlib.ProcessorFormatter:
    """Build a ProcessorFormatter with the specified renderer and processors."""
    renderer = JSONRenderer() if json_output else ConsoleRenderer()

    processors: list[Processor] = [structlog.stdlib.ProcessorFormatter.remove_processors_meta]
    if context_filter is not None:
        processors.append(context_filter)
    processors.append(renderer)

    if json_output:
        pre_chain = pre_chain + [structlog.processors.format_exc_info]

    return structlog.stdlib.ProcessorFormatter(foreign_pre_chain=pre_chain, processors=processors)


def setup_logging(verbose: bool = False, settings: Settings = default_settings) -> None:
    """Route structlog through stdlib handlers: console on stderr, rotating JSON file under LOG_DIR."""
    structlog.configure(
        processors=SHARED_PROCESSORS + [structlog.stdlib.ProcessorFormatter.wrap_for_formatter],
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )

    console_filter = _context_filter(
        {
            "run_id": settings.CONSOLE_LOG_INCLUDE_RUN_ID,
            "command": settings.CONSOLE_LOG_INCLUDE_COMMAND,
            "epoch": settings.CONSOLE_LOG_INCLUDE_EPOCH,
        }
    )
    console_handler = logging.StreamHandler()
    console_handler.setLevel("DEBUG" if verbose else settings.CONSOLE_LOG_LEVEL)
    console_handler.setFormatter(
        build_formatter(
            json_output=settings.CONSOLE_LOG_FORMAT_JSON, pre_chain=SHARED_PROCESSORS, context_filter=console_filter
        )
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    root_logger.handlers.clear()  # avoid duplicate logs
    root_logger.addHandler(console_handler)

    if settings.FILE_LOG_ENABLED:
        os.makedirs(settings.LOG_DIR, exist_ok=True)
        file_filter = _context_filter(
            {
                "run_id": settings.FILE_LOG_INCLUDE_RUN_ID,
                "command": settings.FILE_LOG_INCLUDE_COMMAND,
                "epoch": settings.FILE_LOG_INCLUDE_EPOCH,
            }
        )
        file_handler = RotatingFileHandler(
            filename=os.path.join(settings.LOG_DIR, "crvae.log"),
            maxBytes=settings.FILE_LOG_MAX_BYTES,
            backupCount=settings.FILE_LOG_BACKUP_COUNT,
        )
        file_handler.setLevel(settings.FILE_LOG_LEVEL)
        file_handler.setFormatter(
            build_formatter(
                json_output=settings.FILE_LOG_FORMAT_JSON, pre_chain=SHARED_PROCESSORS, context_filter=file_filter
            )
        )
        root_logger.addHandler(file_handler)


def bind_run_context(command: str) -> str:
    """Start a fresh log context for one command invocation and return its run ID."""
    run_id = str(uuid7())
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(run_id=run_id, command=command)
    return run_id
