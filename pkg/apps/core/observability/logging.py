"""
Structured Logging Setup

Pipeline (configured in configure_structlog()):

    [any logger call]
        → merge_contextvars         ← picks up run_id / scene bound via LogContext
        → service injection
        → add_log_level
        → add_logger_name
        → TimeStamper (ISO 8601, UTC)
        → PositionalArgumentsFormatter
        → StackInfoRenderer
        → format_exc_info
        → JSONRenderer | ConsoleRenderer

    All stdlib logging is routed through the same processors so third-party
    records are formatted consistently. Everything goes to standard error;
    standard output is reserved for command results.

Usage:
    from apps.core.observability.logging import configure_structlog, get_logger

    configure_structlog("INFO", service="train")
    logger = get_logger(__name__)

    logger.info("epoch_completed", epoch=3, train_loss=0.0412)
"""

import logging
import logging.config
from typing import Any

import structlog
from structlog.contextvars import merge_contextvars


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    """Return a structlog logger bound to `name`."""
    return structlog.get_logger(name)


def configure_structlog(
    log_level: str = "INFO",
    service: str = "cenhdr",
    log_format: str = "console",
) -> None:
    """
    Configure structlog + stdlib logging for the entire process.

    Call this ONCE at startup (the CLI does it before dispatching a subcommand).

    Args:
        log_level:  Root log level string ("DEBUG", "INFO", "WARNING", "ERROR").
        service:    Name injected into every log line (the subcommand).
        log_format: "json" for machine-readable lines, "console" for pretty-print.
    """
    log_level_int = getattr(logging, log_level.upper(), logging.INFO)

    logging.config.dictConfig({
        "version": 1,
        "disable_existing_loggers": False,
        "handlers": {
            "default": {
                "class": "logging.StreamHandler",
                "stream": "ext://sys.stderr",
                "formatter": "structlog_plain",
            },
        },
        "formatters": {
            # the formatter owns rendering for both native and stdlib records
            "structlog_plain": {
                "()": structlog.stdlib.ProcessorFormatter,
                "processors": [
                    structlog.stdlib.ProcessorFormatter.remove_processors_meta,
                    _renderer(log_format),
                ],
                "foreign_pre_chain": _build_pre_chain(service),
            },
        },
        "root": {
            "handlers": ["default"],
            "level": log_level_int,
        },
    })

    structlog.configure(
        processors=_build_full_chain(service),
        wrapper_class=structlog.make_filtering_bound_logger(log_level_int),
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )


def _renderer(log_format: str):
    if log_format == "console":
        return structlog.dev.ConsoleRenderer(colors=False)
    return structlog.processors.JSONRenderer()


def _build_pre_chain(service: str) -> list[Any]:
    """Processors shared by the stdlib bridge and native structlog calls."""
    return [
        merge_contextvars,
        _inject_service(service),
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso", utc=True),
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        structlog.processors.UnicodeDecoder(),
    ]


def _build_full_chain(service: str) -> list[Any]:
    """Native chain: hand the event dict to the stdlib formatter for rendering."""
    chain = _build_pre_chain(service)
    chain.append(structlog.stdlib.ProcessorFormatter.wrap_for_formatter)
    return chain


def _inject_service(service: str):
    """Processor: inject `service` into every log event dict."""
    def processor(logger, method, event_dict):
        event_dict.setdefault("service", service)
        return event_dict
    return processor


class LogContext:
    """
    Context manager for temporarily binding extra keys.

    Usage:
        with LogContext(run_id="a1b2", scene="001"):
            logger.info("scene_loaded")   # → includes run_id and scene
    """

    def __init__(self, **kwargs):
        self._kwargs = kwargs

    def __enter__(self):
        structlog.contextvars.bind_contextvars(**self._kwargs)
        return self

    def __exit__(self, *_):
        structlog.contextvars.unbind_contextvars(*self._kwargs.keys())
