"""
Logging configuration for the gearbox diagnostics toolkit.
Provides structured logging with run correlation and pipeline stage tracking.
"""

import os
import sys
import json
import uuid
import logging
from contextvars import ContextVar
from typing import Any, Optional
from datetime import datetime, timezone
import structlog
from structlog.contextvars import bind_contextvars, clear_contextvars


# Context variable for run correlation
run_id_ctx: ContextVar[str] = ContextVar('run_id', default='')


def get_run_id() -> str:
    """Get current run ID from context."""
    return run_id_ctx.get('')


def set_run_id(run_id: Optional[str] = None) -> str:
    """Set run ID in context. Generates a short UUID if not provided."""
    if not run_id:
        run_id = str(uuid.uuid4())[:8]
    run_id_ctx.set(run_id)
    bind_contextvars(run_id=run_id)
    return run_id


def clear_run_context():
    """Clear run context variables."""
    run_id_ctx.set('')
    clear_contextvars()


class JSONProcessor:
    """Renders one JSON object per log line."""

    def __call__(self, logger, method_name, event_dict):
        timestamp = datetime.now(timezone.utc).isoformat().replace('+00:00', 'Z')
        event_dict.pop('timestamp', None)
        level = event_dict.pop('level', method_name).upper()
        event = event_dict.pop('event', '')
        run_id = event_dict.pop('run_id', get_run_id())

        log_entry = {
            'timestamp': timestamp,
            'level': level,
            'event': event,
            'run_id': run_id,
        }
        if event_dict:
            log_entry.update(event_dict)

        return json.dumps(log_entry, separators=(',', ':'), default=str)


class HumanProcessor:
    """Human-readable processor for interactive runs."""

    def __call__(self, logger, method_name, event_dict):
        timestamp = datetime.now().strftime('%H:%M:%S.%f')[:-3]
        event_dict.pop('timestamp', None)
        level = event_dict.pop('level', method_name).upper()
        event = event_dict.pop('event', '')
        run_id = event_dict.pop('run_id', get_run_id())

        message = f"[{timestamp}] {level:5} [{run_id}] {event}"

        if event_dict:
            context_items = []
            for key, value in event_dict.items():
                if isinstance(value, (dict, list)):
                    value = json.dumps(value, default=str)
                context_items.append(f"{key}={value}")
            if context_items:
                message += " | " + " ".join(context_items)

        return message


def configure_logging(default_level: str = 'INFO', level: Optional[str] = None):
    """Configure structured logging for the toolkit.

    ENVIRONMENT=production switches to JSON lines. An explicit level wins,
    then LOG_LEVEL, then the default. Output goes to stderr.
    """
    environment = os.getenv('ENVIRONMENT', 'development')
    log_level = (level or os.getenv('LOG_LEVEL') or default_level).upper()

    renderer = JSONProcessor() if environment == 'production' else HumanProcessor()
    processors = [
        structlog.stdlib.filter_by_level,
        structlog.contextvars.merge_contextvars,
        structlog.processors.TimeStamper(fmt="iso"),
        renderer,
    ]

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.stdlib.BoundLogger,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )

    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=getattr(logging, log_level, logging.INFO),
        force=True,
    )


class StageLogger:
    """Start and finish events for the steps of one pipeline stage.

    Events read "<stage>.<step> started" and "<stage>.<step> finished", with
    the step's settings or outcome as fields.
    """

    def __init__(self, stage_name: str):
        self.stage_name = stage_name
        self.logger = structlog.get_logger("geardiag")

    def started(self, step: str, level: str = "info", **settings: Any):
        getattr(self.logger, level.lower())(
            f"{self.stage_name}.{step} started",
            stage=self.stage_name, step=step, **settings,
        )

    def finished(self, step: str, elapsed_s: Optional[float] = None, level: str = "info", **outcome: Any):
        """Log a completed step; elapsed_s is wall time when the caller measured it."""
        if elapsed_s is not None:
            outcome["elapsed_s"] = round(elapsed_s, 3)
        getattr(self.logger, level.lower())(
            f"{self.stage_name}.{step} finished",
            stage=self.stage_name, step=step, **outcome,
        )


# One logger per stage
signal_logger = StageLogger("siggen")
spectro_logger = StageLogger("spectro")
training_logger = StageLogger("training")
anomaly_logger = StageLogger("anomaly")
storage_logger = StageLogger("storage")
