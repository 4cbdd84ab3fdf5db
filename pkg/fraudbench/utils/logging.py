import os
import logging
from logging.handlers import RotatingFileHandler

from rich.console import Console
from rich.logging import RichHandler

EVENTS_LEVEL_NUM = 38
DEFAULT_LOG_BACKUP_COUNT = 10
DEFAULT_EVENTS_RETENTION_SIZE = 2 * 1024 * 1024
ROOT_LOGGER = "fraudbench"

logging.addLevelName(EVENTS_LEVEL_NUM, "EVENT")


def _event(self, message, *args, **kws):
    if self.isEnabledFor(EVENTS_LEVEL_NUM):
        self._log(EVENTS_LEVEL_NUM, message, args, **kws)


logging.Logger.event = _event


def setup_console_logging(level: int = logging.INFO) -> logging.Logger:
    """Attach one RichHandler to the package logger (idempotent)."""
    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(level)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=False, markup=False)
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(handler)
    for handler in logger.handlers:
        if isinstance(handler, RichHandler):
            handler.setLevel(level)
    return logger


def setup_events_logger(full_path, events_retention_size=DEFAULT_EVENTS_RETENTION_SIZE) -> RotatingFileHandler:
    """
    Write EVENT-level records of the package logger to <full_path>/events.log.

    Returns the handler so the caller can detach it when the run ends.
    """
    logger = logging.getLogger(ROOT_LOGGER)
    if logger.level == logging.NOTSET or logger.level > EVENTS_LEVEL_NUM:
        logger.setLevel(EVENTS_LEVEL_NUM)

    formatter = logging.Formatter(
        "%(asctime)s | %(levelname)s | %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    file_handler = RotatingFileHandler(
        os.path.join(full_path, "events.log"),
        maxBytes=events_retention_size,
        backupCount=DEFAULT_LOG_BACKUP_COUNT,
        encoding="utf-8",
    )
    file_handler.setFormatter(formatter)
    file_handler.setLevel(EVENTS_LEVEL_NUM)
    logger.addHandler(file_handler)
    return file_handler


def close_events_logger(handler: RotatingFileHandler):
    logging.getLogger(ROOT_LOGGER).removeHandler(handler)
    handler.close()
