import logging
import sys
from typing import TextIO

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def _level(level: int | str) -> int:
    if isinstance(level, int):
        return level
    value = logging.getLevelName(str(level).strip().upper())
    if not isinstance(value, int):
        raise ValueError(f"Unknown log level: {level}")
    return value


def setup_logger(name: str = "qsl_toolkit", level: int | str = logging.INFO, stream: TextIO | None = None):
    """One stream handler per named logger; stderr by default so stdout carries only results.

    Calling again re-targets the existing handler instead of stacking a second one.
    """
    logger = logging.getLogger(name)
    logger.setLevel(_level(level))
    target = stream or sys.stderr

    handlers = [h for h in logger.handlers if isinstance(h, logging.StreamHandler)]
    if handlers:
        for handler in handlers:
            if handler.stream is not target:
                handler.setStream(target)
        return logger

    handler = logging.StreamHandler(target)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)
    return logger
