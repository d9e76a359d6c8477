from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict

from src.scenarios.types import ScenarioError

logger = logging.getLogger(__name__)


def parse_config_text(text: str, *, source: str = "<config>") -> Dict[str, str]:
    """``key = value`` per line; ``#`` starts a comment; later keys override earlier ones."""
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}", operation="config_file")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ScenarioError(f"{source}:{lineno}: empty key or value", operation="config_file")
        if key in values:
            logger.debug("%s:%s overrides %s", source, lineno, key)
        values[key] = value
    return values


def load_config_file(path: str | Path) -> Dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"Cannot read config file {path}: {exc}", operation="config_file", cause=exc) from exc
    return parse_config_text(text, source=str(path))
