#!/usr/bin/env python3
"""Application config loading for cgl."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

from paths import default_output_dir, ensure_dir, xdg_config_home
from workers import resolve_threads


@dataclass
class Config:
    output_dir: Path
    threads: int
    log_level: str


CONFIG_FILENAME = "config.json"
DEFAULT_LOG_LEVEL = "WARNING"


def config_file_path() -> Path:
    """Return the fully-resolved path to the config file."""

    path = (Path(xdg_config_home()) / "cgl" / CONFIG_FILENAME).expanduser()
    ensure_dir(path.parent)
    return path


def _coerce_threads(raw: Any) -> Optional[int]:
    try:
        value = int(raw)
    except (TypeError, ValueError):
        return None
    return value if value >= 1 else None


def _coerce_log_level(raw: Any) -> str:
    name = str(raw or DEFAULT_LOG_LEVEL).strip().upper()
    if not isinstance(logging.getLevelName(name), int):
        return DEFAULT_LOG_LEVEL
    return name


def load_config() -> Config:
    """Load config from XDG path, falling back to defaults.

    Invalid JSON or a missing file fall back to defaults; CGL_THREADS
    overrides the configured thread count.
    """

    config_path = config_file_path()
    raw: Dict[str, Any] = {}

    if config_path.exists():
        raw_text = config_path.read_text()
        try:
            raw = json.loads(raw_text)
        except json.JSONDecodeError:
            try:
                raw = json.loads(_strip_trailing_commas(raw_text))
            except json.JSONDecodeError:
                raw = {}
        if not isinstance(raw, dict):
            raw = {}

    output_dir = Path(raw.get("output_dir") or default_output_dir()).expanduser()

    return Config(
        output_dir=output_dir,
        threads=resolve_threads(_coerce_threads(raw.get("threads"))),
        log_level=_coerce_log_level(raw.get("log_level")),
    )


def _strip_trailing_commas(text: str) -> str:
    """Remove trailing commas before closing braces/brackets."""
    return re.sub(r",(\s*[}\]])", r"\1", text)


__all__ = ["Config", "load_config", "CONFIG_FILENAME", "config_file_path"]
