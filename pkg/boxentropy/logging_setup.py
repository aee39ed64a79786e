"""Process-wide logging setup for the command-line entry point."""

from __future__ import annotations

import logging
import sys
from typing import TextIO

LEVELS = ("debug", "info", "warning", "error")
LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def configure_logging(level: str = "info", stream: TextIO | None = None) -> None:
    """
    Route boxentropy log records to stderr at ``level``.

    Calling it again replaces the handler, so a config file's ``logging.level``
    can override the command-line default after the config is loaded.
    """
    if level not in LEVELS:
        raise ValueError(f"log level must be one of {LEVELS}, got {level!r}")
    root = logging.getLogger("boxentropy")
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(stream if stream is not None else sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(getattr(logging, level.upper()))
