"""Shared exception types."""

from __future__ import annotations


class ParseError(ValueError):
    """A structured input file violated its schema/format.

    Carries the 1-based line number where parsing failed.
    """

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ConfigError(ValueError):
    """A configuration value (or combination) is unusable."""


class BackendError(RuntimeError):
    """A detector/embedder backend failed.

    `scale` is set when the failure happened while processing one pyramid
    level; `raw_line` preserves an unparseable protocol response.
    """

    def __init__(self, message: str, *, scale: float | None = None,
                 raw_line: str | None = None):
        super().__init__(message)
        self.scale = scale
        self.raw_line = raw_line
