"""
Result tables as csv or json-lines.

csv:   ``# metadata: {json}`` header line, then a header row and one row per line.
jsonl: a leading ``{"metadata": {...}}`` record, then one object per row.

Floats carry 12 significant digits; the metadata is serialised with sorted
keys, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, TextIO

from boxentropy.errors import OutputIOError

FORMATS = ("csv", "jsonl")
METADATA_PREFIX = "# metadata: "
SIGNIFICANT_DIGITS = 12


def format_number(value: Any) -> str:
    """csv cell text; floats with 12 significant digits, None as an empty cell."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.{SIGNIFICANT_DIGITS}g}"
    return str(value)


def _json_value(value: Any) -> Any:
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            return None
        return float(f"{value:.{SIGNIFICANT_DIGITS}g}")
    return value


def _parse_cell(text: str) -> Any:
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def build_metadata(
    command: str,
    config: Mapping[str, Any],
    extra: Mapping[str, Any] | None = None,
    *,
    timestamp: bool = False,
) -> dict[str, Any]:
    """
    Provenance block: tool version, command and the resolved config.

    A timestamp is added only on request or when SOURCE_DATE_EPOCH is set.
    """
    from boxentropy import __version__

    metadata: dict[str, Any] = {
        "tool": "boxentropy",
        "version": __version__,
        "command": command,
        "config": dict(config),
    }
    if extra:
        metadata.update(extra)
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        metadata["timestamp"] = datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()
    elif timestamp:
        metadata["timestamp"] = datetime.now(tz=timezone.utc).isoformat()
    return metadata


def _finite(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Mapping):
        return {str(k): _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    return value


def _metadata_json(metadata: Mapping[str, Any]) -> str:
    return json.dumps(_finite(metadata), sort_keys=True, separators=(",", ":"), allow_nan=False, default=str)


def render_table(
    columns: Sequence[str],
    rows: Iterable[Mapping[str, Any]],
    metadata: Mapping[str, Any],
    fmt: str = "csv",
) -> str:
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    buffer = io.StringIO()
    if fmt == "csv":
        buffer.write(METADATA_PREFIX + _metadata_json(metadata) + "\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_number(row.get(c)) for c in columns])
    else:
        buffer.write(json.dumps({"metadata": _finite(metadata)}, sort_keys=True, allow_nan=False, default=str) + "\n")
        for row in rows:
            record = {c: _json_value(row.get(c)) for c in columns}
            buffer.write(json.dumps(record, allow_nan=False) + "\n")
    return buffer.getvalue()


def write_table(
    target: str | Path | TextIO | None,
    columns: Sequence[str],
    rows: Iterable[Mapping[str, Any]],
    metadata: Mapping[str, Any],
    fmt: str = "csv",
) -> None:
    """Render and write to a path, an open stream, or stdout when ``target`` is None."""
    text = render_table(columns, rows, metadata, fmt)
    if target is None:
        sys.stdout.write(text)
        return
    if isinstance(target, (str, Path)):
        try:
            Path(target).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OutputIOError(f"cannot write {target}: {exc}") from exc
        return
    target.write(text)


@dataclass
class Table:
    metadata: dict[str, Any]
    columns: list[str]
    rows: list[dict[str, Any]] = field(default_factory=list)

    def column(self, name: str) -> list[Any]:
        return [row.get(name) for row in self.rows]


def parse_table(text: str, fmt: str = "csv") -> Table:
    if fmt == "csv":
        lines = text.splitlines()
        metadata: dict[str, Any] = {}
        if lines and lines[0].startswith(METADATA_PREFIX):
            metadata = json.loads(lines[0][len(METADATA_PREFIX) :])
            lines = lines[1:]
        reader = csv.reader(lines)
        columns = next(reader, [])
        rows = [dict(zip(columns, (_parse_cell(cell) for cell in cells))) for cells in reader]
        return Table(metadata, list(columns), rows)
    if fmt == "jsonl":
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
        if records and set(records[0]) == {"metadata"}:
            metadata, records = records[0]["metadata"], records[1:]
        else:
            metadata = {}
        columns = list(records[0]) if records else []
        return Table(metadata, columns, records)
    raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")


def read_table(path: str | Path, fmt: str | None = None) -> Table:
    """Parse a table written by ``write_table``; the format defaults from the file suffix."""
    path = Path(path)
    if fmt is None:
        fmt = "jsonl" if path.suffix in (".jsonl", ".json") else "csv"
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OutputIOError(f"cannot read {path}: {exc}") from exc
    return parse_table(text, fmt)
