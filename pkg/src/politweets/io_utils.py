"""Shared file helpers: JSONL streaming, CSV writing, stable JSON dumps."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator


class ToolError(Exception):
    """Domain error surfaced to CLI users as structured JSON on stderr."""


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (1-based line number, parsed object) for every non-blank line.

    Malformed lines raise json.JSONDecodeError at the caller's discretion;
    use iter_jsonl_tolerant when per-line error collection is wanted.
    """
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            yield lineno, json.loads(line)


def iter_jsonl_tolerant(path: str | Path) -> Iterator[tuple[int, dict | None, str | None]]:
    """Yield (line number, object-or-None, error-or-None), never raising on bad lines."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                yield lineno, None, f"invalid JSON: {exc.msg}"
                continue
            if not isinstance(obj, dict):
                yield lineno, None, "line is not a JSON object"
                continue
            yield lineno, obj, None


def dump_json_line(obj: dict) -> str:
    """Stable single-line JSON: sorted keys, no trailing spaces, UTF-8 kept."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def write_jsonl(path: str | Path, objects: Iterable[dict]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objects:
            fh.write(dump_json_line(obj) + "\n")
            n += 1
    return n


def write_json(path: str | Path, obj: Any) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, ensure_ascii=False, indent=2)
        fh.write("\n")


def write_csv(path: str | Path, header: list[str], rows: Iterable[Iterable[Any]]) -> int:
    """Plain comma-separated writer; fields are str()-ed, floats preformatted by callers."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(field) for field in row) + "\n")
            n += 1
    return n


def fmt_float(x: float, digits: int = 6) -> str:
    return f"{x:.{digits}f}"
