"""Stats emission: ``key value`` text or a two-row CSV."""

from __future__ import annotations

import csv
import io
import sys
from typing import Mapping, Optional

from .errors import SinkUnavailable

FORMATS = ("text", "csv")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        if value.is_integer() and abs(value) < 1e15:
            return f"{value:.1f}"
        return repr(round(value, 9))
    return str(value)


def render_stats(stats: Mapping[str, object], fmt: str = "text") -> str:
    """Keys are emitted in sorted order so output never depends on insertion order."""
    keys = sorted(stats)
    if fmt == "text":
        return "".join(f"{k} {_fmt(stats[k])}\n" for k in keys)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        w.writerow([_fmt(stats[k]) for k in keys])
        return buf.getvalue()
    raise ValueError(f"unknown stats format {fmt!r}; use one of {FORMATS}")


def emit_stats(stats: Mapping[str, object], fmt: str = "text", path: Optional[str] = None) -> str:
    text = render_stats(stats, fmt)
    if path is None or path == "-":
        sys.stdout.write(text)
        return text
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise SinkUnavailable(f"cannot write stats to {path}: {exc}") from exc
    return text
