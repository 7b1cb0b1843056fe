"""Deterministic report serialization: JSON and CSV writers, hashing, formatting.

Machine-facing numbers carry 17 significant digits (bit-exact for float64);
human-facing summaries use 4.
"""

from __future__ import annotations

import hashlib
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .errors import NumericalError

__all__ = [
    "format_float",
    "human",
    "dumps_json",
    "write_json",
    "write_csv",
    "config_hash",
    "utc_timestamp",
]

MACHINE_SIG_DIGITS = 17
HUMAN_SIG_DIGITS = 4


def format_float(x: float, sig: int = MACHINE_SIG_DIGITS) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise NumericalError(f"cannot serialize non-finite value {x!r}")
    return format(x, f".{sig}g")


def human(x: float) -> str:
    return format_float(x, HUMAN_SIG_DIGITS)


def _emit(obj, indent: int) -> str:
    pad = "  " * indent
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=True)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = []
        for key, value in obj.items():
            if not isinstance(key, str):
                raise NumericalError(f"JSON keys must be strings, got {key!r}")
            parts.append(
                f"{pad}  {json.dumps(key, ensure_ascii=True)}: "
                f"{_emit(value, indent + 1)}"
            )
        return "{\n" + ",\n".join(parts) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        seq = list(obj)
        if not seq:
            return "[]"
        parts = [f"{pad}  {_emit(v, indent + 1)}" for v in seq]
        return "[\n" + ",\n".join(parts) + f"\n{pad}]"
    raise NumericalError(f"cannot serialize {type(obj).__name__} to JSON")


def dumps_json(obj) -> str:
    """Serialize with insertion-ordered keys and 17-significant-digit floats."""
    return _emit(obj, 0) + "\n"


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj), encoding="utf-8")
    return path


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return format_float(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    out = [",".join(header)]
    out.extend(",".join(_csv_cell(cell) for cell in row) for row in rows)
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path


def config_hash(canonical: dict) -> str:
    """Stable hash of a canonical (JSON-serializable) config mapping."""
    return hashlib.sha256(dumps_json(canonical).encode("utf-8")).hexdigest()


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()
