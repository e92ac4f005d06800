"""Deterministic JSON/CSV emission.

Machine outputs must be locale-independent and reproducible bit-for-bit:
every real is rendered in scientific notation with 17 significant digits
(full float64 round-trip precision), key order is insertion order, and no
timestamps enter the payload.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np


def format_real(x: float) -> str:
    """Scientific notation with 17 significant digits."""
    if not np.isfinite(x):
        raise ValueError(f"non-finite real {x!r} cannot enter a report")
    return format(float(x), ".16e")


def to_jsonable(obj):
    """Recursively convert dataclasses/arrays/numpy scalars to plain data."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(obj, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_real(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(",")
            out.append(json.dumps(str(k), ensure_ascii=True))
            out.append(":")
            _emit(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _emit(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj) -> str:
    out: list[str] = []
    _emit(to_jsonable(obj), out)
    return "".join(out)


def dump_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj) + "\n")
    return path


def load_json(path):
    return json.loads(Path(path).read_text())


def dump_csv(path, columns: list[str], rows: list[list], comments: list[str]) -> Path:
    """Plot-ready CSV: '#'-prefixed header lines, then pure data rows."""
    path = Path(path)
    lines = [f"# {c}" for c in comments]
    lines.append("# columns: " + ",".join(columns))
    for row in rows:
        cells = []
        for value in row:
            if value is None:
                cells.append("nan")
            elif isinstance(value, str):
                cells.append(value)
            elif isinstance(value, (int, np.integer)):
                cells.append(str(int(value)))
            else:
                cells.append(format_real(float(value)))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")
    return path
