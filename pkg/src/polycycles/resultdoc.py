"""Structured result documents.

Analysis output is a flat text format: one `dotted.key = value` line per
field, nested structure encoded in the key path, list elements by numeric
path segment.  Values are typed (int, float, bool, none, quoted string)
and round-trip losslessly; floats serialize with repr, whose shortest
form re-reads to the identical bit pattern.  Scans additionally emit
RFC-4180 CSV with a header row and '.' decimal separator.
"""
from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Iterable, Mapping, Sequence

from .errors import ModelError

__all__ = ["dumps", "loads", "write_csv", "render_csv"]

_SCALARS = (str, int, float, bool, type(None))


def _flatten(prefix: str, node: Any, out: list[tuple[str, Any]]) -> None:
    if isinstance(node, Mapping):
        for key, value in node.items():
            key = str(key)
            if not key or "." in key or "=" in key or key.strip() != key:
                raise ModelError(f"unusable document key {key!r} under {prefix!r}")
            _flatten(f"{prefix}.{key}" if prefix else key, value, out)
    elif isinstance(node, (list, tuple)):
        for i, value in enumerate(node):
            _flatten(f"{prefix}.{i}" if prefix else str(i), value, out)
    elif isinstance(node, _SCALARS):
        out.append((prefix, node))
    else:
        raise ModelError(f"unserializable value of type {type(node).__name__} at {prefix!r}")


def _render(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        # cast first: repr of float subclasses (numpy scalars) is not re-readable
        return repr(float(value))
    return json.dumps(value)


def dumps(doc: Mapping[str, Any]) -> str:
    """Serialize a nested document to dotted-key lines."""
    out: list[tuple[str, Any]] = []
    _flatten("", doc, out)
    return "".join(f"{key} = {_render(value)}\n" for key, value in out)


def _parse_value(text: str, lineno: int) -> Any:
    if text == "none":
        return None
    if text == "true":
        return True
    if text == "false":
        return False
    if text == "nan":
        return math.nan
    if text == "inf":
        return math.inf
    if text == "-inf":
        return -math.inf
    if text.startswith('"'):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelError(f"bad string literal on line {lineno}: {exc}") from exc
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError as exc:
        raise ModelError(f"unreadable value {text!r} on line {lineno}") from exc


def _insert(root: dict, path: Sequence[str], value: Any, lineno: int) -> None:
    node = root
    for part in path[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ModelError(f"key path collides with a scalar on line {lineno}")
    if path[-1] in node:
        raise ModelError(f"duplicate key {'.'.join(path)!r} on line {lineno}")
    node[path[-1]] = value


def _listify(node: Any) -> Any:
    """Turn {0: ..., 1: ...} dicts back into lists, recursively."""
    if not isinstance(node, dict):
        return node
    out = {key: _listify(value) for key, value in node.items()}
    if out and all(k.isdigit() for k in out):
        indices = sorted(int(k) for k in out)
        if indices == list(range(len(indices))):
            return [out[str(i)] for i in indices]
    return out


def loads(text: str) -> dict:
    """Parse dotted-key lines back into the nested document."""
    root: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ModelError(f"missing '=' on line {lineno}: {raw!r}")
        path = key.strip().split(".")
        if not all(path):
            raise ModelError(f"empty key segment on line {lineno}")
        _insert(root, path, _parse_value(value.strip(), lineno), lineno)
    result = _listify(root)
    return result if isinstance(result, dict) else {str(i): v for i, v in enumerate(result)}


def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return _render(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """RFC-4180 table: header row, CRLF line ends, repr floats."""
    buf = io.StringIO()
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([_csv_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_csv(header, rows))
