"""Canonical JSON encoding used for every hashed or persisted record.

Rules: UTF-8, object keys sorted by code point, no insignificant
whitespace, no NaN/Infinity. Floats use Python's shortest round-trip
``repr``, which is platform independent for IEEE-754 doubles.
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Mapping
from types import MappingProxyType
from typing import Any


def freeze(value: Any) -> Any:
    """Recursively convert dicts to read-only mappings and lists to tuples."""
    if isinstance(value, Mapping):
        return MappingProxyType({str(k): freeze(v) for k, v in value.items()})
    if isinstance(value, (list, tuple)):
        return tuple(freeze(v) for v in value)
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    raise TypeError(f"unsupported value type: {type(value).__name__}")


def thaw(value: Any) -> Any:
    """Inverse of :func:`freeze`; returns plain dicts and lists."""
    if isinstance(value, Mapping):
        return {k: thaw(v) for k, v in value.items()}
    if isinstance(value, tuple):
        return [thaw(v) for v in value]
    return value


def dumps(obj: Any) -> str:
    return json.dumps(
        thaw(obj),
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    )


def to_bytes(obj: Any) -> bytes:
    """Canonical UTF-8 bytes of a JSON-compatible value."""
    return dumps(obj).encode("utf-8")


def loads(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return json.loads(data)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
