"""Canonical byte encoding and hashing.

Every hashed or signed structure goes through :func:`encode`, a tagged,
length-prefixed encoding. Mapping keys are emitted in lexicographic order, so
two structurally equal values always encode to the same bytes regardless of
construction order.
"""

from __future__ import annotations

import enum
import hashlib
from fractions import Fraction
from typing import Any

HASH_LEN = 32
ZERO_HASH = bytes(HASH_LEN)


def hash_bytes(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def _frame(tag: bytes, payload: bytes) -> bytes:
    return tag + len(payload).to_bytes(8, "big") + payload


def encode(value: Any) -> bytes:
    # bool before int: bool is an int subclass
    if value is None:
        return _frame(b"N", b"")
    if isinstance(value, bool):
        return _frame(b"T" if value else b"F", b"")
    if isinstance(value, enum.Enum):
        return encode(value.value)
    if isinstance(value, int):
        return _frame(b"I", str(value).encode("ascii"))
    if isinstance(value, Fraction):
        return _frame(b"Q", encode(value.numerator) + encode(value.denominator))
    if isinstance(value, (bytes, bytearray)):
        return _frame(b"B", bytes(value))
    if isinstance(value, str):
        return _frame(b"S", value.encode("utf-8"))
    if isinstance(value, (list, tuple)):
        return _frame(b"L", b"".join(encode(v) for v in value))
    if isinstance(value, (set, frozenset)):
        return _frame(b"L", b"".join(sorted(encode(v) for v in value)))
    if isinstance(value, dict):
        items = []
        for key in sorted(value):
            if not isinstance(key, str):
                raise TypeError(f"mapping keys must be str, got {type(key).__name__}")
            items.append(encode(key) + encode(value[key]))
        return _frame(b"M", b"".join(items))
    raise TypeError(f"cannot canonically encode {type(value).__name__}")


def digest(value: Any) -> bytes:
    """sha256 over the canonical encoding of ``value``."""
    return hash_bytes(encode(value))


def hexs(b: bytes) -> str:
    return b.hex()


def unhex(text: str, length: int | None = None) -> bytes:
    """Strict lowercase-hex decode; rejects any non-canonical spelling."""
    if not text or len(text) % 2 or text != text.lower():
        raise ValueError(f"not canonical hex: {text!r}")
    raw = bytes.fromhex(text)
    if raw.hex() != text:
        raise ValueError(f"not canonical hex: {text!r}")
    if length is not None and len(raw) != length:
        raise ValueError(f"expected {length} bytes, got {len(raw)}")
    return raw
