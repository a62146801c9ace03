# freight_ledger/codec.py

"""
Canonical binary serialization for ledger payloads.

Every payload that is hashed, signed or stored on a ledger goes through
``encode``. The layout is platform-independent:

- None / False / True: a single tag byte
- int: tag + 8-byte signed big-endian
- float: tag + 8-byte IEEE-754 big-endian (NaN and infinities rejected)
- str / bytes: tag + 4-byte big-endian length + raw bytes (str as UTF-8)
- list / tuple: tag + 4-byte count + encoded items
- dict: tag + 4-byte count + (encoded key, encoded value) pairs, keys are str
  and sorted by their UTF-8 bytes

``decode`` accepts only canonical input: map keys must be strictly
increasing and no trailing bytes may remain.
"""

import math
import struct
from typing import Any, Tuple

from freight_ledger.errors import CodecError

TAG_NONE = 0x00
TAG_FALSE = 0x01
TAG_TRUE = 0x02
TAG_INT = 0x10
TAG_FLOAT = 0x11
TAG_STR = 0x20
TAG_BYTES = 0x21
TAG_LIST = 0x30
TAG_MAP = 0x31

_INT_MIN = -(2**63)
_INT_MAX = 2**63 - 1
_MAX_DEPTH = 64


def encode(value: Any) -> bytes:
    """Encode ``value`` into canonical bytes."""
    out = bytearray()
    _encode_into(out, value, 0)
    return bytes(out)


def decode(data: bytes) -> Any:
    """Decode canonical bytes produced by :func:`encode`."""
    if not isinstance(data, (bytes, bytearray)):
        raise CodecError("decode expects bytes")
    value, offset = _decode_at(bytes(data), 0, 0)
    if offset != len(data):
        raise CodecError(f"{len(data) - offset} trailing bytes after value")
    return value


def _encode_into(out: bytearray, value: Any, depth: int) -> None:
    if depth > _MAX_DEPTH:
        raise CodecError("value nested too deeply")
    if value is None:
        out.append(TAG_NONE)
    elif value is True:
        out.append(TAG_TRUE)
    elif value is False:
        out.append(TAG_FALSE)
    elif isinstance(value, int):
        if not _INT_MIN <= value <= _INT_MAX:
            raise CodecError(f"integer {value} does not fit in 64 bits")
        out.append(TAG_INT)
        out += struct.pack(">q", value)
    elif isinstance(value, float):
        if not math.isfinite(value):
            raise CodecError("non-finite floats cannot be encoded")
        out.append(TAG_FLOAT)
        out += struct.pack(">d", value)
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out.append(TAG_STR)
        out += struct.pack(">I", len(raw))
        out += raw
    elif isinstance(value, (bytes, bytearray)):
        out.append(TAG_BYTES)
        out += struct.pack(">I", len(value))
        out += bytes(value)
    elif isinstance(value, (list, tuple)):
        out.append(TAG_LIST)
        out += struct.pack(">I", len(value))
        for item in value:
            _encode_into(out, item, depth + 1)
    elif isinstance(value, dict):
        keys = list(value.keys())
        if not all(isinstance(k, str) for k in keys):
            raise CodecError("map keys must be strings")
        out.append(TAG_MAP)
        out += struct.pack(">I", len(keys))
        for key in sorted(keys, key=lambda k: k.encode("utf-8")):
            _encode_into(out, key, depth + 1)
            _encode_into(out, value[key], depth + 1)
    else:
        raise CodecError(f"cannot encode value of type {type(value).__name__}")


def _take(data: bytes, offset: int, size: int) -> Tuple[bytes, int]:
    end = offset + size
    if end > len(data):
        raise CodecError("unexpected end of data")
    return data[offset:end], end


def _decode_at(data: bytes, offset: int, depth: int) -> Tuple[Any, int]:
    if depth > _MAX_DEPTH:
        raise CodecError("value nested too deeply")
    tag_bytes, offset = _take(data, offset, 1)
    tag = tag_bytes[0]
    if tag == TAG_NONE:
        return None, offset
    if tag == TAG_FALSE:
        return False, offset
    if tag == TAG_TRUE:
        return True, offset
    if tag == TAG_INT:
        raw, offset = _take(data, offset, 8)
        return struct.unpack(">q", raw)[0], offset
    if tag == TAG_FLOAT:
        raw, offset = _take(data, offset, 8)
        number = struct.unpack(">d", raw)[0]
        if not math.isfinite(number):
            raise CodecError("non-finite float in data")
        return number, offset
    if tag in (TAG_STR, TAG_BYTES):
        raw_len, offset = _take(data, offset, 4)
        raw, offset = _take(data, offset, struct.unpack(">I", raw_len)[0])
        if tag == TAG_BYTES:
            return raw, offset
        try:
            return raw.decode("utf-8"), offset
        except UnicodeDecodeError as exc:
            raise CodecError(f"invalid UTF-8 string: {exc}") from exc
    if tag == TAG_LIST:
        raw_count, offset = _take(data, offset, 4)
        items = []
        for _ in range(struct.unpack(">I", raw_count)[0]):
            item, offset = _decode_at(data, offset, depth + 1)
            items.append(item)
        return items, offset
    if tag == TAG_MAP:
        raw_count, offset = _take(data, offset, 4)
        result = {}
        previous = None
        for _ in range(struct.unpack(">I", raw_count)[0]):
            key, offset = _decode_at(data, offset, depth + 1)
            if not isinstance(key, str):
                raise CodecError("map key is not a string")
            key_bytes = key.encode("utf-8")
            if previous is not None and key_bytes <= previous:
                raise CodecError("map keys are not in canonical order")
            previous = key_bytes
            result[key], offset = _decode_at(data, offset, depth + 1)
        return result, offset
    raise CodecError(f"unknown tag 0x{tag:02x}")
