# tests/test_codec.py

import math
import struct

import pytest
from hypothesis import given
from hypothesis import strategies as st

from freight_ledger import codec
from freight_ledger.errors import CodecError

scalars = (
    st.none()
    | st.booleans()
    | st.integers(min_value=-(2**63), max_value=2**63 - 1)
    | st.floats(allow_nan=False, allow_infinity=False)
    | st.text(max_size=20)
    | st.binary(max_size=20)
)
values = st.recursive(
    scalars,
    lambda children: st.lists(children, max_size=4) | st.dictionaries(st.text(max_size=8), children, max_size=4),
    max_leaves=20,
)


def _key(text):
    raw = text.encode("utf-8")
    return bytes([codec.TAG_STR]) + struct.pack(">I", len(raw)) + raw


def test_map_key_order_does_not_change_bytes():
    assert codec.encode({"b": 1, "a": [1.5, None, b"\x00"]}) == codec.encode({"a": [1.5, None, b"\x00"], "b": 1})


def test_nested_payload_decodes():
    payload = {"shipment_id": "SHP-1", "lines": [{"amount": 9000, "final": False}], "hash": bytes(32)}
    assert codec.decode(codec.encode(payload)) == payload


@given(values)
def test_decode_inverts_encode(value):
    assert codec.decode(codec.encode(value)) == value


def test_non_canonical_key_order_rejected():
    data = bytes([codec.TAG_MAP]) + struct.pack(">I", 2)
    data += _key("b") + bytes([codec.TAG_NONE]) + _key("a") + bytes([codec.TAG_NONE])
    with pytest.raises(CodecError, match="canonical order"):
        codec.decode(data)


def test_duplicate_key_rejected():
    data = bytes([codec.TAG_MAP]) + struct.pack(">I", 2)
    data += _key("a") + bytes([codec.TAG_TRUE]) + _key("a") + bytes([codec.TAG_FALSE])
    with pytest.raises(CodecError):
        codec.decode(data)


def test_trailing_bytes_rejected():
    with pytest.raises(CodecError, match="trailing"):
        codec.decode(codec.encode(1) + b"\x00")


def test_truncated_input_rejected():
    with pytest.raises(CodecError):
        codec.decode(codec.encode("freight")[:-1])


@pytest.mark.parametrize("value", [math.nan, math.inf, -math.inf])
def test_non_finite_floats_rejected(value):
    with pytest.raises(CodecError):
        codec.encode(value)


def test_unsupported_types_rejected():
    with pytest.raises(CodecError):
        codec.encode({1: "int key"})
    with pytest.raises(CodecError):
        codec.encode({"x": object()})
    with pytest.raises(CodecError):
        codec.encode(2**63)
