# tests/test_ledger.py

import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freight_ledger.errors import ChainIntegrityError, CodecError, LedgerError, SnapshotFormatError
from freight_ledger.identity import build_network
from freight_ledger.ledger import (
    ZERO_DIGEST,
    Ledger,
    PayloadKind,
    compute_record_hash,
    parse_snapshot,
    restore_ledger,
    save_snapshot,
    snapshot_bytes,
    verify_records,
    verify_snapshot,
)


@pytest.fixture
def ledger():
    identity, _ = build_network("STL", ["carrier", "shipper", "port-authority"], 2, seed=1)
    ledger = Ledger(identity)
    ledger.append(PayloadKind.SERVICE_CONTRACT, {"contract_id": "SC-1"})
    ledger.append(PayloadKind.MILESTONE_EVENT, {"shipment_id": "SHP-1", "marker": "record-one"})
    ledger.append(PayloadKind.PARTIAL_INVOICE, {"invoice_id": "SHP-1/1", "total": 9000})
    return ledger


def test_empty_ledger_state_hash_is_zero():
    identity, _ = build_network("SWT", ["bank", "carrier", "shipper"], 2, seed=1)
    assert Ledger(identity).state_hash() == ZERO_DIGEST


def test_records_chain_onto_each_other(ledger):
    records = ledger.records
    assert records[0].prev_hash == ZERO_DIGEST
    for previous, record in zip(records, records[1:]):
        assert record.prev_hash == previous.record_hash
    assert [r.sequence_no for r in records] == [0, 1, 2]
    assert ledger.state_hash() == records[-1].record_hash
    ledger.verify_chain()


def test_record_hash_covers_kind():
    record = compute_record_hash(0, PayloadKind.INSTALLMENT, b"x", ZERO_DIGEST)
    other = compute_record_hash(0, PayloadKind.SETTLEMENT, b"x", ZERO_DIGEST)
    assert record != other


def test_unencodable_payload_leaves_ledger_unchanged(ledger):
    head = ledger.state_hash()
    with pytest.raises(CodecError):
        ledger.append(PayloadKind.POLICY, {"rate": float("nan")})
    assert len(ledger) == 3
    assert ledger.state_hash() == head


def test_query_filters_by_kind_and_predicate(ledger):
    ledger.append(PayloadKind.PARTIAL_INVOICE, {"invoice_id": "SHP-2/1", "total": 100})
    matches = ledger.query(PayloadKind.PARTIAL_INVOICE, lambda p: p["total"] > 1000)
    assert [m.payload()["invoice_id"] for m in matches] == ["SHP-1/1"]
    assert len(ledger.query("PartialInvoice")) == 2


def test_tampered_record_reports_sequence_no(ledger):
    records = list(ledger.records)
    records[1] = dataclasses.replace(records[1], payload_bytes=records[1].payload_bytes + b"\x00")
    with pytest.raises(ChainIntegrityError) as excinfo:
        verify_records(records)
    assert excinfo.value.sequence_no == 1


def test_restore_requires_intact_chain(ledger):
    restored = restore_ledger(ledger.identity, ledger.records)
    assert restored.state_hash() == ledger.state_hash()
    with pytest.raises(ChainIntegrityError):
        restore_ledger(ledger.identity, ledger.records[1:])


def test_snapshot_verifies(ledger, tmp_path):
    path = save_snapshot(ledger, tmp_path / "stl.flgr")
    summary = verify_snapshot(path)
    assert summary == {"network_id": "STL", "records": 3, "head": ledger.state_hash().hex()}
    network_id, records = parse_snapshot(path.read_bytes())
    assert network_id == "STL"
    assert tuple(records) == ledger.records


def test_flipped_payload_byte_is_located(ledger, tmp_path):
    data = bytearray(snapshot_bytes(ledger))
    offset = data.find(b"record-one")
    data[offset] ^= 0x01
    path = tmp_path / "tampered.flgr"
    path.write_bytes(bytes(data))
    with pytest.raises(ChainIntegrityError) as excinfo:
        verify_snapshot(path)
    assert excinfo.value.sequence_no == 1


def test_bad_magic_rejected():
    with pytest.raises(SnapshotFormatError, match="magic"):
        parse_snapshot(b"NOPE\x00\x01")


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_any_bit_flip_in_records_is_detected(data):
    identity, _ = build_network("STL", ["carrier", "shipper", "port-authority"], 2, seed=1)
    ledger = Ledger(identity)
    ledger.append(PayloadKind.SERVICE_CONTRACT, {"contract_id": "SC-1"})
    ledger.append(PayloadKind.MILESTONE_EVENT, {"shipment_id": "SHP-1", "emitted_at": 12.5})
    raw = bytearray(snapshot_bytes(ledger))
    header = 4 + 2 + 4 + len("STL")
    position = data.draw(st.integers(min_value=header, max_value=len(raw) - 1))
    bit = data.draw(st.integers(min_value=0, max_value=7))
    raw[position] ^= 1 << bit
    with pytest.raises((LedgerError, CodecError)):
        _, records = parse_snapshot(bytes(raw))
        verify_records(records)
        for record in records:
            record.payload()
