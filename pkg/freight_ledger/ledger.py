# freight_ledger/ledger.py

"""
Append-only, hash-chained ledgers for the trade-logistics and trade-finance networks.

Included:
- PayloadKind / LedgerRecord: the record model and its chain hash
- Ledger: append, state_hash, query, verify_chain
- save_snapshot / read_snapshot / restore_ledger: FLGR snapshot files

The chain hash H is SHA-256 over
    u64(sequence_no) || u32(len(kind)) || kind || u32(len(payload)) || payload || prev_hash
"""

import hashlib
import logging
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

from freight_ledger import codec
from freight_ledger.errors import ChainIntegrityError, CodecError, SnapshotFormatError
from freight_ledger.identity import NetworkIdentity

logger = logging.getLogger(__name__)

ZERO_DIGEST = bytes(32)
SNAPSHOT_MAGIC = b"FLGR"
SNAPSHOT_VERSION = 1


class PayloadKind(str, Enum):
    SERVICE_CONTRACT = "ServiceContract"
    MILESTONE_EVENT = "MilestoneEvent"
    PARTIAL_INVOICE = "PartialInvoice"
    POLICY = "Policy"
    INSTALLMENT = "Installment"
    SETTLEMENT = "Settlement"
    IMPORTED_INVOICE = "ImportedInvoice"
    REWARD = "Reward"
    ACCURACY_REGISTRY = "AccuracyRegistry"
    IMPORTED_REGISTRY = "ImportedRegistry"
    REPAYMENT = "Repayment"


def compute_record_hash(
    sequence_no: int, payload_kind: PayloadKind, payload_bytes: bytes, prev_hash: bytes
) -> bytes:
    kind = payload_kind.value.encode("utf-8")
    h = hashlib.sha256()
    h.update(struct.pack(">Q", sequence_no))
    h.update(struct.pack(">I", len(kind)))
    h.update(kind)
    h.update(struct.pack(">I", len(payload_bytes)))
    h.update(payload_bytes)
    h.update(prev_hash)
    return h.digest()


@dataclass(frozen=True)
class LedgerRecord:
    sequence_no: int
    payload_kind: PayloadKind
    payload_bytes: bytes
    prev_hash: bytes
    record_hash: bytes

    def payload(self) -> Any:
        """Decoded payload."""
        return codec.decode(self.payload_bytes)

    def expected_hash(self) -> bytes:
        return compute_record_hash(
            self.sequence_no, self.payload_kind, self.payload_bytes, self.prev_hash
        )


class Ledger:
    """
    Single-writer append-only ledger of one network.

    ``append`` is the only mutation path; stored records are frozen and the
    record list is only exposed as a tuple.
    """

    def __init__(self, identity: NetworkIdentity) -> None:
        self._identity = identity
        self._records: List[LedgerRecord] = []

    @property
    def identity(self) -> NetworkIdentity:
        return self._identity

    @property
    def network_id(self) -> str:
        return self._identity.network_id

    @property
    def records(self) -> Tuple[LedgerRecord, ...]:
        return tuple(self._records)

    @property
    def head(self) -> Optional[LedgerRecord]:
        return self._records[-1] if self._records else None

    def __len__(self) -> int:
        return len(self._records)

    def append(self, payload_kind: PayloadKind, payload: Any) -> LedgerRecord:
        """
        Serialize ``payload`` canonically and chain it onto the head.

        Parameters:
            payload_kind: Kind tag stored with the record.
            payload: Any value accepted by the canonical codec.

        Returns:
            The new head record.

        Raises:
            CodecError: payload cannot be serialized; the ledger is unchanged.
        """
        payload_kind = PayloadKind(payload_kind)
        payload_bytes = codec.encode(payload)
        prev_hash = self.state_hash()
        sequence_no = len(self._records)
        record = LedgerRecord(
            sequence_no=sequence_no,
            payload_kind=payload_kind,
            payload_bytes=payload_bytes,
            prev_hash=prev_hash,
            record_hash=compute_record_hash(sequence_no, payload_kind, payload_bytes, prev_hash),
        )
        self._records.append(record)
        logger.debug(
            "%s appended #%d %s", self.network_id, sequence_no, payload_kind.value
        )
        return record

    def state_hash(self) -> bytes:
        return self._records[-1].record_hash if self._records else ZERO_DIGEST

    def query(
        self,
        payload_kind: Union[PayloadKind, str],
        predicate: Optional[Callable[[Any], bool]] = None,
    ) -> List[LedgerRecord]:
        """Records of ``payload_kind`` whose decoded payload satisfies ``predicate``, in sequence order."""
        kind = PayloadKind(payload_kind)
        matches = []
        for record in self._records:
            if record.payload_kind is not kind:
                continue
            if predicate is None or predicate(record.payload()):
                matches.append(record)
        return matches

    def verify_chain(self) -> None:
        verify_records(self._records)


def verify_records(records: Sequence[LedgerRecord]) -> None:
    """
    Full rescan of a record sequence.

    Raises:
        ChainIntegrityError: naming the first offending sequence_no.
    """
    prev_hash = ZERO_DIGEST
    for index, record in enumerate(records):
        if record.sequence_no != index:
            raise ChainIntegrityError(index, f"sequence_no {record.sequence_no} out of order")
        if record.prev_hash != prev_hash:
            raise ChainIntegrityError(index, "prev_hash does not match previous record")
        if record.expected_hash() != record.record_hash:
            raise ChainIntegrityError(index, "record_hash does not match contents")
        prev_hash = record.record_hash


def restore_ledger(identity: NetworkIdentity, records: Sequence[LedgerRecord]) -> Ledger:
    """Rebuild a ledger from verified records."""
    if records and records[0].prev_hash != ZERO_DIGEST:
        raise ChainIntegrityError(0, "genesis prev_hash is not the zero digest")
    verify_records(records)
    ledger = Ledger(identity)
    ledger._records = list(records)
    return ledger


def _record_to_bytes(record: LedgerRecord) -> bytes:
    kind = record.payload_kind.value.encode("utf-8")
    return b"".join(
        [
            struct.pack(">Q", record.sequence_no),
            struct.pack(">I", len(kind)),
            kind,
            struct.pack(">I", len(record.payload_bytes)),
            record.payload_bytes,
            record.prev_hash,
            record.record_hash,
        ]
    )


def snapshot_bytes(ledger: Ledger) -> bytes:
    network = ledger.network_id.encode("utf-8")
    parts = [SNAPSHOT_MAGIC, struct.pack(">H", SNAPSHOT_VERSION), struct.pack(">I", len(network)), network]
    for record in ledger.records:
        body = _record_to_bytes(record)
        parts.append(struct.pack(">I", len(body)))
        parts.append(body)
    return b"".join(parts)


def save_snapshot(ledger: Ledger, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(snapshot_bytes(ledger))
    logger.info("Saved %s snapshot (%d records) to %s", ledger.network_id, len(ledger), path)
    return path


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.offset = 0

    def take(self, size: int, what: str, sequence_no: Optional[int] = None) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise SnapshotFormatError(f"truncated {what}", sequence_no)
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def u32(self, what: str, sequence_no: Optional[int] = None) -> int:
        return struct.unpack(">I", self.take(4, what, sequence_no))[0]


def parse_snapshot(data: bytes) -> Tuple[str, List[LedgerRecord]]:
    """
    Parse snapshot bytes into (network_id, records) without verifying the chain.

    Raises:
        SnapshotFormatError: malformed header or record framing.
    """
    reader = _Reader(data)
    if reader.take(4, "magic") != SNAPSHOT_MAGIC:
        raise SnapshotFormatError("bad magic, not a FLGR snapshot")
    version = struct.unpack(">H", reader.take(2, "version"))[0]
    if version != SNAPSHOT_VERSION:
        raise SnapshotFormatError(f"unsupported snapshot version {version}")
    try:
        network_id = reader.take(reader.u32("network id length"), "network id").decode("utf-8")
    except UnicodeDecodeError as exc:
        raise SnapshotFormatError(f"network id is not UTF-8: {exc}") from exc

    records: List[LedgerRecord] = []
    while reader.offset < len(data):
        index = len(records)
        body = _Reader(reader.take(reader.u32("record length", index), "record", index))
        sequence_no = struct.unpack(">Q", body.take(8, "sequence_no", index))[0]
        kind_raw = body.take(body.u32("kind length", index), "kind", index)
        try:
            kind = PayloadKind(kind_raw.decode("utf-8"))
        except (UnicodeDecodeError, ValueError) as exc:
            raise SnapshotFormatError(f"unknown payload kind {kind_raw!r}", index) from exc
        payload_bytes = body.take(body.u32("payload length", index), "payload", index)
        prev_hash = body.take(32, "prev_hash", index)
        record_hash = body.take(32, "record_hash", index)
        if body.offset != len(body.data):
            raise SnapshotFormatError("record has trailing bytes", index)
        records.append(LedgerRecord(sequence_no, kind, payload_bytes, prev_hash, record_hash))
    return network_id, records


def read_snapshot(path: Union[str, Path]) -> Tuple[str, List[LedgerRecord]]:
    return parse_snapshot(Path(path).read_bytes())


def verify_snapshot(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Rescan a snapshot's hash chain.

    Returns:
        Summary dict with network_id, record count and head hash.

    Raises:
        SnapshotFormatError / ChainIntegrityError naming the offending record.
    """
    network_id, records = read_snapshot(path)
    verify_records(records)
    for record in records:
        try:
            record.payload()
        except CodecError as exc:
            raise ChainIntegrityError(record.sequence_no, f"payload does not decode: {exc}") from exc
    head = records[-1].record_hash if records else ZERO_DIGEST
    return {"network_id": network_id, "records": len(records), "head": head.hex()}
