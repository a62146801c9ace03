# freight_ledger/relay.py

"""
Trusted data transfer between the logistics and finance ledgers.

A view of a logistics-ledger record is exported as an AttestedPayload: the
record's canonical payload bytes, their SHA-256 and signatures from a quorum
of the source network's members over

    encode([payload_hash, payload_kind, source_network_id])

The finance side accepts it only if the hash matches and enough distinct
known members signed, then appends an Imported* record. Imports are
idempotent per payload_hash.

Wire format: 4-byte big-endian length prefix followed by the canonical
encoding of the AttestedPayload.
"""

import hashlib
import json
import logging
import socket
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from nacl.signing import SigningKey

from freight_ledger import codec
from freight_ledger.errors import (
    CodecError,
    HashMismatchError,
    QuorumError,
    RecordNotFoundError,
    RelayError,
    UnknownNetworkError,
)
from freight_ledger.identity import NetworkIdentity, sign, verify
from freight_ledger.ledger import Ledger, LedgerRecord, PayloadKind

logger = logging.getLogger(__name__)

IMPORT_KINDS = {
    PayloadKind.PARTIAL_INVOICE: PayloadKind.IMPORTED_INVOICE,
    PayloadKind.ACCURACY_REGISTRY: PayloadKind.IMPORTED_REGISTRY,
}
MAX_FRAME_BYTES = 16 * 1024 * 1024


def attestation_message(payload_hash: bytes, payload_kind: PayloadKind, source_network_id: str) -> bytes:
    """Signed message; the canonical list encoding length-prefixes every field."""
    return codec.encode([payload_hash, payload_kind.value, source_network_id])


@dataclass(frozen=True)
class AttestedPayload:
    source_network_id: str
    payload_kind: PayloadKind
    payload_bytes: bytes
    payload_hash: bytes
    signatures: Tuple[Tuple[str, bytes], ...]

    def payload(self) -> Any:
        return codec.decode(self.payload_bytes)

    def to_bytes(self) -> bytes:
        return codec.encode(
            {
                "source_network_id": self.source_network_id,
                "payload_kind": self.payload_kind.value,
                "payload_bytes": self.payload_bytes,
                "payload_hash": self.payload_hash,
                "signatures": [[member, sig] for member, sig in self.signatures],
            }
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "AttestedPayload":
        """Parse wire bytes; any structural problem is a RelayError."""
        try:
            obj = codec.decode(data)
        except CodecError as exc:
            raise RelayError(f"undecodable attested payload: {exc}") from exc
        try:
            signatures = []
            for member, sig in obj["signatures"]:
                if not isinstance(member, str) or not isinstance(sig, bytes):
                    raise TypeError("signature entries are (str, bytes)")
                signatures.append((member, sig))
            fields = (obj["source_network_id"], obj["payload_bytes"], obj["payload_hash"])
            if not (isinstance(fields[0], str) and isinstance(fields[1], bytes) and isinstance(fields[2], bytes)):
                raise TypeError("wrong field types")
            if set(obj) != {"source_network_id", "payload_kind", "payload_bytes", "payload_hash", "signatures"}:
                raise KeyError("unexpected field set")
            return cls(fields[0], PayloadKind(obj["payload_kind"]), fields[1], fields[2], tuple(signatures))
        except (KeyError, TypeError, ValueError) as exc:
            raise RelayError(f"malformed attested payload: {exc}") from exc


@dataclass(frozen=True)
class TrustAnchor:
    network_id: str
    verify_keys: Mapping[str, bytes]
    quorum_threshold: int

    def __post_init__(self) -> None:
        if not 1 <= self.quorum_threshold <= len(self.verify_keys):
            raise RelayError(
                f"anchor {self.network_id}: threshold {self.quorum_threshold} "
                f"outside 1..{len(self.verify_keys)}"
            )

    @classmethod
    def from_identity(cls, identity: NetworkIdentity) -> "TrustAnchor":
        return cls(identity.network_id, identity.verify_keys(), identity.quorum_threshold)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "network_id": self.network_id,
            "quorum_threshold": self.quorum_threshold,
            "members": {m: key.hex() for m, key in sorted(self.verify_keys.items())},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TrustAnchor":
        try:
            return cls(
                data["network_id"],
                {m: bytes.fromhex(k) for m, k in data["members"].items()},
                int(data["quorum_threshold"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, RelayError):
                raise
            raise RelayError(f"malformed trust anchor: {exc}") from exc


def load_anchors(source: Union[str, Path, Sequence[Mapping[str, Any]]]) -> Dict[str, TrustAnchor]:
    """Anchors from a JSON file (list of anchor objects) or an already-parsed list."""
    if isinstance(source, (str, Path)):
        try:
            source = json.loads(Path(source).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise RelayError(f"cannot read anchor file: {exc}") from exc
    anchors = [TrustAnchor.from_dict(entry) for entry in source]  # type: ignore[union-attr]
    return {a.network_id: a for a in anchors}


def attest(
    source_network_id: str,
    payload_kind: PayloadKind,
    payload_bytes: bytes,
    signing_keys: Mapping[str, SigningKey],
) -> AttestedPayload:
    payload_hash = hashlib.sha256(payload_bytes).digest()
    message = attestation_message(payload_hash, payload_kind, source_network_id)
    signatures = tuple((member, sign(key, message)) for member, key in signing_keys.items())
    return AttestedPayload(source_network_id, payload_kind, payload_bytes, payload_hash, signatures)


def export_view(
    ledger: Ledger,
    signing_keys: Mapping[str, SigningKey],
    payload_kind: Union[PayloadKind, str],
    predicate: Optional[Callable[[Any], bool]] = None,
    signers: Optional[int] = None,
) -> AttestedPayload:
    """
    Attest the latest record of ``payload_kind`` matching ``predicate``.

    Parameters:
        ledger: Source (logistics) ledger.
        signing_keys: Private keys available for the ledger's members.
        payload_kind: Kind of record to export.
        predicate: Filter on the decoded payload.
        signers: Number of members that sign; defaults to the quorum threshold.

    Raises:
        RecordNotFoundError: nothing matches.
        QuorumError: fewer member keys than signers requested.
    """
    kind = PayloadKind(payload_kind)
    matches = ledger.query(kind, predicate)
    if not matches:
        raise RecordNotFoundError(f"no {kind.value} record on {ledger.network_id} matches the selector")
    record = matches[-1]

    count = ledger.identity.quorum_threshold if signers is None else signers
    chosen: Dict[str, SigningKey] = {}
    for member in ledger.identity.members:
        if len(chosen) == count:
            break
        if member.member_id in signing_keys:
            chosen[member.member_id] = signing_keys[member.member_id]
    if len(chosen) < count:
        raise QuorumError(f"only {len(chosen)} member keys available, {count} signatures requested")

    attested = attest(ledger.network_id, kind, record.payload_bytes, chosen)
    logger.info(
        "Exported %s #%d from %s signed by %s",
        kind.value, record.sequence_no, ledger.network_id, ", ".join(chosen),
    )
    return attested


def verify_attestation(attested: AttestedPayload, anchors: Mapping[str, TrustAnchor]) -> TrustAnchor:
    """
    Check hash and quorum; return the anchor that vouched for the payload.

    Raises:
        UnknownNetworkError, HashMismatchError, QuorumError.
    """
    anchor = anchors.get(attested.source_network_id)
    if anchor is None:
        raise UnknownNetworkError(f"unknown source network {attested.source_network_id!r}")
    actual_hash = hashlib.sha256(attested.payload_bytes).digest()
    if actual_hash != attested.payload_hash:
        raise HashMismatchError(
            f"payload hash mismatch: claimed {attested.payload_hash.hex()[:16]}, "
            f"computed {actual_hash.hex()[:16]}"
        )
    message = attestation_message(attested.payload_hash, attested.payload_kind, attested.source_network_id)
    valid = set()
    for member, signature in attested.signatures:
        key = anchor.verify_keys.get(member)
        if key is not None and member not in valid and verify(key, message, signature):
            valid.add(member)
    if len(valid) < anchor.quorum_threshold:
        raise QuorumError(
            f"{len(valid)} valid signatures from {attested.source_network_id}, "
            f"{anchor.quorum_threshold} required"
        )
    return anchor


def find_import(finance_ledger: Ledger, payload_hash: bytes) -> Optional[LedgerRecord]:
    for kind in IMPORT_KINDS.values():
        matches = finance_ledger.query(kind, lambda p: p["payload_hash"] == payload_hash)
        if matches:
            return matches[0]
    return None


def verify_and_import(
    finance_ledger: Ledger, attested: AttestedPayload, anchors: Mapping[str, TrustAnchor]
) -> LedgerRecord:
    """
    Verify an attested payload and append it to the finance ledger.

    Returns:
        The ImportedInvoice / ImportedRegistry record; the existing one when
        the same payload was imported before.

    Raises:
        UnknownNetworkError, HashMismatchError, QuorumError, RelayError.
    """
    try:
        verify_attestation(attested, anchors)
    except RelayError as exc:
        logger.warning("Rejected import from %s: %s", attested.source_network_id, exc)
        raise
    import_kind = IMPORT_KINDS.get(attested.payload_kind)
    if import_kind is None:
        raise RelayError(f"{attested.payload_kind.value} records cannot be imported")

    existing = find_import(finance_ledger, attested.payload_hash)
    if existing is not None:
        logger.info("Payload %s already imported as #%d", attested.payload_hash.hex()[:16], existing.sequence_no)
        return existing
    try:
        attested.payload()
    except CodecError as exc:
        raise RelayError(f"attested payload does not decode: {exc}") from exc

    record = finance_ledger.append(
        import_kind,
        {
            "source_network_id": attested.source_network_id,
            "payload_kind": attested.payload_kind.value,
            "payload_hash": attested.payload_hash,
            "payload_bytes": attested.payload_bytes,
        },
    )
    logger.info(
        "Imported %s from %s as %s #%d",
        attested.payload_kind.value, attested.source_network_id, import_kind.value, record.sequence_no,
    )
    return record


def imported_payload(record: LedgerRecord) -> Any:
    """Decoded original payload of an Imported* record."""
    return codec.decode(record.payload()["payload_bytes"])


def frame(message: bytes) -> bytes:
    if len(message) > MAX_FRAME_BYTES:
        raise RelayError(f"frame of {len(message)} bytes exceeds {MAX_FRAME_BYTES}")
    return struct.pack(">I", len(message)) + message


def _recv_exact(sock: socket.socket, size: int) -> bytes:
    chunks: List[bytes] = []
    remaining = size
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            raise RelayError("connection closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> bytes:
    (length,) = struct.unpack(">I", _recv_exact(sock, 4))
    if length > MAX_FRAME_BYTES:
        raise RelayError(f"announced frame of {length} bytes exceeds {MAX_FRAME_BYTES}")
    return _recv_exact(sock, length)


class RelayEndpoint:
    """Finance-side receiver: one framed AttestedPayload in, one framed status out."""

    def __init__(self, finance_ledger: Ledger, anchors: Mapping[str, TrustAnchor]) -> None:
        self.finance_ledger = finance_ledger
        self.anchors = anchors

    def handle(self, message: bytes) -> Dict[str, Any]:
        try:
            record = verify_and_import(self.finance_ledger, AttestedPayload.from_bytes(message), self.anchors)
        except RelayError as exc:
            return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}
        return {"ok": True, "sequence_no": record.sequence_no, "kind": record.payload_kind.value}

    def serve_once(self, sock: socket.socket) -> Dict[str, Any]:
        response = self.handle(read_frame(sock))
        sock.sendall(frame(codec.encode(response)))
        return response


def send_attested(sock: socket.socket, attested: AttestedPayload) -> Dict[str, Any]:
    """Send one payload and wait for the endpoint's status reply."""
    sock.sendall(frame(attested.to_bytes()))
    return codec.decode(read_frame(sock))


def _serve(endpoint: RelayEndpoint, sock: socket.socket) -> Dict[str, Any]:
    try:
        return endpoint.serve_once(sock)
    except BaseException:
        # unblock the client side
        sock.shutdown(socket.SHUT_RDWR)
        raise


def exchange_over_socketpair(endpoint: RelayEndpoint, wire_bytes: bytes) -> Dict[str, Any]:
    """
    One request/response round over a local socket pair.

    The endpoint serves on a worker thread, so frames larger than the socket
    buffer are read while they are written.
    """
    request = frame(wire_bytes)
    client, server = socket.socketpair()
    try:
        with ThreadPoolExecutor(max_workers=1, thread_name_prefix="relay-endpoint") as pool:
            served = pool.submit(_serve, endpoint, server)
            try:
                client.sendall(request)
                reply = codec.decode(read_frame(client))
            except BaseException:
                client.shutdown(socket.SHUT_RDWR)
                raise
            served.result()
        return reply
    finally:
        client.close()
        server.close()
