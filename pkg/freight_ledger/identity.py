"""Network identities and member signing keys.

Members sign with Ed25519 (PyNaCl). Ed25519 signatures are deterministic, so a
replayed scenario produces byte-identical attestations. Keys are derived from a
scenario seed; they stand in for real key management.
"""

import hashlib
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Tuple

from nacl.exceptions import BadSignatureError
from nacl.signing import SigningKey, VerifyKey

from freight_ledger.errors import ContractError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Member:
    member_id: str
    verify_key: bytes


@dataclass(frozen=True)
class NetworkIdentity:
    network_id: str
    members: Tuple[Member, ...]
    quorum_threshold: int

    def __post_init__(self) -> None:
        if not self.network_id:
            raise ContractError("network_id must be nonempty")
        ids = [m.member_id for m in self.members]
        if len(set(ids)) != len(ids):
            raise ContractError(f"duplicate member ids in network {self.network_id}")
        count = len(self.members)
        if self.quorum_threshold < 1 or self.quorum_threshold > count:
            raise ContractError(
                f"quorum_threshold {self.quorum_threshold} outside 1..{count}"
            )
        # strict majority: ceil((n + 1) / 2)
        if self.quorum_threshold < count // 2 + 1:
            raise ContractError(
                f"quorum_threshold {self.quorum_threshold} is not a strict majority of {count}"
            )

    def verify_keys(self) -> Dict[str, bytes]:
        return {m.member_id: m.verify_key for m in self.members}


def derive_signing_key(network_id: str, member_id: str, seed: int) -> SigningKey:
    """Deterministic Ed25519 key for ``member_id`` of ``network_id``."""
    material = hashlib.sha256(f"freightledger:{seed}:{network_id}:{member_id}".encode("utf-8"))
    return SigningKey(material.digest())


def build_network(
    network_id: str,
    member_ids: Iterable[str],
    quorum_threshold: int,
    seed: int,
) -> Tuple[NetworkIdentity, Dict[str, SigningKey]]:
    """
    Create a network identity together with the private keys of its members.

    Parameters:
        network_id: Network name, e.g. "STL".
        member_ids: Members in the order they are listed in the identity.
        quorum_threshold: Signatures required for an attestation.
        seed: Scenario seed the keys are derived from.

    Returns:
        (identity, signing keys by member id)
    """
    keys: Dict[str, SigningKey] = {}
    members: List[Member] = []
    for member_id in member_ids:
        key = derive_signing_key(network_id, member_id, seed)
        keys[member_id] = key
        members.append(Member(member_id, bytes(key.verify_key)))
    identity = NetworkIdentity(network_id, tuple(members), quorum_threshold)
    logger.debug("Built network %s with %d members", network_id, len(members))
    return identity, keys


def sign(key: SigningKey, message: bytes) -> bytes:
    """Detached 64-byte signature over ``message``."""
    return bytes(key.sign(message).signature)


def verify(verify_key: bytes, message: bytes, signature: bytes) -> bool:
    try:
        VerifyKey(verify_key).verify(message, signature)
    except (BadSignatureError, ValueError, TypeError):
        return False
    return True


def identity_from_keys(
    network_id: str, verify_keys: Mapping[str, bytes], quorum_threshold: int
) -> NetworkIdentity:
    members = tuple(Member(mid, key) for mid, key in verify_keys.items())
    return NetworkIdentity(network_id, members, quorum_threshold)
