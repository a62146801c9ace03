"""Exception hierarchy shared by the ledgers, contracts, relay and simulator."""

from typing import Optional


class FreightLedgerError(Exception):
    """Root of all domain errors raised by this package."""


class CodecError(FreightLedgerError, ValueError):
    """A value cannot be canonically encoded, or bytes cannot be decoded."""


class LedgerError(FreightLedgerError):
    """Base class for ledger-level failures."""


class ChainIntegrityError(LedgerError):
    """A record breaks the hash chain."""

    def __init__(self, sequence_no: int, reason: str) -> None:
        super().__init__(f"chain broken at sequence_no {sequence_no}: {reason}")
        self.sequence_no = sequence_no
        self.reason = reason


class SnapshotFormatError(LedgerError, ValueError):
    """Snapshot bytes do not follow the FLGR layout."""

    def __init__(self, message: str, sequence_no: Optional[int] = None) -> None:
        where = f" (record {sequence_no})" if sequence_no is not None else ""
        super().__init__(f"{message}{where}")
        self.sequence_no = sequence_no


class EventConflictError(FreightLedgerError):
    """A second Actual event was reported for the same shipment milestone."""


class EventDataError(FreightLedgerError, ValueError):
    """Event data is inconsistent (e.g. departure before arrival)."""


class ContractError(FreightLedgerError, ValueError):
    """Lane, port, charge or contract definition is invalid."""


class UnknownChargeError(ContractError):
    """A prediction or rule references a charge the contract does not define."""


class FeatureError(FreightLedgerError, ValueError):
    """Features cannot be extracted for the requested milestone."""


class ModelError(FreightLedgerError, ValueError):
    """Model input, training data or model file is unusable."""


class MetricError(FreightLedgerError, ValueError):
    """A metric is undefined for the given labels."""


class RelayError(FreightLedgerError):
    """Attested payload was rejected."""


class UnknownNetworkError(RelayError):
    pass


class HashMismatchError(RelayError):
    pass


class QuorumError(RelayError):
    pass


class RecordNotFoundError(RelayError):
    pass


class FinanceError(FreightLedgerError):
    """Factoring workflow precondition violated."""


class NotFinalError(FinanceError):
    pass


class NotSettledError(FinanceError):
    pass


class ScenarioError(FreightLedgerError, ValueError):
    """Scenario file is malformed or references unknown ids."""
