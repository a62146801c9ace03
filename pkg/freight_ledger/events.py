# freight_ledger/events.py

"""
Milestone events and the per-shipment timeline.

Included:
- Milestone / MilestoneKind / EventStatus: what happened, and how sure we are
- MilestoneEvent: one (shipment, milestone, status, source, time) observation
- Timeline: event store with latest-event-wins reads and a full audit history
- dwell_time / dwell_reading: time between arrival at and departure from a port

Times are hours since the scenario epoch.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Tuple

from freight_ledger.errors import EventConflictError, EventDataError

logger = logging.getLogger(__name__)

CARRIER = "carrier"
DRAYAGE_PROVIDER = "drayage-provider"
PORT_AUTHORITY = "port-authority"
ORIGIN_CARGO_MANAGEMENT = "origin-cargo-management"
AI_SERVICE = "ai-service"


class MilestoneKind(str, Enum):
    CONTAINER_LOADED = "ContainerLoadedOnVessel"
    VESSEL_DEPARTURE = "VesselDeparture"
    VESSEL_ARRIVAL = "VesselArrival"
    CONTAINER_DISCHARGE = "ContainerDischarge"
    DELIVERY_COMPLETE = "DeliveryComplete"


_PORTED = (MilestoneKind.VESSEL_DEPARTURE, MilestoneKind.VESSEL_ARRIVAL)


class EventStatus(str, Enum):
    PLANNED = "Planned"
    ESTIMATED = "Estimated"
    ACTUAL = "Actual"


# most trusted first
STATUS_PREFERENCE = (EventStatus.ACTUAL, EventStatus.ESTIMATED, EventStatus.PLANNED)


@dataclass(frozen=True)
class Milestone:
    kind: MilestoneKind
    port: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", MilestoneKind(self.kind))
        if self.kind in _PORTED and not self.port:
            raise EventDataError(f"{self.kind.value} requires a port")
        if self.kind not in _PORTED and self.port is not None:
            raise EventDataError(f"{self.kind.value} does not take a port")

    @property
    def key(self) -> str:
        return f"{self.kind.value}@{self.port}" if self.port else self.kind.value

    @classmethod
    def parse(cls, key: str) -> "Milestone":
        kind, _, port = key.partition("@")
        try:
            return cls(MilestoneKind(kind), port or None)
        except ValueError as exc:
            raise EventDataError(f"unknown milestone {key!r}") from exc

    @classmethod
    def departure(cls, port: str) -> "Milestone":
        return cls(MilestoneKind.VESSEL_DEPARTURE, port)

    @classmethod
    def arrival(cls, port: str) -> "Milestone":
        return cls(MilestoneKind.VESSEL_ARRIVAL, port)

    def __str__(self) -> str:
        return self.key


@dataclass(frozen=True)
class MilestoneEvent:
    shipment_id: str
    milestone: Milestone
    status: EventStatus
    source: str
    occurrence_time: float
    emitted_at: float
    emission_seq: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "status", EventStatus(self.status))
        if not self.shipment_id:
            raise EventDataError("shipment_id must be nonempty")
        if not self.source:
            raise EventDataError("source must be nonempty")
        for name in ("occurrence_time", "emitted_at"):
            if not math.isfinite(getattr(self, name)):
                raise EventDataError(f"{name} must be finite")

    def to_payload(self) -> Dict[str, Any]:
        return {
            "shipment_id": self.shipment_id,
            "milestone": self.milestone.key,
            "status": self.status.value,
            "source": self.source,
            "occurrence_time": float(self.occurrence_time),
            "emitted_at": float(self.emitted_at),
            "emission_seq": self.emission_seq,
        }

    @classmethod
    def from_payload(cls, payload: Dict[str, Any]) -> "MilestoneEvent":
        return cls(
            shipment_id=payload["shipment_id"],
            milestone=Milestone.parse(payload["milestone"]),
            status=EventStatus(payload["status"]),
            source=payload["source"],
            occurrence_time=float(payload["occurrence_time"]),
            emitted_at=float(payload["emitted_at"]),
            emission_seq=payload.get("emission_seq"),
        )


_Key = Tuple[str, Milestone, EventStatus]


class Timeline:
    """
    Store of milestone emissions.

    For a (shipment, milestone, status, source) key the emission with the
    highest emission_seq is effective; superseded emissions stay in
    ``history`` for audit.
    """

    def __init__(self) -> None:
        self._history: List[MilestoneEvent] = []
        self._by_key: Dict[_Key, Dict[str, List[MilestoneEvent]]] = {}
        self._actuals: Dict[Tuple[str, Milestone], MilestoneEvent] = {}
        self._next_seq = 0

    def __len__(self) -> int:
        return len(self._history)

    def record_event(self, event: MilestoneEvent, now: Optional[float] = None) -> MilestoneEvent:
        """
        Store ``event`` and stamp it with the next emission_seq.

        Parameters:
            event: The emission to store.
            now: Current scenario clock; emissions from the future are rejected.

        Returns:
            The stored (stamped) event.

        Raises:
            EventDataError: emitted after ``now``.
            EventConflictError: a second Actual for the same shipment milestone.
        """
        if now is not None and event.emitted_at > now:
            raise EventDataError(
                f"event for {event.shipment_id} {event.milestone} emitted at {event.emitted_at} "
                f"is after the clock {now}"
            )
        if event.status is EventStatus.ACTUAL:
            existing = self._actuals.get((event.shipment_id, event.milestone))
            if existing is not None:
                raise EventConflictError(
                    f"Actual {event.milestone} for {event.shipment_id} already reported "
                    f"by {existing.source}"
                )
        stamped = replace(event, emission_seq=self._next_seq)
        self._next_seq += 1
        self._history.append(stamped)
        key = (stamped.shipment_id, stamped.milestone, stamped.status)
        self._by_key.setdefault(key, {}).setdefault(stamped.source, []).append(stamped)
        if stamped.status is EventStatus.ACTUAL:
            self._actuals[(stamped.shipment_id, stamped.milestone)] = stamped
        return stamped

    def record_all(self, events: Iterable[MilestoneEvent]) -> None:
        for event in events:
            self.record_event(event)

    def history(self, shipment_id: Optional[str] = None) -> List[MilestoneEvent]:
        """All emissions, superseded ones included, in emission order."""
        if shipment_id is None:
            return list(self._history)
        return [e for e in self._history if e.shipment_id == shipment_id]

    def shipments(self) -> List[str]:
        return sorted({e.shipment_id for e in self._history})

    def effective_by_source(
        self,
        shipment_id: str,
        milestone: Milestone,
        status: EventStatus,
        as_of: Optional[float] = None,
    ) -> Dict[str, MilestoneEvent]:
        """Latest emission per source for one (shipment, milestone, status)."""
        result: Dict[str, MilestoneEvent] = {}
        for source, emissions in self._by_key.get((shipment_id, milestone, status), {}).items():
            if as_of is None:
                result[source] = emissions[-1]
                continue
            visible = [e for e in emissions if e.emitted_at <= as_of]
            if visible:
                result[source] = visible[-1]
        return result

    def effective_event(
        self,
        shipment_id: str,
        milestone: Milestone,
        status: EventStatus,
        as_of: Optional[float] = None,
    ) -> Optional[MilestoneEvent]:
        """Most recently emitted effective event across sources."""
        candidates = self.effective_by_source(shipment_id, milestone, status, as_of)
        if not candidates:
            return None
        return max(candidates.values(), key=lambda e: e.emission_seq)

    def actual(
        self, shipment_id: str, milestone: Milestone, as_of: Optional[float] = None
    ) -> Optional[MilestoneEvent]:
        event = self._actuals.get((shipment_id, milestone))
        if event is None or (as_of is not None and event.emitted_at > as_of):
            return None
        return event

    def best_event(
        self, shipment_id: str, milestone: Milestone, as_of: Optional[float] = None
    ) -> Optional[MilestoneEvent]:
        """Effective event of the most trusted status available."""
        for status in STATUS_PREFERENCE:
            event = self.effective_event(shipment_id, milestone, status, as_of)
            if event is not None:
                return event
        return None

    def effective_events(self, shipment_id: Optional[str] = None) -> List[MilestoneEvent]:
        """Every effective emission, ordered by emission_seq."""
        latest = [
            emissions[-1]
            for key, by_source in self._by_key.items()
            if shipment_id is None or key[0] == shipment_id
            for emissions in by_source.values()
        ]
        return sorted(latest, key=lambda e: e.emission_seq)


@dataclass(frozen=True)
class DwellReading:
    hours: float
    status: Optional[EventStatus]
    confidence: float
    explanation: str


def dwell_reading(
    timeline: Timeline,
    shipment_id: str,
    port: str,
    status: Optional[EventStatus] = None,
    as_of: Optional[float] = None,
) -> Optional[DwellReading]:
    """
    Dwell time at ``port`` with the status it was measured from.

    Both endpoints use the same status, preferring Actual, then Estimated, then
    Planned. Only when no status is shared are the best endpoints mixed, with
    confidence 0.5. With ``status`` given, only that status is considered.

    Raises:
        EventDataError: departure before arrival.
    """
    arrival_m, departure_m = Milestone.arrival(port), Milestone.departure(port)
    statuses = (status,) if status is not None else STATUS_PREFERENCE
    for st in statuses:
        arrival = timeline.effective_event(shipment_id, arrival_m, st, as_of)
        departure = timeline.effective_event(shipment_id, departure_m, st, as_of)
        if arrival is not None and departure is not None:
            return _reading(shipment_id, port, arrival, departure, st, 1.0)
    if status is not None:
        return None
    arrival = timeline.best_event(shipment_id, arrival_m, as_of)
    departure = timeline.best_event(shipment_id, departure_m, as_of)
    if arrival is None or departure is None:
        return None
    return _reading(shipment_id, port, arrival, departure, None, 0.5)


def _reading(
    shipment_id: str,
    port: str,
    arrival: MilestoneEvent,
    departure: MilestoneEvent,
    status: Optional[EventStatus],
    confidence: float,
) -> DwellReading:
    hours = departure.occurrence_time - arrival.occurrence_time
    if hours < 0:
        raise EventDataError(
            f"{shipment_id}: departure from {port} at {departure.occurrence_time}h "
            f"precedes arrival at {arrival.occurrence_time}h"
        )
    if status is None:
        basis = f"mixed {arrival.status.value}/{departure.status.value}, confidence 0.5"
    else:
        basis = status.value
    return DwellReading(hours, status, confidence, f"dwell {hours:g}h at {port} ({basis})")


def dwell_time(
    timeline: Timeline,
    shipment_id: str,
    port: str,
    status: Optional[EventStatus] = None,
    as_of: Optional[float] = None,
) -> Optional[float]:
    """Dwell hours at ``port`` or None when an endpoint is missing."""
    reading = dwell_reading(timeline, shipment_id, port, status, as_of)
    return None if reading is None else reading.hours
