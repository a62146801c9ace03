# freight_ledger/features.py

"""
Sequence features for the dwell-time classifier.

One FeatureVector per vessel milestone of the journey so far. Each vector is
computed from what was known when that milestone's Actual event was emitted,
so the sequence at a later milestone extends the earlier one unchanged.

Per-step features:
- origin / destination one-hot of the current leg over the lane's ports
- event type: 0 departure, 1 arrival
- planned voyage time (departures) or planned dwell time (arrivals)
- estimated delay in final arrival
- estimated delay at the next port (actual arrival delay for arrivals)
- vessel characteristics: age, length, tonnage, capacity
- port operations: berths, expected vessels, vessels in port
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from freight_ledger.contracts import ShippingLane
from freight_ledger.errors import FeatureError
from freight_ledger.events import EventStatus, Milestone, MilestoneKind, Timeline
from freight_ledger.fusion import estimate_event_time

logger = logging.getLogger(__name__)

VESSEL_FIELDS = ("age", "length", "tonnage", "capacity")
PORT_OPS_FIELDS = ("berths", "expected_vessels", "vessels_in_port")


@dataclass(frozen=True)
class ShipmentContext:
    """Vessel and port-operations side data for one shipment."""

    vessel: Tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    port_ops: Mapping[str, Tuple[float, ...]] = field(default_factory=dict)

    def ops_at(self, port_code: str) -> Tuple[float, ...]:
        return tuple(self.port_ops.get(port_code, (0.0,) * len(PORT_OPS_FIELDS)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "vessel": dict(zip(VESSEL_FIELDS, map(float, self.vessel))),
            "port_ops": {
                code: dict(zip(PORT_OPS_FIELDS, map(float, ops)))
                for code, ops in sorted(self.port_ops.items())
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ShipmentContext":
        vessel = data.get("vessel", {})
        ops = data.get("port_ops", {})
        return cls(
            vessel=tuple(float(vessel.get(name, 0.0)) for name in VESSEL_FIELDS),
            port_ops={
                code: tuple(float(values.get(name, 0.0)) for name in PORT_OPS_FIELDS)
                for code, values in ops.items()
            },
        )


@dataclass(frozen=True)
class FeatureVector:
    origin_port_onehot: Tuple[float, ...]
    destination_port_onehot: Tuple[float, ...]
    event_type: int
    planned_voyage_or_dwell_hours: float
    estimated_delay_final_arrival_hours: float
    estimated_delay_next_port_hours: float
    vessel_features: Tuple[float, ...]
    port_ops_features: Tuple[float, ...]

    def __post_init__(self) -> None:
        if sum(self.origin_port_onehot) != 1 or sum(self.destination_port_onehot) != 1:
            raise FeatureError("port one-hot encodings must sum to 1")
        if self.event_type not in (0, 1):
            raise FeatureError("event_type must be 0 (departure) or 1 (arrival)")

    def to_array(self) -> np.ndarray:
        values = np.array(
            [
                *self.origin_port_onehot,
                *self.destination_port_onehot,
                float(self.event_type),
                self.planned_voyage_or_dwell_hours,
                self.estimated_delay_final_arrival_hours,
                self.estimated_delay_next_port_hours,
                *self.vessel_features,
                *self.port_ops_features,
            ],
            dtype=np.float64,
        )
        if not np.all(np.isfinite(values)):
            raise FeatureError("feature values must be finite")
        return values


def feature_dim(lane: ShippingLane) -> int:
    return 2 * len(lane.ports) + 4 + len(VESSEL_FIELDS) + len(PORT_OPS_FIELDS)


def _onehot(lane: ShippingLane, port_code: str) -> Tuple[float, ...]:
    vec = [0.0] * len(lane.ports)
    vec[lane.index(port_code)] = 1.0
    return tuple(vec)


class _Schedule:
    """Planned and best-known times for one shipment, as of one instant."""

    def __init__(
        self,
        timeline: Timeline,
        shipment_id: str,
        as_of: float,
        slip: float,
        source_weights: Optional[Mapping[str, float]],
    ) -> None:
        self.timeline = timeline
        self.shipment_id = shipment_id
        self.as_of = as_of
        self.slip = slip
        self.source_weights = source_weights

    def planned(self, milestone: Milestone) -> float:
        event = self.timeline.effective_event(
            self.shipment_id, milestone, EventStatus.PLANNED, self.as_of
        )
        if event is None:
            raise FeatureError(f"{self.shipment_id}: no planned time for {milestone}")
        return event.occurrence_time

    def known(self, milestone: Milestone) -> float:
        """Actual time if observed, else the fused estimate, else planned time shifted by the current slip."""
        actual = self.timeline.actual(self.shipment_id, milestone, self.as_of)
        if actual is not None:
            return actual.occurrence_time
        fallback = self.planned(milestone) + self.slip
        estimate = estimate_event_time(
            self.timeline, self.shipment_id, milestone, self.source_weights, fallback, self.as_of
        )
        return fallback if estimate is None else estimate

    def delay(self, milestone: Milestone) -> float:
        return self.known(milestone) - self.planned(milestone)


def extract_features(
    timeline: Timeline,
    lane: ShippingLane,
    shipment_id: str,
    at_milestone: Milestone,
    context: Optional[ShipmentContext] = None,
    source_weights: Optional[Mapping[str, float]] = None,
) -> List[FeatureVector]:
    """
    Feature sequence of a shipment's journey up to ``at_milestone``.

    Parameters:
        timeline: Events of the shipment (Planned, Estimated, Actual).
        lane: Lane the shipment travels; defines the port vocabulary.
        shipment_id: Shipment to describe.
        at_milestone: Vessel departure or arrival that has already occurred.
        context: Vessel and port-operations data; zeros when absent.
        source_weights: Weights for fusing multi-source estimates.

    Returns:
        FeatureVectors in chronological order, one per journey milestone.

    Raises:
        FeatureError: milestone not on the lane, or not yet Actual.
    """
    context = context or ShipmentContext()
    journey = lane.journey()
    if at_milestone not in journey:
        raise FeatureError(f"{at_milestone} is not a vessel milestone of lane {lane.lane_id}")
    final_arrival = journey[-1]
    target = timeline.actual(shipment_id, at_milestone)
    if target is None:
        raise FeatureError(f"{shipment_id}: {at_milestone} has not occurred")

    codes = lane.port_codes
    vectors: List[FeatureVector] = []
    for step in journey[: journey.index(at_milestone) + 1]:
        actual = timeline.actual(shipment_id, step)
        as_of = actual.emitted_at if actual is not None else target.emitted_at
        schedule = _Schedule(timeline, shipment_id, as_of, 0.0, source_weights)
        slip = schedule.delay(step) if actual is not None else 0.0
        schedule = _Schedule(timeline, shipment_id, as_of, slip, source_weights)

        i = lane.index(step.port)
        if step.kind is MilestoneKind.VESSEL_DEPARTURE:
            leg = (codes[i], codes[i + 1])
            next_arrival = Milestone.arrival(codes[i + 1])
            planned_span = schedule.planned(next_arrival) - schedule.planned(step)
            next_delay = schedule.delay(next_arrival)
            ops = context.ops_at(codes[i + 1])
            event_type = 0
        else:
            leg = (codes[i - 1], codes[i])
            if i == len(codes) - 1:
                planned_span = 0.0
            else:
                planned_span = schedule.planned(Milestone.departure(codes[i])) - schedule.planned(step)
            next_delay = schedule.delay(step)
            ops = context.ops_at(codes[i])
            event_type = 1

        vectors.append(
            FeatureVector(
                origin_port_onehot=_onehot(lane, leg[0]),
                destination_port_onehot=_onehot(lane, leg[1]),
                event_type=event_type,
                planned_voyage_or_dwell_hours=float(planned_span),
                estimated_delay_final_arrival_hours=float(schedule.delay(final_arrival)),
                estimated_delay_next_port_hours=float(next_delay),
                vessel_features=tuple(float(v) for v in context.vessel),
                port_ops_features=tuple(float(v) for v in ops),
            )
        )
    return vectors


def feature_matrix(vectors: Sequence[FeatureVector]) -> np.ndarray:
    """Stack a feature sequence into a (T, D) array."""
    if not vectors:
        raise FeatureError("empty feature sequence")
    return np.stack([v.to_array() for v in vectors])


def training_sequences(
    timeline: Timeline,
    lane: ShippingLane,
    at_milestone: Milestone,
    labels: Mapping[str, int],
    contexts: Optional[Mapping[str, ShipmentContext]] = None,
    source_weights: Optional[Mapping[str, float]] = None,
) -> List[Tuple[np.ndarray, int]]:
    """(sequence, label) pairs for every labelled shipment that has reached ``at_milestone``."""
    contexts = contexts or {}
    dataset: List[Tuple[np.ndarray, int]] = []
    skipped = 0
    for shipment_id in sorted(labels):
        if timeline.actual(shipment_id, at_milestone) is None:
            skipped += 1
            continue
        vectors = extract_features(
            timeline, lane, shipment_id, at_milestone, contexts.get(shipment_id), source_weights
        )
        dataset.append((feature_matrix(vectors), int(labels[shipment_id])))
    if skipped:
        logger.warning("%d shipments never reached %s and were skipped", skipped, at_milestone)
    return dataset
