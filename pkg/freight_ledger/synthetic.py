# freight_ledger/synthetic.py

"""
Seeded synthetic shipment generator for training the dwell classifiers.

Every shipment gets a Planned schedule, Actual events as the journey unfolds
and Estimated arrival times from the carrier and the port authority after each
departure. The dwell time at the target port follows a planted rule:

    dwell = dwell_base_hours
            + congestion_coef * (vessels_in_port - congestion midpoint)
            + arrival_delay_coef * actual arrival delay at the target port
            + noise

so it is learnable from the port-operations feature (visible from the
departure towards the target port on) and from the arrival delay (visible
once the vessel arrives).
"""

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from freight_ledger.contracts import ShippingLane
from freight_ledger.errors import ScenarioError
from freight_ledger.events import (
    CARRIER,
    PORT_AUTHORITY,
    EventStatus,
    Milestone,
    MilestoneEvent,
    MilestoneKind,
    Timeline,
    dwell_time,
)
from freight_ledger.features import ShipmentContext

logger = logging.getLogger(__name__)

LOAD_LEAD_HOURS = 12.0
DISCHARGE_HOURS = 6.0
DELIVERY_HOURS = 48.0


@dataclass(frozen=True)
class SyntheticDataSpec:
    lane: ShippingLane
    shipments: int = 1000
    seed: int = 0
    target_port: Optional[str] = None
    spacing_hours: float = 6.0
    planned_voyage_hours: float = 240.0
    planned_dwell_hours: float = 36.0
    departure_delay_sd: float = 8.0
    voyage_delay_sd: float = 12.0
    estimate_noise_sd: float = 6.0
    congestion_range: Tuple[float, float] = (5.0, 25.0)
    dwell_base_hours: float = 24.0
    congestion_coef: float = 3.0
    arrival_delay_coef: float = 0.5
    noise_sd: float = 6.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "congestion_range", tuple(self.congestion_range))
        if self.shipments < 0:
            raise ScenarioError("shipments must be >= 0")
        for name in ("departure_delay_sd", "voyage_delay_sd", "estimate_noise_sd", "noise_sd"):
            if getattr(self, name) < 0:
                raise ScenarioError(f"{name} must be >= 0")
        for name in ("spacing_hours", "planned_voyage_hours", "planned_dwell_hours", "dwell_base_hours"):
            if getattr(self, name) <= 0:
                raise ScenarioError(f"{name} must be > 0")
        low, high = self.congestion_range
        if not 0 <= low < high:
            raise ScenarioError("congestion_range must satisfy 0 <= low < high")
        if not self.lane.transshipments:
            raise ScenarioError(f"lane {self.lane.lane_id} has no transshipment port to dwell at")
        transshipments = [p.port_code for p in self.lane.transshipments]
        if self.target_port is not None and self.target_port not in transshipments:
            raise ScenarioError(f"target port {self.target_port} is not a transshipment of {self.lane.lane_id}")

    @property
    def target(self) -> str:
        """Dwell target: the given port, else the last transshipment."""
        return self.target_port or self.lane.transshipments[-1].port_code

    def to_dict(self) -> Dict[str, Any]:
        data = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        data["lane"] = self.lane.to_dict()
        data["congestion_range"] = list(self.congestion_range)
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SyntheticDataSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ScenarioError(f"unknown synthetic spec fields: {unknown}")
        if "lane" not in data:
            raise ScenarioError("synthetic spec needs a lane")
        values = dict(data)
        values["lane"] = ShippingLane.from_dict(data["lane"])
        return cls(**values)


@dataclass
class SyntheticDataset:
    spec: SyntheticDataSpec
    events: List[MilestoneEvent]
    timeline: Timeline
    contexts: Dict[str, ShipmentContext]
    dwell_hours: Dict[str, float] = field(default_factory=dict)

    def labels(self, threshold_hours: int) -> Dict[str, int]:
        return {sid: int(hours > threshold_hours) for sid, hours in self.dwell_hours.items()}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "spec": self.spec.to_dict(),
            "events": [e.to_payload() for e in self.events],
            "contexts": {sid: ctx.to_dict() for sid, ctx in sorted(self.contexts.items())},
            "dwell_hours": dict(sorted(self.dwell_hours.items())),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SyntheticDataset":
        spec = SyntheticDataSpec.from_dict(data["spec"])
        events = [MilestoneEvent.from_payload(p) for p in data["events"]]
        timeline = Timeline()
        stamped = [timeline.record_event(e) for e in events]
        return cls(
            spec=spec,
            events=stamped,
            timeline=timeline,
            contexts={sid: ShipmentContext.from_dict(c) for sid, c in data["contexts"].items()},
            dwell_hours={sid: float(h) for sid, h in data["dwell_hours"].items()},
        )


def save_dataset(dataset: SyntheticDataset, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(dataset.to_dict(), sort_keys=True), encoding="utf-8")


def load_dataset(path: Union[str, Path]) -> SyntheticDataset:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read dataset {path}: {exc}") from exc
    try:
        return SyntheticDataset.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"malformed dataset {path}: {exc}") from exc


def _event(
    shipment_id: str, milestone: Milestone, status: EventStatus, source: str, occurs: float, emitted: float
) -> MilestoneEvent:
    return MilestoneEvent(shipment_id, milestone, status, source, float(occurs), float(emitted))


def _shipment(
    spec: SyntheticDataSpec, rng: np.random.Generator, index: int
) -> Tuple[List[MilestoneEvent], ShipmentContext]:
    shipment_id = f"SYN-{index:05d}"
    codes = spec.lane.port_codes
    low, high = spec.congestion_range
    midpoint = (low + high) / 2

    vessel = (
        float(rng.uniform(2, 25)),
        float(rng.uniform(180, 400)),
        float(rng.uniform(30_000, 200_000)),
        float(rng.uniform(2_000, 20_000)),
    )
    port_ops: Dict[str, Tuple[float, ...]] = {}
    for code in codes:
        congestion = float(rng.uniform(low, high))
        port_ops[code] = (
            float(rng.integers(4, 13)),
            congestion + float(rng.normal(0.0, 2.0)),
            congestion,
        )

    t0 = index * spec.spacing_hours
    loaded = Milestone(MilestoneKind.CONTAINER_LOADED)
    discharge = Milestone(MilestoneKind.CONTAINER_DISCHARGE)
    delivery = Milestone(MilestoneKind.DELIVERY_COMPLETE)

    # planned schedule
    planned: Dict[Milestone, float] = {loaded: t0 + LOAD_LEAD_HOURS}
    clock = t0 + 2 * LOAD_LEAD_HOURS
    planned[Milestone.departure(codes[0])] = clock
    for code in codes[1:]:
        clock += spec.planned_voyage_hours
        planned[Milestone.arrival(code)] = clock
        if code != codes[-1]:
            clock += spec.planned_dwell_hours
            planned[Milestone.departure(code)] = clock
    planned[discharge] = clock + DISCHARGE_HOURS
    planned[delivery] = clock + DELIVERY_HOURS

    events = [_event(shipment_id, m, EventStatus.PLANNED, CARRIER, t, t0) for m, t in planned.items()]

    actual: Dict[Milestone, float] = {loaded: planned[loaded]}
    slip = max(float(rng.normal(0.0, spec.departure_delay_sd)), -LOAD_LEAD_HOURS + 1)
    departed = planned[Milestone.departure(codes[0])] + slip
    actual[Milestone.departure(codes[0])] = departed
    for i, code in enumerate(codes[1:], start=1):
        arrival_m = Milestone.arrival(code)
        voyage = max(spec.planned_voyage_hours + float(rng.normal(0.0, spec.voyage_delay_sd)), 0.2 * spec.planned_voyage_hours)
        arrived = departed + voyage
        for source in (CARRIER, PORT_AUTHORITY):
            estimate = arrived + float(rng.normal(0.0, spec.estimate_noise_sd))
            events.append(_event(shipment_id, arrival_m, EventStatus.ESTIMATED, source, estimate, departed))
        actual[arrival_m] = arrived
        if code == codes[-1]:
            break
        if code == spec.target:
            dwell = (
                spec.dwell_base_hours
                + spec.congestion_coef * (port_ops[code][2] - midpoint)
                + spec.arrival_delay_coef * (arrived - planned[arrival_m])
                + float(rng.normal(0.0, spec.noise_sd))
            )
        else:
            dwell = spec.planned_dwell_hours + float(rng.normal(0.0, spec.noise_sd))
        departed = arrived + max(dwell, 1.0)
        actual[Milestone.departure(codes[i])] = departed
    actual[discharge] = actual[Milestone.arrival(codes[-1])] + DISCHARGE_HOURS
    actual[delivery] = actual[Milestone.arrival(codes[-1])] + DELIVERY_HOURS

    events.extend(_event(shipment_id, m, EventStatus.ACTUAL, CARRIER, t, t) for m, t in actual.items())
    return events, ShipmentContext(vessel=vessel, port_ops=port_ops)


def generate_synthetic(spec: SyntheticDataSpec) -> SyntheticDataset:
    """
    Generate event streams and labelled dwell times; identical for identical specs.

    Returns:
        SyntheticDataset whose ``dwell_hours`` are measured from the Actual
        events of the target port.
    """
    rng = np.random.default_rng(spec.seed)
    tagged: List[Tuple[float, int, int, MilestoneEvent]] = []
    contexts: Dict[str, ShipmentContext] = {}
    for index in range(spec.shipments):
        events, context = _shipment(spec, rng, index)
        contexts[events[0].shipment_id] = context
        tagged.extend((e.emitted_at, index, order, e) for order, e in enumerate(events))

    timeline = Timeline()
    stamped = [timeline.record_event(e) for *_, e in sorted(tagged, key=lambda item: item[:3])]

    dwell_hours: Dict[str, float] = {}
    for shipment_id in contexts:
        hours = dwell_time(timeline, shipment_id, spec.target, status=EventStatus.ACTUAL)
        if hours is not None:
            dwell_hours[shipment_id] = hours
    if dwell_hours:
        share = float(np.mean([h > 24 for h in dwell_hours.values()]))
        logger.info(
            "Generated %d shipments on %s; %.1f%% dwell > 24h at %s",
            spec.shipments, spec.lane.lane_id, 100 * share, spec.target,
        )
    return SyntheticDataset(spec, stamped, timeline, contexts, dwell_hours)
