"""Values the AI service hands to the invoice engine."""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Mapping, Optional

from freight_ledger.errors import EventDataError
from freight_ledger.events import Milestone


class TargetKind(str, Enum):
    DWELL_CLASS = "DwellClass"
    DWELL_DAYS = "DwellDays"
    ARRIVAL_DELAY = "ArrivalDelay"
    VOYAGE_TIME = "VoyageTime"
    DEPARTURE_DELAY = "DepartureDelay"
    CHARGE_INCURRED = "ChargeIncurred"


@dataclass(frozen=True)
class PredictionTarget:
    kind: TargetKind
    port: Optional[str] = None
    threshold_hours: Optional[int] = None
    to_port: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", TargetKind(self.kind))
        if self.kind is TargetKind.DWELL_CLASS and self.threshold_hours is None:
            raise EventDataError("DwellClass target needs threshold_hours")
        if self.kind is TargetKind.VOYAGE_TIME and not (self.port and self.to_port):
            raise EventDataError("VoyageTime target needs a leg (port, to_port)")

    @property
    def key(self) -> str:
        if self.kind is TargetKind.DWELL_CLASS:
            return f"{self.kind.value}({self.port},{self.threshold_hours})"
        if self.kind is TargetKind.VOYAGE_TIME:
            return f"{self.kind.value}({self.port}-{self.to_port})"
        return f"{self.kind.value}({self.port or ''})"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "port": self.port,
            "threshold_hours": self.threshold_hours,
            "to_port": self.to_port,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PredictionTarget":
        return cls(
            TargetKind(data["kind"]),
            data.get("port"),
            data.get("threshold_hours"),
            data.get("to_port"),
        )


@dataclass(frozen=True)
class PredictedValue:
    shipment_id: str
    target: PredictionTarget
    value: float
    score: float
    produced_at_milestone: Milestone
    charge_code: Optional[str] = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise EventDataError("predicted value must be finite")
        if not 0.0 <= self.score <= 1.0:
            raise EventDataError(f"score {self.score} outside [0, 1]")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "shipment_id": self.shipment_id,
            "target": self.target.to_dict(),
            "value": float(self.value),
            "score": float(self.score),
            "produced_at_milestone": self.produced_at_milestone.key,
            "charge_code": self.charge_code,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PredictedValue":
        return cls(
            shipment_id=data["shipment_id"],
            target=PredictionTarget.from_dict(data["target"]),
            value=float(data["value"]),
            score=float(data["score"]),
            produced_at_milestone=Milestone.parse(data["produced_at_milestone"]),
            charge_code=data.get("charge_code"),
        )
