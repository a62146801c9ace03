# freight_ledger/invoice.py

"""
Iterative partial e-invoice computation.

At every milestone the carrier invoice is recomputed from the service
contract, the Actual events observed so far and the AI service's predictions
for what has not happened yet. Lines that can be neither measured nor
predicted are omitted, never listed at 0.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from freight_ledger.contracts import ChargeDefinition, CompKind, PlanKind, ServiceContract, ShippingLane
from freight_ledger.errors import ContractError, UnknownChargeError
from freight_ledger.events import EventStatus, Milestone, MilestoneKind, Timeline, dwell_reading
from freight_ledger.fees import dwell_days_from_hours, dwell_excess_fee
from freight_ledger.money import format_cents
from freight_ledger.predicted import PredictedValue, TargetKind

logger = logging.getLogger(__name__)


class ChargeBasis(str, Enum):
    ACTUAL = "Actual"
    PREDICTED = "Predicted"


@dataclass(frozen=True)
class ChargeLine:
    charge_code: str
    amount: int
    basis: ChargeBasis
    confidence: float
    explanation: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "basis", ChargeBasis(self.basis))
        if self.amount < 0:
            raise ContractError(f"{self.charge_code}: negative amount {self.amount}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ContractError(f"{self.charge_code}: confidence {self.confidence} outside [0, 1]")
        if self.basis is ChargeBasis.ACTUAL and self.confidence != 1.0:
            raise ContractError(f"{self.charge_code}: Actual lines carry confidence 1.0")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "charge_code": self.charge_code,
            "amount": self.amount,
            "basis": self.basis.value,
            "confidence": float(self.confidence),
            "explanation": self.explanation,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ChargeLine":
        return cls(
            data["charge_code"],
            int(data["amount"]),
            ChargeBasis(data["basis"]),
            float(data["confidence"]),
            data.get("explanation", ""),
        )


@dataclass(frozen=True)
class PartialInvoice:
    invoice_id: str
    shipment_id: str
    iteration: int
    trigger_milestone: Milestone
    lines: Tuple[ChargeLine, ...]
    final: bool
    contract_id: str = ""
    carrier_id: str = ""
    currency: str = "USD"
    total_actual: int = field(init=False)
    total_predicted: int = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "lines", tuple(self.lines))
        if self.iteration < 1:
            raise ContractError("invoice iteration starts at 1")
        if self.final and any(line.basis is not ChargeBasis.ACTUAL for line in self.lines):
            raise ContractError(f"final invoice {self.invoice_id} contains predicted lines")
        object.__setattr__(
            self, "total_actual", sum(line.amount for line in self.lines if line.basis is ChargeBasis.ACTUAL)
        )
        object.__setattr__(
            self, "total_predicted", sum(line.amount for line in self.lines if line.basis is ChargeBasis.PREDICTED)
        )

    @property
    def total(self) -> int:
        return self.total_actual + self.total_predicted

    def line(self, charge_code: str) -> Optional[ChargeLine]:
        for line in self.lines:
            if line.charge_code == charge_code:
                return line
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "invoice_id": self.invoice_id,
            "shipment_id": self.shipment_id,
            "iteration": self.iteration,
            "trigger_milestone": self.trigger_milestone.key,
            "lines": [line.to_dict() for line in self.lines],
            "total_actual": self.total_actual,
            "total_predicted": self.total_predicted,
            "final": self.final,
            "contract_id": self.contract_id,
            "carrier_id": self.carrier_id,
            "currency": self.currency,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PartialInvoice":
        invoice = cls(
            invoice_id=data["invoice_id"],
            shipment_id=data["shipment_id"],
            iteration=int(data["iteration"]),
            trigger_milestone=Milestone.parse(data["trigger_milestone"]),
            lines=tuple(ChargeLine.from_dict(line) for line in data["lines"]),
            final=bool(data["final"]),
            contract_id=data.get("contract_id", ""),
            carrier_id=data.get("carrier_id", ""),
            currency=data.get("currency", "USD"),
        )
        if "total_actual" in data and (
            data["total_actual"] != invoice.total_actual
            or data["total_predicted"] != invoice.total_predicted
        ):
            raise ContractError(f"invoice {invoice.invoice_id} totals do not match its lines")
        return invoice


def _latest_predictions(
    contract: ServiceContract, predictions: Sequence[PredictedValue]
) -> Dict[str, PredictedValue]:
    latest: Dict[str, PredictedValue] = {}
    codes = set(contract.charge_codes)
    for prediction in predictions:
        if prediction.charge_code is None:
            continue
        if prediction.charge_code not in codes:
            raise UnknownChargeError(
                f"prediction for unknown charge {prediction.charge_code} "
                f"(contract {contract.contract_id})"
            )
        latest[prediction.charge_code] = prediction
    return latest


def _dwell_fee_line(
    charge: ChargeDefinition,
    lane: ShippingLane,
    timeline: Timeline,
    shipment_id: str,
    prediction: Optional[PredictedValue],
    final: bool,
    as_of: Optional[float],
) -> Optional[ChargeLine]:
    port = charge.dwell_port(lane)
    limit = lane.dwell_limit(port)
    base, increment = charge.rate_params["base_per_day"], charge.rate_params["increment_per_day"]
    reading = dwell_reading(timeline, shipment_id, port, status=EventStatus.ACTUAL, as_of=as_of)
    if reading is not None:
        days = dwell_days_from_hours(reading.hours)
        return ChargeLine(
            charge.charge_code,
            dwell_excess_fee(days, limit, base, increment),
            ChargeBasis.ACTUAL,
            1.0,
            f"dwell {days}d vs limit {limit}d at {port}",
        )
    if final or prediction is None:
        return None
    if prediction.target.kind is not TargetKind.DWELL_DAYS:
        raise ContractError(
            f"{charge.charge_code} needs a {TargetKind.DWELL_DAYS.value} prediction, "
            f"got {prediction.target.key}"
        )
    days = max(0, int(prediction.value))
    return ChargeLine(
        charge.charge_code,
        dwell_excess_fee(days, limit, base, increment),
        ChargeBasis.PREDICTED,
        prediction.score,
        f"predicted dwell {days}d vs limit {limit}d at {port}",
    )


def _fixed_line(
    charge: ChargeDefinition,
    timeline: Timeline,
    shipment_id: str,
    prediction: Optional[PredictedValue],
    final: bool,
    as_of: Optional[float],
) -> Optional[ChargeLine]:
    amount = charge.rate_params["flat_amount"]
    if charge.plan_kind is PlanKind.PLANNED:
        return ChargeLine(charge.charge_code, amount, ChargeBasis.ACTUAL, 1.0, "contract rate")
    assert charge.trigger is not None
    if timeline.actual(shipment_id, charge.trigger, as_of) is not None:
        return ChargeLine(
            charge.charge_code, amount, ChargeBasis.ACTUAL, 1.0, f"triggered by {charge.trigger}"
        )
    if final or prediction is None or prediction.value <= 0:
        return None
    return ChargeLine(
        charge.charge_code,
        amount,
        ChargeBasis.PREDICTED,
        prediction.score,
        f"{charge.trigger} expected",
    )


def compute_invoice(
    contract: ServiceContract,
    lane: ShippingLane,
    timeline: Timeline,
    shipment_id: str,
    predictions: Sequence[PredictedValue],
    iteration: int,
    trigger_milestone: Milestone,
    as_of: Optional[float] = None,
) -> PartialInvoice:
    """
    Compute iteration ``iteration`` of the carrier e-invoice for one shipment.

    Parameters:
        contract: Service contract whose charges are priced.
        lane: The contract's lane (dwell limits, ports).
        timeline: Milestone events observed so far.
        shipment_id: Shipment being invoiced.
        predictions: AI-service predictions; the last one per charge_code is used.
        iteration: 1-based recomputation counter.
        trigger_milestone: Milestone whose occurrence triggered this iteration.
        as_of: Only events emitted at or before this time are considered.

    Returns:
        PartialInvoice, final when the trigger is DeliveryComplete.

    Raises:
        UnknownChargeError: a prediction names a charge the contract lacks.
    """
    if lane.lane_id != contract.lane_id:
        raise ContractError(f"contract {contract.contract_id} is for lane {contract.lane_id}, not {lane.lane_id}")
    latest = _latest_predictions(contract, predictions)
    final = trigger_milestone.kind is MilestoneKind.DELIVERY_COMPLETE

    lines: List[ChargeLine] = []
    for charge in contract.charges:
        prediction = latest.get(charge.charge_code)
        if charge.comp_kind is CompKind.FIXED:
            line = _fixed_line(charge, timeline, shipment_id, prediction, final, as_of)
        else:
            line = _dwell_fee_line(charge, lane, timeline, shipment_id, prediction, final, as_of)
        if line is not None:
            lines.append(line)

    invoice = PartialInvoice(
        invoice_id=f"{shipment_id}/{iteration}",
        shipment_id=shipment_id,
        iteration=iteration,
        trigger_milestone=trigger_milestone,
        lines=tuple(lines),
        final=final,
        contract_id=contract.contract_id,
        carrier_id=contract.carrier_id,
        currency=contract.currency,
    )
    logger.info(
        "Invoice %s: actual %s, predicted %s%s",
        invoice.invoice_id,
        format_cents(invoice.total_actual),
        format_cents(invoice.total_predicted),
        " (final)" if final else "",
    )
    return invoice


def invoice_frame(invoice: PartialInvoice) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "charge": line.charge_code,
                "basis": line.basis.value,
                "amount": format_cents(line.amount),
                "confidence": f"{line.confidence:.2f}",
                "explanation": line.explanation,
            }
            for line in invoice.lines
        ],
        columns=["charge", "basis", "amount", "confidence", "explanation"],
    )


def render_invoice(invoice: PartialInvoice) -> str:
    """Human-readable text table of an invoice."""
    header = (
        f"Invoice {invoice.invoice_id} ({invoice.currency}) iteration {invoice.iteration} "
        f"at {invoice.trigger_milestone}{' FINAL' if invoice.final else ''}"
    )
    frame = invoice_frame(invoice)
    body = frame.to_string(index=False) if len(frame) else "(no determinable charges)"
    footer = (
        f"total actual {format_cents(invoice.total_actual)}, "
        f"total predicted {format_cents(invoice.total_predicted)}"
    )
    return "\n".join([header, body, footer])
