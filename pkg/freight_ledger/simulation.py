# freight_ledger/simulation.py

"""
Deterministic scenario runner for the three payment methods.

- OpenAccount: the shipper pays the carrier the full invoice some days after delivery.
- ClassicFactoring: the bank pays the discounted invoice a day after delivery
  and collects the full amount from the shipper later.
- AcceleratedFactoring: at every Actual milestone the carrier invoice is
  recomputed, relayed to the finance ledger and paid in installments, then
  settled once delivered.

Times are hours since the scenario epoch; reports use day = floor(hours / 24).
"""

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd

from freight_ledger.contracts import ServiceContract, ShippingLane
from freight_ledger.errors import FreightLedgerError, ScenarioError
from freight_ledger.events import (
    AI_SERVICE,
    EventStatus,
    Milestone,
    MilestoneEvent,
    MilestoneKind,
    Timeline,
)
from freight_ledger.features import ShipmentContext, extract_features, feature_matrix
from freight_ledger.finance import (
    CarrierAccount,
    FactoringPolicy,
    SettlementResult,
    decide_charges,
    paid_state,
    payout,
    record_repayment,
    register_policy,
    reward_ai_service,
    settle_final,
)
from freight_ledger.fusion import estimate_event_time
from freight_ledger.identity import build_network
from freight_ledger.invoice import PartialInvoice, compute_invoice
from freight_ledger.ledger import Ledger, PayloadKind, save_snapshot
from freight_ledger.money import discounted, format_cents
from freight_ledger.predicted import PredictedValue
from freight_ledger.registry import AccuracyRegistry
from freight_ledger.relay import TrustAnchor, export_view, imported_payload, verify_and_import
from freight_ledger.rnn import DwellModel, bucket_prediction, load_model, predict_dwell_bucket

logger = logging.getLogger(__name__)

HOURS_PER_DAY = 24

SECTIONS = ("meta", "lanes", "contracts", "policies", "anchors", "events", "predictor", "method")
META_FIELDS = (
    "name",
    "description",
    "seed",
    "epoch",
    "networks",
    "open_account_days",
    "repayment_days",
    "settlement_delay_hours",
)
PREDICTOR_FIELDS = ("source_weights", "registry", "predictions", "models", "contexts")
EVENT_FIELDS = ("shipment_id", "milestone", "status", "source", "occurrence_time", "emitted_at")
DEFAULT_NETWORKS = {
    "logistics": {"network_id": "STL", "members": ["carrier", "shipper", "port-authority"], "quorum_threshold": 2},
    "finance": {"network_id": "SWT", "members": ["bank", "carrier", "shipper"], "quorum_threshold": 2},
}


class PaymentMethod(str, Enum):
    OPEN_ACCOUNT = "OpenAccount"
    CLASSIC_FACTORING = "ClassicFactoring"
    ACCELERATED_FACTORING = "AcceleratedFactoring"

    @classmethod
    def parse(cls, value: Union[str, "PaymentMethod"]) -> "PaymentMethod":
        aliases = {
            "open-account": cls.OPEN_ACCOUNT,
            "open": cls.OPEN_ACCOUNT,
            "classic": cls.CLASSIC_FACTORING,
            "accelerated": cls.ACCELERATED_FACTORING,
        }
        if isinstance(value, cls):
            return value
        try:
            return aliases.get(str(value).lower()) or cls(value)
        except ValueError:
            raise ScenarioError(f"unknown payment method {value!r}") from None


def day_of(hours: float) -> int:
    return int(math.floor(hours / HOURS_PER_DAY))


def _reject_unknown(section: str, data: Mapping[str, Any], allowed: Sequence[str]) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ScenarioError(f"unknown fields in {section}: {unknown}")


@dataclass(frozen=True)
class ModelRef:
    lane_id: str
    milestone: Milestone
    charge_code: str
    files: Mapping[int, Path]


@dataclass
class Scenario:
    name: str
    seed: int
    epoch: str
    networks: Mapping[str, Mapping[str, Any]]
    lanes: Dict[str, ShippingLane]
    contracts: List[ServiceContract]
    policies: List[FactoringPolicy]
    anchors: List[Mapping[str, Any]]
    events: List[MilestoneEvent]
    method: PaymentMethod
    source_weights: Dict[str, float] = field(default_factory=dict)
    registry: AccuracyRegistry = field(default_factory=AccuracyRegistry)
    predictions: List[PredictedValue] = field(default_factory=list)
    models: List[ModelRef] = field(default_factory=list)
    contexts: Dict[str, ShipmentContext] = field(default_factory=dict)
    open_account_days: int = 60
    repayment_days: int = 60
    settlement_delay_hours: float = 24.0

    def __post_init__(self) -> None:
        self.events = sorted(self.events, key=lambda e: e.emitted_at)
        self._validate()

    def _validate(self) -> None:
        for contract in self.contracts:
            if contract.lane_id not in self.lanes:
                raise ScenarioError(f"contract {contract.contract_id} references unknown lane {contract.lane_id}")
        for policy in self.policies:
            if policy.lane_id not in self.lanes:
                raise ScenarioError(f"policy for {policy.carrier_id} references unknown lane {policy.lane_id}")
        owners: Dict[str, str] = {}
        for contract in self.contracts:
            for shipment_id in contract.shipments:
                if shipment_id in owners:
                    raise ScenarioError(f"shipment {shipment_id} belongs to two contracts")
                owners[shipment_id] = contract.contract_id
        for event in self.events:
            contract = self.contract_for(event.shipment_id)
            port = event.milestone.port
            if port is not None and port not in self.lanes[contract.lane_id].port_codes:
                raise ScenarioError(
                    f"event for {event.shipment_id} references port {port} "
                    f"not on lane {contract.lane_id}"
                )
        for prediction in self.predictions:
            contract = self.contract_for(prediction.shipment_id)
            if prediction.charge_code is not None and prediction.charge_code not in contract.charge_codes:
                raise ScenarioError(
                    f"prediction for {prediction.shipment_id} names unknown charge {prediction.charge_code}"
                )
        for ref in self.models:
            if ref.lane_id not in self.lanes:
                raise ScenarioError(f"model references unknown lane {ref.lane_id}")

    def contract_for(self, shipment_id: str) -> ServiceContract:
        for contract in self.contracts:
            if shipment_id in contract.shipments:
                return contract
        raise ScenarioError(f"shipment {shipment_id} is not covered by any contract")

    def policy_for(self, contract: ServiceContract) -> FactoringPolicy:
        for policy in self.policies:
            if policy.carrier_id == contract.carrier_id and policy.lane_id == contract.lane_id:
                return policy
        raise ScenarioError(f"no factoring policy for carrier {contract.carrier_id} on {contract.lane_id}")

    @property
    def shipments(self) -> List[str]:
        return [s for c in self.contracts for s in c.shipments]

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: Optional[Path] = None) -> "Scenario":
        """
        Build a scenario from its JSON sections, rejecting unknown fields.

        Raises:
            ScenarioError: malformed sections or unresolvable references.
        """
        _reject_unknown("scenario", data, SECTIONS)
        base_dir = base_dir or Path(".")
        meta = dict(data.get("meta", {}))
        _reject_unknown("meta", meta, META_FIELDS)
        predictor = dict(data.get("predictor", {}))
        _reject_unknown("predictor", predictor, PREDICTOR_FIELDS)
        try:
            lanes = {lane.lane_id: lane for lane in map(ShippingLane.from_dict, data.get("lanes", []))}
            contracts = [ServiceContract.from_dict(c) for c in data.get("contracts", [])]
            policies = [FactoringPolicy.from_dict(p) for p in data.get("policies", [])]
            events = []
            for raw in data.get("events", []):
                _reject_unknown("event", raw, EVENT_FIELDS)
                events.append(MilestoneEvent.from_payload(raw))
            registry = AccuracyRegistry.from_payload({"entries": predictor.get("registry", [])})
            predictions = [PredictedValue.from_dict(p) for p in predictor.get("predictions", [])]
            models = [
                ModelRef(
                    m["lane_id"],
                    Milestone.parse(m["milestone"]),
                    m["charge_code"],
                    {int(t): base_dir / f for t, f in m["files"].items()},
                )
                for m in predictor.get("models", [])
            ]
            contexts = {sid: ShipmentContext.from_dict(c) for sid, c in predictor.get("contexts", {}).items()}
            networks = {**DEFAULT_NETWORKS, **meta.get("networks", {})}
            return cls(
                name=meta.get("name", "scenario"),
                seed=int(meta.get("seed", 0)),
                epoch=str(meta.get("epoch", "")),
                networks=networks,
                lanes=lanes,
                contracts=contracts,
                policies=policies,
                anchors=list(data.get("anchors", [])),
                events=events,
                method=PaymentMethod.parse(data.get("method", PaymentMethod.ACCELERATED_FACTORING)),
                source_weights={k: float(v) for k, v in predictor.get("source_weights", {}).items()},
                registry=registry,
                predictions=predictions,
                models=models,
                contexts=contexts,
                open_account_days=int(meta.get("open_account_days", 60)),
                repayment_days=int(meta.get("repayment_days", 60)),
                settlement_delay_hours=float(meta.get("settlement_delay_hours", 24.0)),
            )
        except ScenarioError:
            raise
        except (FreightLedgerError, KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"invalid scenario: {exc}") from exc


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    return Scenario.from_dict(data, base_dir=path.parent)


@dataclass(frozen=True)
class CashFlow:
    hours: float
    payer: str
    payee: str
    amount: int
    kind: str
    shipment_id: str

    @property
    def day(self) -> int:
        return day_of(self.hours)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "day": self.day,
            "payer": self.payer,
            "payee": self.payee,
            "amount": self.amount,
            "kind": self.kind,
            "shipment_id": self.shipment_id,
        }


@dataclass
class MethodSummary:
    method: PaymentMethod
    carrier_cash: int
    first_cash_day: Optional[int]
    bank_paid: int
    bank_received: int
    shipper_paid: int
    invoice_total: int

    @property
    def bank_margin(self) -> int:
        return self.bank_received - self.bank_paid

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method.value,
            "carrier_cash": self.carrier_cash,
            "first_cash_day": self.first_cash_day,
            "bank_paid": self.bank_paid,
            "bank_received": self.bank_received,
            "bank_margin": self.bank_margin,
            "shipper_paid": self.shipper_paid,
            "invoice_total": self.invoice_total,
        }


@dataclass
class CashFlowReport:
    scenario: str
    flows: Dict[PaymentMethod, List[CashFlow]] = field(default_factory=dict)
    summaries: Dict[PaymentMethod, MethodSummary] = field(default_factory=dict)
    state_hashes: Dict[PaymentMethod, Dict[str, str]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario,
            "methods": {
                method.value: {
                    "flows": [f.to_dict() for f in self.flows[method]],
                    "summary": self.summaries[method].to_dict(),
                    "state_hashes": self.state_hashes[method],
                }
                for method in self.flows
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def flow_frame(self) -> pd.DataFrame:
        rows = [
            {"method": method.value, **flow.to_dict(), "amount": format_cents(flow.amount)}
            for method, flows in self.flows.items()
            for flow in flows
        ]
        return pd.DataFrame(rows, columns=["method", "day", "payer", "payee", "amount", "kind", "shipment_id"])

    def render(self) -> str:
        lines = [f"Scenario {self.scenario}"]
        frame = self.flow_frame()
        lines.append(frame.to_string(index=False) if len(frame) else "(no cash flows)")
        for summary in self.summaries.values():
            first = "-" if summary.first_cash_day is None else f"day {summary.first_cash_day}"
            lines.append(
                f"{summary.method.value}: carrier cash {format_cents(summary.carrier_cash)} "
                f"(first {first}), bank margin {format_cents(summary.bank_margin)}"
            )
        return "\n".join(lines)


@dataclass
class RunResult:
    method: PaymentMethod
    logistics: Ledger
    finance: Ledger
    report: CashFlowReport
    invoices: List[PartialInvoice] = field(default_factory=list)
    settlements: List[SettlementResult] = field(default_factory=list)

    @property
    def state_hashes(self) -> Dict[str, str]:
        return {"logistics": self.logistics.state_hash().hex(), "finance": self.finance.state_hash().hex()}

    def save_snapshots(self, directory: Union[str, Path]) -> Tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        prefix = self.method.value.lower()
        return (
            save_snapshot(self.logistics, directory / f"{prefix}-{self.logistics.network_id}.flgr"),
            save_snapshot(self.finance, directory / f"{prefix}-{self.finance.network_id}.flgr"),
        )


class _Run:
    """State of one scenario run under one payment method."""

    def __init__(self, scenario: Scenario, method: PaymentMethod, seed: int) -> None:
        self.scenario = scenario
        self.method = method
        networks = scenario.networks
        self.logistics_identity, self.logistics_keys = build_network(
            networks["logistics"]["network_id"],
            networks["logistics"]["members"],
            int(networks["logistics"]["quorum_threshold"]),
            seed,
        )
        finance_identity, _ = build_network(
            networks["finance"]["network_id"],
            networks["finance"]["members"],
            int(networks["finance"]["quorum_threshold"]),
            seed,
        )
        self.logistics = Ledger(self.logistics_identity)
        self.finance = Ledger(finance_identity)
        self.anchors = self._anchors()
        self.timeline = Timeline()
        self.flows: List[CashFlow] = []
        self.invoices: List[PartialInvoice] = []
        self.settlements: List[SettlementResult] = []
        self.accounts: Dict[str, CarrierAccount] = {}
        self.iterations: Dict[str, int] = {}
        self.predictions: Dict[str, List[PredictedValue]] = {}
        self.registry = AccuracyRegistry()
        self.models = self._load_models()

    def _anchors(self) -> Dict[str, TrustAnchor]:
        if not self.scenario.anchors:
            return {self.logistics_identity.network_id: TrustAnchor.from_identity(self.logistics_identity)}
        anchors = {}
        for entry in self.scenario.anchors:
            _reject_unknown("anchor", entry, ("network_id", "quorum_threshold", "members"))
            if "members" in entry:
                anchor = TrustAnchor.from_dict(entry)
            elif entry.get("network_id") == self.logistics_identity.network_id:
                anchor = TrustAnchor(
                    self.logistics_identity.network_id,
                    self.logistics_identity.verify_keys(),
                    int(entry.get("quorum_threshold", self.logistics_identity.quorum_threshold)),
                )
            else:
                raise ScenarioError(f"anchor for {entry.get('network_id')!r} needs member keys")
            anchors[anchor.network_id] = anchor
        return anchors

    def _load_models(self) -> Dict[Tuple[str, str], Tuple[ModelRef, Dict[int, DwellModel]]]:
        loaded = {}
        for ref in self.scenario.models:
            models = {threshold: load_model(path) for threshold, path in ref.files.items()}
            loaded[(ref.lane_id, ref.milestone.key)] = (ref, models)
        return loaded

    def _relay(self, kind: PayloadKind, predicate: Callable[[Any], bool]) -> Any:
        attested = export_view(self.logistics, self.logistics_keys, kind, predicate)
        record = verify_and_import(self.finance, attested, self.anchors)
        return imported_payload(record)

    def _pay(self, hours: float, payer: str, payee: str, amount: int, kind: str, shipment_id: str) -> None:
        if amount > 0:
            self.flows.append(CashFlow(hours, payer, payee, amount, kind, shipment_id))

    def setup(self) -> None:
        for contract in self.scenario.contracts:
            self.logistics.append(PayloadKind.SERVICE_CONTRACT, contract.to_dict())
        if self.method is PaymentMethod.OPEN_ACCOUNT:
            return
        for contract in self.scenario.contracts:
            policy = self.scenario.policy_for(contract)
            if not self.finance.query(PayloadKind.POLICY, lambda p, c=contract: p["carrier_id"] == c.carrier_id and p["lane_id"] == c.lane_id):
                register_policy(self.finance, policy)
        if self.method is PaymentMethod.ACCELERATED_FACTORING:
            self.logistics.append(PayloadKind.ACCURACY_REGISTRY, self.scenario.registry.to_payload())
            payload = self._relay(PayloadKind.ACCURACY_REGISTRY, lambda p: True)
            self.registry = AccuracyRegistry.from_payload(payload)

    def account(self, carrier_id: str) -> CarrierAccount:
        return self.accounts.setdefault(carrier_id, CarrierAccount(carrier_id))

    def process(self, event: MilestoneEvent) -> None:
        stamped = self.timeline.record_event(event, now=event.emitted_at)
        self.logistics.append(PayloadKind.MILESTONE_EVENT, stamped.to_payload())
        if stamped.status is not EventStatus.ACTUAL:
            return
        shipment_id = stamped.shipment_id
        contract = self.scenario.contract_for(shipment_id)
        lane = self.scenario.lanes[contract.lane_id]
        now = stamped.emitted_at
        self.iterations[shipment_id] = self.iterations.get(shipment_id, 0) + 1
        final = stamped.milestone.kind is MilestoneKind.DELIVERY_COMPLETE

        if self.method is PaymentMethod.ACCELERATED_FACTORING:
            self._emit_estimates(shipment_id, lane, stamped)
            self._collect_predictions(shipment_id, contract, lane, stamped.milestone)
        elif not final:
            return

        invoice = compute_invoice(
            contract,
            lane,
            self.timeline,
            shipment_id,
            self.predictions.get(shipment_id, []),
            self.iterations[shipment_id],
            stamped.milestone,
            as_of=now,
        )
        self.logistics.append(PayloadKind.PARTIAL_INVOICE, invoice.to_dict())
        imported = PartialInvoice.from_dict(
            self._relay(PayloadKind.PARTIAL_INVOICE, lambda p, i=invoice.invoice_id: p["invoice_id"] == i)
        )
        self.invoices.append(imported)

        if self.method is PaymentMethod.ACCELERATED_FACTORING:
            self._accelerated(imported, contract, now)
        elif self.method is PaymentMethod.CLASSIC_FACTORING:
            self._classic(imported, contract, now)
        else:
            self._open_account(imported, contract, now)

    def _emit_estimates(self, shipment_id: str, lane: ShippingLane, actual: MilestoneEvent) -> None:
        """AI service: fused estimates for the journey milestones still ahead."""
        now = actual.emitted_at
        planned_here = self.timeline.effective_event(shipment_id, actual.milestone, EventStatus.PLANNED, now)
        slip = actual.occurrence_time - planned_here.occurrence_time if planned_here else 0.0
        for milestone in lane.journey():
            if self.timeline.actual(shipment_id, milestone, now) is not None:
                continue
            planned = self.timeline.effective_event(shipment_id, milestone, EventStatus.PLANNED, now)
            if planned is None:
                continue
            estimate = estimate_event_time(
                self.timeline, shipment_id, milestone, self.scenario.source_weights,
                planned.occurrence_time + slip, now,
            )
            if estimate is None:
                continue
            emitted = self.timeline.record_event(
                MilestoneEvent(shipment_id, milestone, EventStatus.ESTIMATED, AI_SERVICE, estimate, now), now=now
            )
            self.logistics.append(PayloadKind.MILESTONE_EVENT, emitted.to_payload())

    def _collect_predictions(
        self, shipment_id: str, contract: ServiceContract, lane: ShippingLane, milestone: Milestone
    ) -> None:
        emitted = self.predictions.setdefault(shipment_id, [])
        emitted.extend(
            p for p in self.scenario.predictions
            if p.shipment_id == shipment_id and p.produced_at_milestone == milestone
        )
        found = self.models.get((lane.lane_id, milestone.key))
        if found is None or milestone not in lane.journey():
            return
        ref, models = found
        charge = contract.charge(ref.charge_code)
        port = charge.dwell_port(lane)
        if self.timeline.actual(shipment_id, Milestone.departure(port)) is not None:
            return
        vectors = extract_features(
            self.timeline, lane, shipment_id, milestone,
            self.scenario.contexts.get(shipment_id), self.scenario.source_weights,
        )
        bucket = predict_dwell_bucket(models, feature_matrix(vectors))
        logger.info("%s at %s: dwell bucket %s (%s)", shipment_id, milestone, bucket.label, bucket.explanation)
        emitted.append(bucket_prediction(bucket, shipment_id, port, milestone, ref.charge_code))

    def _accelerated(self, invoice: PartialInvoice, contract: ServiceContract, now: float) -> None:
        policy = self.scenario.policy_for(contract)
        account = self.account(contract.carrier_id)
        shipment_id = invoice.shipment_id
        if not invoice.final:
            decisions = decide_charges(invoice, policy, self.registry, paid_state(self.finance, shipment_id))
            for record in payout(self.finance, shipment_id, invoice.iteration, decisions, account, now):
                self._pay(now, policy.bank_id, contract.carrier_id, record.cash_amount, "installment", shipment_id)
            return
        settled_at = now + self.scenario.settlement_delay_hours
        result = settle_final(self.finance, invoice, policy, account, settled_at)
        self.settlements.append(result)
        self._pay(settled_at, policy.bank_id, contract.carrier_id, result.cash_amount, "settlement", shipment_id)
        if policy.reward_amount > 0:
            reward_ai_service(self.finance, contract.carrier_id, shipment_id, policy.reward_amount, settled_at)
            self._pay(settled_at, contract.carrier_id, AI_SERVICE, policy.reward_amount, "reward", shipment_id)
        self._shipper_repays(invoice, contract, policy.bank_id, now)

    def _classic(self, invoice: PartialInvoice, contract: ServiceContract, now: float) -> None:
        policy = self.scenario.policy_for(contract)
        paid_at = now + self.scenario.settlement_delay_hours
        amount = discounted(invoice.total_actual, policy.classic_discount_rate)
        result = SettlementResult(
            shipment_id=invoice.shipment_id,
            entitlement=amount,
            total_paid_before_final=0,
            final_payment=amount,
            surplus_carried=0,
            cash_amount=amount,
            paid_at=paid_at,
            carrier_id=contract.carrier_id,
        )
        self.finance.append(PayloadKind.SETTLEMENT, result.to_payload())
        self.settlements.append(result)
        self._pay(paid_at, policy.bank_id, contract.carrier_id, amount, "factoring", invoice.shipment_id)
        self._shipper_repays(invoice, contract, policy.bank_id, now)

    def _open_account(self, invoice: PartialInvoice, contract: ServiceContract, now: float) -> None:
        paid_at = now + self.scenario.open_account_days * HOURS_PER_DAY
        record_repayment(
            self.finance, invoice.shipment_id, contract.shipper_id, contract.carrier_id, invoice.total_actual, paid_at
        )
        self._pay(paid_at, contract.shipper_id, contract.carrier_id, invoice.total_actual, "open-account", invoice.shipment_id)

    def _shipper_repays(self, invoice: PartialInvoice, contract: ServiceContract, bank_id: str, now: float) -> None:
        paid_at = now + self.scenario.repayment_days * HOURS_PER_DAY
        record_repayment(self.finance, invoice.shipment_id, contract.shipper_id, bank_id, invoice.total_actual, paid_at)
        self._pay(paid_at, contract.shipper_id, bank_id, invoice.total_actual, "repayment", invoice.shipment_id)

    def summary(self) -> MethodSummary:
        carriers = {c.carrier_id for c in self.scenario.contracts}
        shippers = {c.shipper_id for c in self.scenario.contracts}
        banks = {p.bank_id for p in self.scenario.policies}
        to_carrier = [f for f in self.flows if f.payee in carriers]
        return MethodSummary(
            method=self.method,
            carrier_cash=sum(f.amount for f in to_carrier),
            first_cash_day=min((f.day for f in to_carrier), default=None),
            bank_paid=sum(f.amount for f in self.flows if f.payer in banks),
            bank_received=sum(f.amount for f in self.flows if f.payee in banks),
            shipper_paid=sum(f.amount for f in self.flows if f.payer in shippers),
            invoice_total=sum(i.total_actual for i in self.invoices if i.final),
        )


def run(
    scenario: Scenario, method: Optional[Union[PaymentMethod, str]] = None, seed: Optional[int] = None
) -> RunResult:
    """
    Replay a scenario's event script under one payment method.

    Parameters:
        scenario: Loaded scenario.
        method: Payment method; defaults to the scenario's own.
        seed: Key-derivation seed; defaults to the scenario's.

    Returns:
        RunResult with both ledgers and a single-method CashFlowReport.
    """
    chosen = PaymentMethod.parse(method) if method is not None else scenario.method
    state = _Run(scenario, chosen, scenario.seed if seed is None else seed)
    state.setup()
    for event in scenario.events:
        state.process(event)

    state.flows.sort(key=lambda f: f.hours)
    report = CashFlowReport(scenario.name)
    report.flows[chosen] = list(state.flows)
    report.summaries[chosen] = state.summary()
    result = RunResult(chosen, state.logistics, state.finance, report, state.invoices, state.settlements)
    report.state_hashes[chosen] = result.state_hashes
    logger.info(
        "%s under %s: %d logistics / %d finance records",
        scenario.name, chosen.value, len(state.logistics), len(state.finance),
    )
    return result


@dataclass
class Comparison:
    report: CashFlowReport
    runs: Dict[PaymentMethod, RunResult]

    def summary(self, method: PaymentMethod) -> MethodSummary:
        return self.report.summaries[method]

    @property
    def margin_delta(self) -> int:
        """Bank margin of accelerated minus classic factoring."""
        return (
            self.summary(PaymentMethod.ACCELERATED_FACTORING).bank_margin
            - self.summary(PaymentMethod.CLASSIC_FACTORING).bank_margin
        )

    @property
    def acceleration_days(self) -> Optional[int]:
        """Days by which accelerated factoring pays the carrier before classic factoring."""
        classic = self.summary(PaymentMethod.CLASSIC_FACTORING).first_cash_day
        accelerated = self.summary(PaymentMethod.ACCELERATED_FACTORING).first_cash_day
        if classic is None or accelerated is None:
            return None
        return classic - accelerated

    def frame(self) -> pd.DataFrame:
        rows = []
        for method, summary in self.report.summaries.items():
            rows.append(
                {
                    "method": method.value,
                    "first_cash_day": summary.first_cash_day,
                    "carrier_cash": format_cents(summary.carrier_cash),
                    "bank_margin": format_cents(summary.bank_margin),
                    "shipper_paid": format_cents(summary.shipper_paid),
                }
            )
        return pd.DataFrame(rows, columns=["method", "first_cash_day", "carrier_cash", "bank_margin", "shipper_paid"])

    def to_dict(self) -> Dict[str, Any]:
        data = self.report.to_dict()
        data["comparison"] = {"margin_delta": self.margin_delta, "acceleration_days": self.acceleration_days}
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def render(self) -> str:
        accel = "-" if self.acceleration_days is None else f"{self.acceleration_days} days"
        return "\n".join(
            [
                f"Scenario {self.report.scenario}",
                self.frame().to_string(index=False),
                f"bank margin accelerated - classic: {format_cents(self.margin_delta)}",
                f"first-cash acceleration: {accel}",
            ]
        )


def compare_methods(scenario: Scenario, seed: Optional[int] = None) -> Comparison:
    """Run all three payment methods on one scenario."""
    report = CashFlowReport(scenario.name)
    runs: Dict[PaymentMethod, RunResult] = {}
    for method in PaymentMethod:
        result = run(scenario, method, seed)
        runs[method] = result
        report.flows[method] = result.report.flows[method]
        report.summaries[method] = result.report.summaries[method]
        report.state_hashes[method] = result.state_hashes
    return Comparison(report, runs)


def invoice_at(
    scenario: Scenario, shipment_id: str, milestone: Milestone, seed: Optional[int] = None
) -> PartialInvoice:
    """
    The partial invoice relayed for a shipment right after ``milestone`` occurred.

    Replays the scenario under accelerated factoring up to that Actual event,
    so AI estimates and live model predictions are included exactly as in
    ``run``.

    Raises:
        ScenarioError: the milestone never occurs for the shipment.
    """
    scenario.contract_for(shipment_id)
    state = _Run(scenario, PaymentMethod.ACCELERATED_FACTORING, scenario.seed if seed is None else seed)
    state.setup()
    for event in scenario.events:
        state.process(event)
        if event.shipment_id == shipment_id and event.milestone == milestone and event.status is EventStatus.ACTUAL:
            return state.invoices[-1]
    raise ScenarioError(f"{shipment_id} has no Actual {milestone} in the scenario")
