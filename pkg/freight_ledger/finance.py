# freight_ledger/finance.py

"""
Trade-finance side of accelerated invoice factoring.

Included:
- FactoringPolicy / ChargeRule: discount, accuracy gate and predicted fraction per charge
- decide_charges: which lines of an imported partial invoice the bank pays now
- payout: installment records, netted against the carrier's open surplus
- settle_final: reconcile against the discounted actual total, carry surplus forward
- reward_ai_service / record_repayment: closing records of a shipment

All amounts are integer cents; every rounding floors in the bank's favor.
"""

import logging
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Sequence

from freight_ledger.errors import FinanceError, NotFinalError, NotSettledError
from freight_ledger.events import AI_SERVICE
from freight_ledger.invoice import ChargeBasis, ChargeLine, PartialInvoice
from freight_ledger.ledger import Ledger, LedgerRecord, PayloadKind
from freight_ledger.money import discounted, floor_cents, format_cents, to_rate
from freight_ledger.registry import AccuracyRegistry

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChargeRule:
    include_predicted: bool = True
    accuracy_threshold: Decimal = Decimal("0.70")
    predicted_fraction: Decimal = Decimal("1")

    def __post_init__(self) -> None:
        object.__setattr__(self, "accuracy_threshold", to_rate(self.accuracy_threshold))
        object.__setattr__(self, "predicted_fraction", to_rate(self.predicted_fraction))
        if not 0 <= self.accuracy_threshold <= 1:
            raise FinanceError(f"accuracy_threshold {self.accuracy_threshold} outside [0, 1]")
        if not 0 < self.predicted_fraction <= 1:
            raise FinanceError(f"predicted_fraction {self.predicted_fraction} outside (0, 1]")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "include_predicted": self.include_predicted,
            "accuracy_threshold": str(self.accuracy_threshold),
            "predicted_fraction": str(self.predicted_fraction),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ChargeRule":
        return cls(
            bool(data.get("include_predicted", True)),
            to_rate(data.get("accuracy_threshold", "0.70")),
            to_rate(data.get("predicted_fraction", "1")),
        )


@dataclass(frozen=True)
class FactoringPolicy:
    bank_id: str
    carrier_id: str
    lane_id: str
    discount_rate: Decimal
    charge_rules: Mapping[str, ChargeRule] = field(default_factory=dict)
    excluded_charges: FrozenSet[str] = frozenset()
    classic_discount_rate: Decimal = Decimal("0.06")
    reward_amount: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "discount_rate", to_rate(self.discount_rate))
        object.__setattr__(self, "classic_discount_rate", to_rate(self.classic_discount_rate))
        object.__setattr__(self, "excluded_charges", frozenset(self.excluded_charges))
        for name in ("discount_rate", "classic_discount_rate"):
            if not 0 <= getattr(self, name) < 1:
                raise FinanceError(f"{name} {getattr(self, name)} outside [0, 1)")
        overlap = self.excluded_charges & set(self.charge_rules)
        if overlap:
            raise FinanceError(f"charges both ruled and excluded: {sorted(overlap)}")
        if self.reward_amount < 0:
            raise FinanceError("reward_amount must be >= 0")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bank_id": self.bank_id,
            "carrier_id": self.carrier_id,
            "lane_id": self.lane_id,
            "discount_rate": str(self.discount_rate),
            "charge_rules": {code: rule.to_dict() for code, rule in sorted(self.charge_rules.items())},
            "excluded_charges": sorted(self.excluded_charges),
            "classic_discount_rate": str(self.classic_discount_rate),
            "reward_amount": self.reward_amount,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FactoringPolicy":
        try:
            return cls(
                bank_id=data["bank_id"],
                carrier_id=data["carrier_id"],
                lane_id=data["lane_id"],
                discount_rate=to_rate(data["discount_rate"]),
                charge_rules={
                    code: ChargeRule.from_dict(rule) for code, rule in data.get("charge_rules", {}).items()
                },
                excluded_charges=frozenset(data.get("excluded_charges", ())),
                classic_discount_rate=to_rate(data.get("classic_discount_rate", "0.06")),
                reward_amount=int(data.get("reward_amount", 0)),
            )
        except (KeyError, TypeError, ArithmeticError) as exc:
            raise FinanceError(f"invalid factoring policy: {exc}") from exc


@dataclass(frozen=True)
class InstallmentRecord:
    shipment_id: str
    iteration: int
    charge_code: str
    basis: ChargeBasis
    gross_amount: int
    entitled_amount: int
    prior_paid: int
    paid_amount: int
    surplus_applied: int
    cash_amount: int
    paid_at: float
    carrier_id: str = ""

    def to_payload(self) -> Dict[str, Any]:
        return {
            "shipment_id": self.shipment_id,
            "iteration": self.iteration,
            "charge_code": self.charge_code,
            "basis": self.basis.value,
            "gross_amount": self.gross_amount,
            "entitled_amount": self.entitled_amount,
            "prior_paid": self.prior_paid,
            "paid_amount": self.paid_amount,
            "surplus_applied": self.surplus_applied,
            "cash_amount": self.cash_amount,
            "paid_at": float(self.paid_at),
            "carrier_id": self.carrier_id,
        }

    @classmethod
    def from_payload(cls, payload: Mapping[str, Any]) -> "InstallmentRecord":
        values = dict(payload)
        values["basis"] = ChargeBasis(values["basis"])
        return cls(**values)


@dataclass(frozen=True)
class SettlementResult:
    shipment_id: str
    entitlement: int
    total_paid_before_final: int
    final_payment: int
    surplus_carried: int
    surplus_applied: int = 0
    cash_amount: int = 0
    paid_at: float = 0.0
    carrier_id: str = ""

    def __post_init__(self) -> None:
        if self.final_payment < 0 or self.surplus_carried < 0:
            raise FinanceError("final_payment and surplus_carried are non-negative")
        if self.final_payment > 0 and self.surplus_carried > 0:
            raise FinanceError("a settlement either pays a balance or carries a surplus, not both")

    def to_payload(self) -> Dict[str, Any]:
        return {
            "shipment_id": self.shipment_id,
            "entitlement": self.entitlement,
            "total_paid_before_final": self.total_paid_before_final,
            "final_payment": self.final_payment,
            "surplus_carried": self.surplus_carried,
            "surplus_applied": self.surplus_applied,
            "cash_amount": self.cash_amount,
            "paid_at": float(self.paid_at),
            "carrier_id": self.carrier_id,
        }

    @classmethod
    def from_payload(cls, payload: Mapping[str, Any]) -> "SettlementResult":
        return cls(**dict(payload))


@dataclass
class CarrierAccount:
    carrier_id: str
    surplus_balance: int = 0
    history: List[SettlementResult] = field(default_factory=list)

    def apply_surplus(self, amount: int) -> int:
        """Net up to ``amount`` against the open surplus; return the part netted."""
        applied = min(self.surplus_balance, max(amount, 0))
        self.surplus_balance -= applied
        return applied


@dataclass(frozen=True)
class PaidState:
    """Installments already paid for one shipment, per charge code."""

    predicted: Mapping[str, int] = field(default_factory=dict)
    actual: Mapping[str, int] = field(default_factory=dict)

    def total(self, charge_code: str) -> int:
        return self.predicted.get(charge_code, 0) + self.actual.get(charge_code, 0)

    @property
    def grand_total(self) -> int:
        return sum(self.predicted.values()) + sum(self.actual.values())


@dataclass(frozen=True)
class ChargeDecision:
    line: ChargeLine
    payable: int
    included: bool
    reason: str
    entitled_amount: int = 0
    prior_paid: int = 0


def installments(finance_ledger: Ledger, shipment_id: str) -> List[InstallmentRecord]:
    return [
        InstallmentRecord.from_payload(r.payload())
        for r in finance_ledger.query(PayloadKind.INSTALLMENT, lambda p: p["shipment_id"] == shipment_id)
    ]


def paid_state(finance_ledger: Ledger, shipment_id: str) -> PaidState:
    predicted: Dict[str, int] = {}
    actual: Dict[str, int] = {}
    for record in installments(finance_ledger, shipment_id):
        bucket = actual if record.basis is ChargeBasis.ACTUAL else predicted
        bucket[record.charge_code] = bucket.get(record.charge_code, 0) + record.paid_amount
    return PaidState(predicted, actual)


def register_policy(finance_ledger: Ledger, policy: FactoringPolicy) -> LedgerRecord:
    record = finance_ledger.append(PayloadKind.POLICY, policy.to_dict())
    logger.info("Registered factoring policy %s/%s/%s", policy.bank_id, policy.carrier_id, policy.lane_id)
    return record


def _decide_actual(line: ChargeLine, policy: FactoringPolicy, paid: PaidState) -> ChargeDecision:
    code = line.charge_code
    if code in policy.excluded_charges:
        return ChargeDecision(line, 0, False, "excluded by policy; settled at final")
    if code in paid.actual:
        return ChargeDecision(line, 0, False, "actual already paid")
    entitled = discounted(line.amount, policy.discount_rate)
    prior = paid.predicted.get(code, 0)
    payable = max(entitled - prior, 0)
    reason = "actual" if prior == 0 else f"actual top-up over {format_cents(prior)} paid on prediction"
    return ChargeDecision(line, payable, True, reason, entitled, prior)


def _decide_predicted(
    line: ChargeLine,
    invoice: PartialInvoice,
    policy: FactoringPolicy,
    registry: AccuracyRegistry,
    paid: PaidState,
) -> ChargeDecision:
    code = line.charge_code
    rule = policy.charge_rules.get(code)
    if code in policy.excluded_charges:
        return ChargeDecision(line, 0, False, "excluded by policy")
    if rule is None or not rule.include_predicted:
        return ChargeDecision(line, 0, False, "predicted amounts not factored for this charge")
    if code in paid.predicted or code in paid.actual:
        return ChargeDecision(line, 0, False, "already paid on an earlier iteration")
    accuracy = registry.accuracy(policy.lane_id, invoice.trigger_milestone, code)
    if accuracy is None:
        logger.warning(
            "No accuracy entry for %s/%s/%s; deferring", policy.lane_id, invoice.trigger_milestone, code
        )
        return ChargeDecision(line, 0, False, "no accuracy entry; wait for actual value")
    if to_rate(accuracy) < rule.accuracy_threshold:
        return ChargeDecision(
            line, 0, False, f"accuracy {accuracy:.4f} below threshold {rule.accuracy_threshold}"
        )
    entitled = floor_cents(line.amount, rule.predicted_fraction, Decimal(1) - policy.discount_rate)
    return ChargeDecision(
        line, entitled, True, f"accuracy {accuracy:.4f} >= {rule.accuracy_threshold}", entitled, 0
    )


def decide_charges(
    invoice: PartialInvoice,
    policy: FactoringPolicy,
    registry: AccuracyRegistry,
    paid: Optional[PaidState] = None,
) -> List[ChargeDecision]:
    """
    Decide what the bank pays for one imported partial invoice.

    Actual lines pay their discounted amount minus whatever was paid for the
    same charge on a prediction (never below 0). Predicted lines pay
    floor(amount × predicted_fraction × (1 − discount)) once, and only when
    the policy factors the charge and the registry accuracy at the invoice's
    milestone reaches the threshold. Everything else is deferred.

    Parameters:
        invoice: The imported partial invoice.
        policy: Bank–carrier factoring policy.
        registry: Imported accuracy registry.
        paid: Installments already paid for the shipment.

    Returns:
        One ChargeDecision per invoice line, in line order.
    """
    paid = paid or PaidState()
    decisions = []
    for line in invoice.lines:
        if line.basis is ChargeBasis.ACTUAL:
            decisions.append(_decide_actual(line, policy, paid))
        else:
            decisions.append(_decide_predicted(line, invoice, policy, registry, paid))
    return decisions


def payout(
    finance_ledger: Ledger,
    shipment_id: str,
    iteration: int,
    decisions: Sequence[ChargeDecision],
    account: Optional[CarrierAccount] = None,
    paid_at: float = 0.0,
) -> List[InstallmentRecord]:
    """
    Append one Installment per positive payable decision.

    The carrier's open surplus is netted first, so ``cash_amount`` may be
    smaller than ``paid_amount``.
    """
    records: List[InstallmentRecord] = []
    for decision in decisions:
        if not decision.included or decision.payable <= 0:
            continue
        applied = account.apply_surplus(decision.payable) if account is not None else 0
        record = InstallmentRecord(
            shipment_id=shipment_id,
            iteration=iteration,
            charge_code=decision.line.charge_code,
            basis=decision.line.basis,
            gross_amount=decision.line.amount,
            entitled_amount=decision.entitled_amount,
            prior_paid=decision.prior_paid,
            paid_amount=decision.payable,
            surplus_applied=applied,
            cash_amount=decision.payable - applied,
            paid_at=paid_at,
            carrier_id=account.carrier_id if account is not None else "",
        )
        finance_ledger.append(PayloadKind.INSTALLMENT, record.to_payload())
        logger.info(
            "Installment %s #%d %s (%s): %s paid, %s cash",
            shipment_id, iteration, record.charge_code, record.basis.value,
            format_cents(record.paid_amount), format_cents(record.cash_amount),
        )
        records.append(record)
    return records


def settlement_for(finance_ledger: Ledger, shipment_id: str) -> Optional[SettlementResult]:
    matches = finance_ledger.query(PayloadKind.SETTLEMENT, lambda p: p["shipment_id"] == shipment_id)
    return SettlementResult.from_payload(matches[0].payload()) if matches else None


def settle_final(
    finance_ledger: Ledger,
    final_invoice: PartialInvoice,
    policy: FactoringPolicy,
    account: CarrierAccount,
    paid_at: float = 0.0,
) -> SettlementResult:
    """
    Reconcile a delivered shipment against its discounted actual total.

    entitlement = floor(total_actual × (1 − discount)). A shortfall is paid
    now (netted against open surplus); an overpayment is added to the
    carrier's surplus and recovered from later payouts.

    Raises:
        NotFinalError: the invoice is not final.
        FinanceError: the shipment was already settled.
    """
    if not final_invoice.final:
        raise NotFinalError(f"invoice {final_invoice.invoice_id} is not final")
    shipment_id = final_invoice.shipment_id
    if settlement_for(finance_ledger, shipment_id) is not None:
        raise FinanceError(f"shipment {shipment_id} is already settled")

    entitlement = discounted(final_invoice.total_actual, policy.discount_rate)
    paid = paid_state(finance_ledger, shipment_id).grand_total
    final_payment = max(entitlement - paid, 0)
    surplus_carried = max(paid - entitlement, 0)
    applied = account.apply_surplus(final_payment)
    account.surplus_balance += surplus_carried

    result = SettlementResult(
        shipment_id=shipment_id,
        entitlement=entitlement,
        total_paid_before_final=paid,
        final_payment=final_payment,
        surplus_carried=surplus_carried,
        surplus_applied=applied,
        cash_amount=final_payment - applied,
        paid_at=paid_at,
        carrier_id=account.carrier_id,
    )
    finance_ledger.append(PayloadKind.SETTLEMENT, result.to_payload())
    account.history.append(result)
    logger.info(
        "Settled %s: entitlement %s, paid %s, final %s, surplus %s",
        shipment_id, format_cents(entitlement), format_cents(paid),
        format_cents(final_payment), format_cents(surplus_carried),
    )
    return result


def reward_ai_service(
    finance_ledger: Ledger,
    carrier_id: str,
    shipment_id: str,
    amount: int,
    paid_at: float = 0.0,
) -> LedgerRecord:
    """
    Carrier pays the AI service once the shipment is settled.

    Raises:
        NotSettledError: no Settlement record for the shipment.
    """
    if settlement_for(finance_ledger, shipment_id) is None:
        raise NotSettledError(f"shipment {shipment_id} is not settled; reward withheld")
    if amount < 0:
        raise FinanceError("reward amount must be >= 0")
    record = finance_ledger.append(
        PayloadKind.REWARD,
        {
            "carrier_id": carrier_id,
            "shipment_id": shipment_id,
            "payee": AI_SERVICE,
            "amount": amount,
            "paid_at": float(paid_at),
        },
    )
    logger.info("Reward %s from %s to %s for %s", format_cents(amount), carrier_id, AI_SERVICE, shipment_id)
    return record


def record_repayment(
    finance_ledger: Ledger,
    shipment_id: str,
    payer: str,
    payee: str,
    amount: int,
    paid_at: float,
) -> LedgerRecord:
    """Single payment record: shipper to bank after factoring, or shipper to carrier on open account."""
    if amount < 0:
        raise FinanceError("repayment amount must be >= 0")
    return finance_ledger.append(
        PayloadKind.REPAYMENT,
        {"shipment_id": shipment_id, "payer": payer, "payee": payee, "amount": amount, "paid_at": float(paid_at)},
    )


def rebuild_account(finance_ledger: Ledger, carrier_id: str) -> CarrierAccount:
    """Carrier account replayed from the ledger's installments and settlements."""
    account = CarrierAccount(carrier_id)
    for record in finance_ledger.records:
        if record.payload_kind is PayloadKind.INSTALLMENT:
            payload = record.payload()
            if payload["carrier_id"] == carrier_id:
                account.surplus_balance -= payload["surplus_applied"]
        elif record.payload_kind is PayloadKind.SETTLEMENT:
            result = SettlementResult.from_payload(record.payload())
            if result.carrier_id == carrier_id:
                account.surplus_balance += result.surplus_carried - result.surplus_applied
                account.history.append(result)
    return account
