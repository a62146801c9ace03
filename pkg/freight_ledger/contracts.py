"""Shipping lanes, ports and the shipper–carrier service contract."""

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Tuple

from freight_ledger.errors import ContractError
from freight_ledger.events import Milestone

DWELL_EXCESS_FEE = "DWELL_EXCESS_FEE"
BASE_FREIGHT = "BASE_FREIGHT"

_PORT_CODE = re.compile(r"^[A-Z0-9]+$")
_CURRENCY = re.compile(r"^[A-Z]{3}$")


class PortRole(str, Enum):
    ORIGIN = "Origin"
    TRANSSHIPMENT = "Transshipment"
    DESTINATION = "Destination"


@dataclass(frozen=True)
class Port:
    port_code: str
    role: PortRole

    def __post_init__(self) -> None:
        object.__setattr__(self, "role", PortRole(self.role))
        if not _PORT_CODE.match(self.port_code or ""):
            raise ContractError(f"port code {self.port_code!r} must be uppercase alphanumeric")


@dataclass(frozen=True)
class ShippingLane:
    lane_id: str
    ports: Tuple[Port, ...]
    dwell_limit_days: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ports", tuple(self.ports))
        if len(self.ports) < 2:
            raise ContractError(f"lane {self.lane_id} needs at least two ports")
        roles = [p.role for p in self.ports]
        if roles[0] is not PortRole.ORIGIN or roles[-1] is not PortRole.DESTINATION:
            raise ContractError(f"lane {self.lane_id} must start at an Origin and end at a Destination")
        if any(r is not PortRole.TRANSSHIPMENT for r in roles[1:-1]):
            raise ContractError(f"lane {self.lane_id} has a non-transshipment intermediate port")
        codes = self.port_codes
        if len(set(codes)) != len(codes):
            raise ContractError(f"lane {self.lane_id} visits a port twice")
        for code, limit in self.dwell_limit_days.items():
            if code not in codes:
                raise ContractError(f"dwell limit for unknown port {code} on lane {self.lane_id}")
            if isinstance(limit, bool) or not isinstance(limit, int) or limit < 1:
                raise ContractError(f"dwell limit at {code} must be a positive integer")
        for port in self.transshipments:
            if port.port_code not in self.dwell_limit_days:
                raise ContractError(f"lane {self.lane_id} has no dwell limit for {port.port_code}")

    @property
    def port_codes(self) -> List[str]:
        return [p.port_code for p in self.ports]

    @property
    def origin(self) -> Port:
        return self.ports[0]

    @property
    def destination(self) -> Port:
        return self.ports[-1]

    @property
    def transshipments(self) -> Tuple[Port, ...]:
        return self.ports[1:-1]

    def index(self, port_code: str) -> int:
        try:
            return self.port_codes.index(port_code)
        except ValueError:
            raise ContractError(f"port {port_code} is not on lane {self.lane_id}") from None

    def dwell_limit(self, port_code: str) -> int:
        self.index(port_code)
        try:
            return self.dwell_limit_days[port_code]
        except KeyError:
            raise ContractError(f"no dwell limit for {port_code} on lane {self.lane_id}") from None

    def journey(self) -> List[Milestone]:
        """Vessel milestones in travel order: dep(origin), arr(T1), dep(T1), ..., arr(destination)."""
        codes = self.port_codes
        steps = [Milestone.departure(codes[0])]
        for code in codes[1:-1]:
            steps.append(Milestone.arrival(code))
            steps.append(Milestone.departure(code))
        steps.append(Milestone.arrival(codes[-1]))
        return steps

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lane_id": self.lane_id,
            "ports": [{"port_code": p.port_code, "role": p.role.value} for p in self.ports],
            "dwell_limit_days": dict(self.dwell_limit_days),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ShippingLane":
        try:
            ports = tuple(Port(p["port_code"], PortRole(p["role"])) for p in data["ports"])
            return cls(data["lane_id"], ports, dict(data.get("dwell_limit_days", {})))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ContractError):
                raise
            raise ContractError(f"invalid lane definition: {exc}") from exc


class PlanKind(str, Enum):
    PLANNED = "Planned"
    UNPLANNED = "Unplanned"


class CompKind(str, Enum):
    FIXED = "Fixed"
    VARIABLE = "Variable"


@dataclass(frozen=True)
class ChargeDefinition:
    """
    One charge of the service contract.

    Planned charges apply to every shipment, unplanned ones only when their
    trigger occurs. Fixed charges use ``flat_amount``; the only variable
    formula is the dwell excess fee (``base_per_day``, ``increment_per_day``)
    whose trigger names the port the container dwells at.
    """

    charge_code: str
    plan_kind: PlanKind
    comp_kind: CompKind
    rate_params: Mapping[str, int] = field(default_factory=dict)
    trigger: Optional[Milestone] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "plan_kind", PlanKind(self.plan_kind))
        object.__setattr__(self, "comp_kind", CompKind(self.comp_kind))
        if not self.charge_code:
            raise ContractError("charge_code must be nonempty")
        for name, value in self.rate_params.items():
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise ContractError(f"{self.charge_code}: rate {name} must be a non-negative integer")
        if self.comp_kind is CompKind.FIXED:
            if "flat_amount" not in self.rate_params:
                raise ContractError(f"{self.charge_code}: Fixed charge requires flat_amount")
            if self.plan_kind is PlanKind.UNPLANNED and self.trigger is None:
                raise ContractError(f"{self.charge_code}: unplanned Fixed charge requires a trigger")
        elif self.is_dwell_fee:
            for name in ("base_per_day", "increment_per_day"):
                if self.rate_params.get(name, 0) <= 0:
                    raise ContractError(f"{self.charge_code}: {name} must be > 0")
        else:
            raise ContractError(
                f"{self.charge_code}: the only Variable charge supported is {DWELL_EXCESS_FEE}"
            )

    @property
    def is_dwell_fee(self) -> bool:
        return self.comp_kind is CompKind.VARIABLE and self.charge_code.startswith(DWELL_EXCESS_FEE)

    def dwell_port(self, lane: ShippingLane) -> str:
        """Port whose dwell this fee charges: the trigger's port, else the first transshipment."""
        if self.trigger is not None and self.trigger.port:
            lane.index(self.trigger.port)
            return self.trigger.port
        if not lane.transshipments:
            raise ContractError(f"{self.charge_code}: lane {lane.lane_id} has no transshipment port")
        return lane.transshipments[0].port_code

    def to_dict(self) -> Dict[str, Any]:
        return {
            "charge_code": self.charge_code,
            "plan_kind": self.plan_kind.value,
            "comp_kind": self.comp_kind.value,
            "rate_params": dict(self.rate_params),
            "trigger": self.trigger.key if self.trigger else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ChargeDefinition":
        trigger = data.get("trigger")
        return cls(
            charge_code=data["charge_code"],
            plan_kind=PlanKind(data["plan_kind"]),
            comp_kind=CompKind(data["comp_kind"]),
            rate_params=dict(data.get("rate_params", {})),
            trigger=Milestone.parse(trigger) if trigger else None,
        )


@dataclass(frozen=True)
class ServiceContract:
    contract_id: str
    shipper_id: str
    carrier_id: str
    lane_id: str
    charges: Tuple[ChargeDefinition, ...]
    currency: str = "USD"
    shipments: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "charges", tuple(self.charges))
        object.__setattr__(self, "shipments", tuple(self.shipments))
        codes = [c.charge_code for c in self.charges]
        if len(set(codes)) != len(codes):
            raise ContractError(f"contract {self.contract_id} repeats a charge_code")
        if not _CURRENCY.match(self.currency):
            raise ContractError(f"currency {self.currency!r} is not a 3-letter code")

    @property
    def charge_codes(self) -> List[str]:
        return [c.charge_code for c in self.charges]

    def charge(self, charge_code: str) -> ChargeDefinition:
        for definition in self.charges:
            if definition.charge_code == charge_code:
                return definition
        raise ContractError(f"contract {self.contract_id} has no charge {charge_code}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "contract_id": self.contract_id,
            "shipper_id": self.shipper_id,
            "carrier_id": self.carrier_id,
            "lane_id": self.lane_id,
            "charges": [c.to_dict() for c in self.charges],
            "currency": self.currency,
            "shipments": list(self.shipments),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ServiceContract":
        try:
            return cls(
                contract_id=data["contract_id"],
                shipper_id=data["shipper_id"],
                carrier_id=data["carrier_id"],
                lane_id=data["lane_id"],
                charges=tuple(ChargeDefinition.from_dict(c) for c in data["charges"]),
                currency=data.get("currency", "USD"),
                shipments=tuple(data.get("shipments", ())),
            )
        except (KeyError, TypeError) as exc:
            raise ContractError(f"invalid contract definition: {exc}") from exc
