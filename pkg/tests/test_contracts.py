# tests/test_contracts.py

import pytest

from freight_ledger.contracts import ChargeDefinition, CompKind, PlanKind, Port, PortRole, ServiceContract, ShippingLane
from freight_ledger.errors import ContractError
from freight_ledger.events import Milestone
from freight_ledger.identity import NetworkIdentity, build_network, sign, verify


def test_journey_of_a_one_hop_lane(lane):
    assert [m.key for m in lane.journey()] == [
        "VesselDeparture@CNSHA",
        "VesselArrival@SGSIN",
        "VesselDeparture@SGSIN",
        "VesselArrival@NLRTM",
    ]
    assert lane.dwell_limit("SGSIN") == 1
    with pytest.raises(ContractError):
        lane.dwell_limit("NLRTM")
    with pytest.raises(ContractError):
        lane.index("LKCMB")


def test_lane_validation():
    origin, hub, dest = Port("CNSHA", PortRole.ORIGIN), Port("SGSIN", PortRole.TRANSSHIPMENT), Port("NLRTM", PortRole.DESTINATION)
    with pytest.raises(ContractError):
        ShippingLane("L", (origin,))
    with pytest.raises(ContractError):
        ShippingLane("L", (hub, origin, dest), {"SGSIN": 1})
    with pytest.raises(ContractError):
        ShippingLane("L", (origin, hub, dest))
    with pytest.raises(ContractError):
        ShippingLane("L", (origin, hub, dest), {"SGSIN": 0})
    with pytest.raises(ContractError):
        Port("sgsin", PortRole.TRANSSHIPMENT)


def test_lane_and_contract_round_trip(lane, contract):
    assert ShippingLane.from_dict(lane.to_dict()) == lane
    assert ServiceContract.from_dict(contract.to_dict()) == contract


def test_dwell_port_follows_the_trigger(lane, contract):
    assert contract.charge("DWELL_EXCESS_FEE").dwell_port(lane) == "SGSIN"
    assert contract.charge("DWELL_EXCESS_FEE").is_dwell_fee
    with pytest.raises(ContractError):
        contract.charge("DEMURRAGE")


def test_charge_validation():
    with pytest.raises(ContractError):
        ChargeDefinition("BASE_FREIGHT", PlanKind.PLANNED, CompKind.FIXED, {})
    with pytest.raises(ContractError):
        ChargeDefinition("CANAL", PlanKind.UNPLANNED, CompKind.FIXED, {"flat_amount": 100})
    with pytest.raises(ContractError):
        ChargeDefinition("FUEL", PlanKind.UNPLANNED, CompKind.VARIABLE, {"base_per_day": 1, "increment_per_day": 1})
    with pytest.raises(ContractError):
        ChargeDefinition("BASE_FREIGHT", PlanKind.PLANNED, CompKind.FIXED, {"flat_amount": -1})
    with pytest.raises(ContractError):
        ServiceContract("SC", "s", "c", "L", (), currency="dollars")


def test_quorum_must_be_a_strict_majority():
    build_network("STL", ["carrier", "shipper", "port-authority"], 2, seed=1)
    with pytest.raises(ContractError):
        build_network("STL", ["carrier", "shipper", "port-authority", "terminal"], 2, seed=1)
    with pytest.raises(ContractError):
        NetworkIdentity("STL", (), 1)


def test_keys_are_seeded_and_signatures_verify():
    identity, keys = build_network("STL", ["carrier", "shipper"], 2, seed=1)
    again, _ = build_network("STL", ["carrier", "shipper"], 2, seed=1)
    other, _ = build_network("STL", ["carrier", "shipper"], 2, seed=2)
    assert identity == again
    assert identity != other
    signature = sign(keys["carrier"], b"invoice")
    verify_key = identity.verify_keys()["carrier"]
    assert verify(verify_key, b"invoice", signature)
    assert not verify(verify_key, b"invoices", signature)
    assert not verify(identity.verify_keys()["shipper"], b"invoice", signature)
