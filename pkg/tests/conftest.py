# tests/conftest.py

from pathlib import Path

import pytest

from freight_ledger.contracts import ChargeDefinition, CompKind, PlanKind, Port, PortRole, ServiceContract, ShippingLane
from freight_ledger.events import Milestone

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def scenarios_dir():
    return SCENARIOS


@pytest.fixture
def golden_path():
    return SCENARIOS / "golden.json"


@pytest.fixture
def lane():
    # CNSHA → SGSIN → NLRTM, one free dwell day at SGSIN
    return ShippingLane(
        "CNSHA-NLRTM",
        (
            Port("CNSHA", PortRole.ORIGIN),
            Port("SGSIN", PortRole.TRANSSHIPMENT),
            Port("NLRTM", PortRole.DESTINATION),
        ),
        {"SGSIN": 1},
    )


@pytest.fixture
def contract():
    return ServiceContract(
        contract_id="SC-1",
        shipper_id="shipper",
        carrier_id="carrier",
        lane_id="CNSHA-NLRTM",
        charges=(
            ChargeDefinition("BASE_FREIGHT", PlanKind.PLANNED, CompKind.FIXED, {"flat_amount": 9000}),
            ChargeDefinition(
                "DWELL_EXCESS_FEE",
                PlanKind.UNPLANNED,
                CompKind.VARIABLE,
                {"base_per_day": 1000, "increment_per_day": 1000},
                Milestone.departure("SGSIN"),
            ),
        ),
        shipments=("SHP-1",),
    )
