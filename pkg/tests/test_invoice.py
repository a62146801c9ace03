# tests/test_invoice.py

import pytest

from freight_ledger.errors import ContractError, UnknownChargeError
from freight_ledger.events import CARRIER, EventStatus, Milestone, MilestoneEvent, MilestoneKind, Timeline
from freight_ledger.invoice import ChargeBasis, ChargeLine, PartialInvoice, compute_invoice, render_invoice
from freight_ledger.predicted import PredictedValue, PredictionTarget, TargetKind

DEPART_ORIGIN = Milestone.departure("CNSHA")
DELIVERED = Milestone(MilestoneKind.DELIVERY_COMPLETE)


def _actual(timeline, milestone, hours):
    timeline.record_event(MilestoneEvent("SHP-1", milestone, EventStatus.ACTUAL, CARRIER, hours, hours))


def _dwell_prediction(days, score=0.7):
    return PredictedValue(
        "SHP-1",
        PredictionTarget(TargetKind.DWELL_DAYS, "SGSIN"),
        days,
        score,
        DEPART_ORIGIN,
        "DWELL_EXCESS_FEE",
    )


def test_fixed_charge_only_when_nothing_predicted(lane, contract):
    invoice = compute_invoice(contract, lane, Timeline(), "SHP-1", [], 1, DEPART_ORIGIN)
    assert invoice.invoice_id == "SHP-1/1"
    assert [line.charge_code for line in invoice.lines] == ["BASE_FREIGHT"]
    assert invoice.total_actual == 9000
    assert invoice.total_predicted == 0
    assert not invoice.final


def test_predicted_dwell_line(lane, contract):
    invoice = compute_invoice(contract, lane, Timeline(), "SHP-1", [_dwell_prediction(2)], 1, DEPART_ORIGIN)
    line = invoice.line("DWELL_EXCESS_FEE")
    assert line.basis is ChargeBasis.PREDICTED
    assert line.amount == 1000
    assert line.confidence == pytest.approx(0.7)
    assert invoice.total == 10_000


def test_actual_dwell_replaces_prediction(lane, contract):
    timeline = Timeline()
    _actual(timeline, Milestone.arrival("SGSIN"), 400)
    _actual(timeline, Milestone.departure("SGSIN"), 440)
    invoice = compute_invoice(
        contract, lane, timeline, "SHP-1", [_dwell_prediction(5)], 4, Milestone.departure("SGSIN")
    )
    line = invoice.line("DWELL_EXCESS_FEE")
    # 40h is two started days, one past the limit
    assert line.basis is ChargeBasis.ACTUAL
    assert line.amount == 1000
    assert line.confidence == 1.0
    assert invoice.total_predicted == 0


def test_as_of_hides_the_departure(lane, contract):
    timeline = Timeline()
    _actual(timeline, Milestone.arrival("SGSIN"), 400)
    _actual(timeline, Milestone.departure("SGSIN"), 440)
    invoice = compute_invoice(
        contract, lane, timeline, "SHP-1", [_dwell_prediction(3)], 3, Milestone.arrival("SGSIN"), as_of=420
    )
    assert invoice.line("DWELL_EXCESS_FEE").basis is ChargeBasis.PREDICTED
    assert invoice.line("DWELL_EXCESS_FEE").amount == 3000


def test_final_invoice_drops_undeterminable_lines(lane, contract):
    invoice = compute_invoice(contract, lane, Timeline(), "SHP-1", [_dwell_prediction(2)], 6, DELIVERED)
    assert invoice.final
    assert invoice.line("DWELL_EXCESS_FEE") is None
    assert all(line.basis is ChargeBasis.ACTUAL for line in invoice.lines)


def test_prediction_for_unknown_charge(lane, contract):
    stray = PredictedValue(
        "SHP-1", PredictionTarget(TargetKind.DWELL_DAYS, "SGSIN"), 2, 0.9, DEPART_ORIGIN, "DEMURRAGE"
    )
    with pytest.raises(UnknownChargeError):
        compute_invoice(contract, lane, Timeline(), "SHP-1", [stray], 1, DEPART_ORIGIN)


def test_dwell_fee_needs_a_days_prediction(lane, contract):
    wrong = PredictedValue(
        "SHP-1",
        PredictionTarget(TargetKind.DWELL_CLASS, "SGSIN", threshold_hours=24),
        1,
        0.9,
        DEPART_ORIGIN,
        "DWELL_EXCESS_FEE",
    )
    with pytest.raises(ContractError):
        compute_invoice(contract, lane, Timeline(), "SHP-1", [wrong], 1, DEPART_ORIGIN)


def test_line_and_invoice_validation():
    with pytest.raises(ContractError):
        ChargeLine("X", 100, ChargeBasis.ACTUAL, 0.5)
    with pytest.raises(ContractError):
        ChargeLine("X", -1, ChargeBasis.PREDICTED, 0.5)
    with pytest.raises(ContractError):
        PartialInvoice("S/1", "S", 1, DELIVERED, (ChargeLine("X", 1, ChargeBasis.PREDICTED, 0.5),), True)


def test_tampered_totals_are_rejected(lane, contract):
    data = compute_invoice(contract, lane, Timeline(), "SHP-1", [_dwell_prediction(2)], 1, DEPART_ORIGIN).to_dict()
    assert PartialInvoice.from_dict(data).total == 10_000
    data["total_actual"] = 1
    with pytest.raises(ContractError):
        PartialInvoice.from_dict(data)


def test_render_lists_lines_and_totals(lane, contract):
    text = render_invoice(compute_invoice(contract, lane, Timeline(), "SHP-1", [_dwell_prediction(2)], 1, DEPART_ORIGIN))
    assert "BASE_FREIGHT" in text
    assert "$90.00" in text
    assert "total predicted $10.00" in text
