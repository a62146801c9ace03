# tests/test_simulation.py

import copy
import dataclasses
import hashlib
import json
from decimal import Decimal
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freight_ledger.errors import ScenarioError
from freight_ledger.events import Milestone
from freight_ledger.features import feature_dim
from freight_ledger.finance import installments, rebuild_account
from freight_ledger.invoice import ChargeBasis
from freight_ledger.ledger import PayloadKind, verify_snapshot
from freight_ledger.relay import imported_payload
from freight_ledger.rnn import DwellModel, save_model
from freight_ledger.simulation import PaymentMethod, Scenario, compare_methods, invoice_at, load_scenario, run


@pytest.fixture
def golden(golden_path):
    return load_scenario(golden_path)


@pytest.fixture
def golden_data(golden_path):
    return json.loads(golden_path.read_text(encoding="utf-8"))


@pytest.fixture
def twohop(scenarios_dir):
    return load_scenario(scenarios_dir / "twohop.json")


def _with_rule(data, **rule):
    data = copy.deepcopy(data)
    data["policies"][0]["charge_rules"]["DWELL_EXCESS_FEE"].update(rule)
    return Scenario.from_dict(data)


def _carrier_flows(result):
    return [
        (f.day, f.amount, f.kind)
        for f in result.report.flows[result.method]
        if f.payee == "carrier"
    ]


def test_accelerated_golden_cash_flow(golden):
    result = run(golden)
    assert _carrier_flows(result) == [(4, 8280, "installment"), (4, 920, "installment")]
    summary = result.report.summaries[PaymentMethod.ACCELERATED_FACTORING]
    assert summary.carrier_cash == 9200
    assert summary.first_cash_day == 4
    assert summary.invoice_total == 10_000
    (settlement,) = result.settlements
    assert settlement.final_payment == 0
    assert settlement.paid_at == 744


def test_classic_and_open_account(golden):
    classic = run(golden, "classic")
    assert _carrier_flows(classic) == [(31, 9400, "factoring")]
    open_account = run(golden, PaymentMethod.OPEN_ACCOUNT)
    assert _carrier_flows(open_account) == [(90, 10_000, "open-account")]
    assert open_account.finance.query(PayloadKind.POLICY) == []


def test_comparison(golden):
    comparison = compare_methods(golden)
    assert comparison.margin_delta == 200
    assert comparison.acceleration_days == 27
    assert comparison.summary(PaymentMethod.ACCELERATED_FACTORING).bank_margin == 800
    assert comparison.summary(PaymentMethod.CLASSIC_FACTORING).bank_margin == 600
    rendered = comparison.render()
    assert "$92.00" in rendered
    assert "27 days" in rendered
    data = comparison.to_dict()
    assert data["comparison"] == {"margin_delta": 200, "acceleration_days": 27}


def test_reward_and_repayment(golden):
    result = run(golden)
    flows = result.report.flows[PaymentMethod.ACCELERATED_FACTORING]
    assert [(f.payer, f.payee, f.amount, f.day) for f in flows if f.kind == "reward"] == [("carrier", "ai-service", 50, 31)]
    assert [(f.payer, f.payee, f.amount, f.day) for f in flows if f.kind == "repayment"] == [("shipper", "bank", 10_000, 90)]


def test_stricter_gate_defers_to_departure(golden_data):
    result = run(_with_rule(golden_data, accuracy_threshold="0.75"))
    assert _carrier_flows(result) == [(4, 8280, "installment"), (18, 920, "installment")]
    deferred = [r for r in installments(result.finance, "SHP-001") if r.charge_code == "DWELL_EXCESS_FEE"]
    assert [r.basis for r in deferred] == [ChargeBasis.ACTUAL]
    assert result.settlements[0].final_payment == 0


def test_predictions_off_matches_the_strict_gate(golden_data):
    strict = run(_with_rule(golden_data, accuracy_threshold="0.75"))
    off = run(_with_rule(golden_data, include_predicted=False))
    assert _carrier_flows(off) == _carrier_flows(strict)


def test_runs_are_deterministic(golden):
    first, second = run(golden), run(golden)
    assert first.state_hashes == second.state_hashes
    assert first.report.to_json() == second.report.to_json()


def test_every_iteration_is_relayed(golden):
    result = run(golden)
    invoices = result.logistics.query(PayloadKind.PARTIAL_INVOICE)
    imported = result.finance.query(PayloadKind.IMPORTED_INVOICE)
    assert len(invoices) == len(imported) == 7
    assert result.invoices[-1].final
    assert len(result.finance.query(PayloadKind.IMPORTED_REGISTRY)) == 1


def test_ai_estimates_are_on_the_logistics_ledger(golden):
    result = run(golden)
    sources = {r.payload()["source"] for r in result.logistics.query(PayloadKind.MILESTONE_EVENT)}
    assert "ai-service" in sources


def test_snapshots_verify(tmp_path, golden):
    result = run(golden)
    logistics_path, finance_path = result.save_snapshots(tmp_path)
    assert logistics_path.name == "acceleratedfactoring-STL.flgr"
    assert verify_snapshot(logistics_path)["head"] == result.state_hashes["logistics"]
    assert verify_snapshot(finance_path)["records"] == len(result.finance)


def test_twohop_surplus_is_netted(twohop):
    result = run(twohop)
    first, second = result.settlements
    assert (first.entitlement, first.total_paid_before_final, first.surplus_carried) == (22_080, 22_540, 460)
    assert first.paid_at == 784
    assert (second.entitlement, second.final_payment, second.cash_amount) == (19_320, 920, 920)

    netted = [r for r in installments(result.finance, "SHP-102") if r.surplus_applied]
    assert [(r.paid_amount, r.surplus_applied, r.cash_amount) for r in netted] == [(18_400, 460, 17_940)]
    assert result.report.summaries[PaymentMethod.ACCELERATED_FACTORING].carrier_cash == 41_400


def test_twohop_predictions_are_priced(twohop):
    paid = [
        (r.charge_code, r.paid_amount)
        for r in installments(run(twohop).finance, "SHP-101")
        if r.basis is ChargeBasis.PREDICTED
    ]
    assert paid == [("DWELL_EXCESS_FEE_SGSIN", 2_300), ("DWELL_EXCESS_FEE_LKCMB", 1_840)]


def test_invoice_at_a_milestone(golden):
    invoice = invoice_at(golden, "SHP-001", Milestone.departure("CNSHA"))
    assert invoice.iteration == 2
    assert invoice.total_actual == 9000
    assert invoice.line("DWELL_EXCESS_FEE").basis is ChargeBasis.PREDICTED
    later = invoice_at(golden, "SHP-001", Milestone.departure("SGSIN"))
    assert later.line("DWELL_EXCESS_FEE").basis is ChargeBasis.ACTUAL
    with pytest.raises(ScenarioError):
        invoice_at(golden, "SHP-001", Milestone.arrival("LKCMB"))


def test_scenario_validation(golden_data):
    data = copy.deepcopy(golden_data)
    data["meta"]["colour"] = "red"
    with pytest.raises(ScenarioError, match="colour"):
        Scenario.from_dict(data)

    data = copy.deepcopy(golden_data)
    data["events"][0]["shipment_id"] = "SHP-999"
    with pytest.raises(ScenarioError, match="SHP-999"):
        Scenario.from_dict(data)

    data = copy.deepcopy(golden_data)
    data["events"][2]["milestone"] = "VesselArrival@LKCMB"
    with pytest.raises(ScenarioError, match="LKCMB"):
        Scenario.from_dict(data)

    data = copy.deepcopy(golden_data)
    data["predictor"]["predictions"][0]["charge_code"] = "DEMURRAGE"
    with pytest.raises(ScenarioError):
        Scenario.from_dict(data)

    with pytest.raises(ScenarioError):
        PaymentMethod.parse("barter")


def test_workflow_order_on_the_finance_ledger(golden):
    result = run(golden)
    logistics_invoices = result.logistics.query(PayloadKind.PARTIAL_INVOICE)
    imports = result.finance.query(PayloadKind.IMPORTED_INVOICE)
    assert [i.payload()["payload_hash"] for i in imports] == [
        hashlib.sha256(r.payload_bytes).digest() for r in logistics_invoices
    ]

    imported = set()
    final_imported = set()
    paid_iterations = set()
    for record in result.finance.records:
        kind, payload = record.payload_kind, record.payload()
        if kind is PayloadKind.IMPORTED_INVOICE:
            invoice = imported_payload(record)
            imported.add((invoice["shipment_id"], invoice["iteration"]))
            if invoice["final"]:
                final_imported.add(invoice["shipment_id"])
        elif kind is PayloadKind.INSTALLMENT:
            assert (payload["shipment_id"], payload["iteration"]) in imported
            paid_iterations.add(payload["iteration"])
        elif kind is PayloadKind.SETTLEMENT:
            assert payload["shipment_id"] in final_imported
    assert paid_iterations == {1, 2}
    assert final_imported == {"SHP-001"}


@pytest.fixture
def live_model_scenario(golden_data, golden, tmp_path):
    lane = golden.lanes["CNSHA-NLRTM"]
    files = {}
    for threshold, bias in ((24, 5.0), (48, -5.0), (72, -5.0)):
        model = DwellModel.zeros(feature_dim(lane), 2, threshold)
        path = tmp_path / f"dep-cnsha-{threshold}.json"
        save_model(dataclasses.replace(model, b_o=np.array([bias])), path)
        files[str(threshold)] = path.name
    data = copy.deepcopy(golden_data)
    data["predictor"]["predictions"] = []
    data["predictor"]["models"] = [
        {"lane_id": "CNSHA-NLRTM", "milestone": "VesselDeparture@CNSHA", "charge_code": "DWELL_EXCESS_FEE", "files": files}
    ]
    return Scenario.from_dict(data, base_dir=tmp_path)


def test_invoice_at_matches_the_relayed_invoices(live_model_scenario):
    result = run(live_model_scenario)
    assert len(result.invoices) == 7
    for relayed in result.invoices:
        replayed = invoice_at(live_model_scenario, relayed.shipment_id, relayed.trigger_milestone)
        assert replayed.to_dict() == relayed.to_dict()

    departed = invoice_at(live_model_scenario, "SHP-001", Milestone.departure("CNSHA"))
    # the >24h model fires alone: two dwell days, one day past the limit
    assert departed.line("DWELL_EXCESS_FEE").basis is ChargeBasis.PREDICTED
    assert departed.total_predicted == 1000


GOLDEN_TEMPLATE = json.loads((Path(__file__).resolve().parent.parent / "scenarios" / "golden.json").read_text(encoding="utf-8"))

shipment_plan = st.fixed_dictionaries(
    {
        "dwell_hours": st.integers(min_value=1, max_value=150),
        "predicted_days": st.none() | st.integers(min_value=1, max_value=5),
        "score": st.floats(min_value=0.0, max_value=1.0),
    }
)


def _generated_scenario(plans, discount, threshold, fraction, accuracy):
    data = copy.deepcopy(GOLDEN_TEMPLATE)
    contract = data["contracts"][0]
    contract["shipments"] = [f"SHP-{n}" for n in range(len(plans))]
    rule = data["policies"][0]["charge_rules"]["DWELL_EXCESS_FEE"]
    rule.update(accuracy_threshold=threshold, predicted_fraction=fraction)
    data["policies"][0]["discount_rate"] = discount
    data["predictor"]["registry"][0]["balanced_accuracy"] = accuracy
    data["predictor"]["predictions"] = []
    data["events"] = []
    for n, plan in enumerate(plans):
        sid, t0 = f"SHP-{n}", 2000 * n
        departed = 400 + plan["dwell_hours"]
        planned = [
            ("ContainerLoadedOnVessel", 96), ("VesselDeparture@CNSHA", 100), ("VesselArrival@SGSIN", 400),
            ("VesselDeparture@SGSIN", 430), ("VesselArrival@NLRTM", 700), ("ContainerDischarge", 710),
            ("DeliveryComplete", 720),
        ]
        actual = [
            ("ContainerLoadedOnVessel", 96), ("VesselDeparture@CNSHA", 100), ("VesselArrival@SGSIN", 400),
            ("VesselDeparture@SGSIN", departed), ("VesselArrival@NLRTM", departed + 270),
            ("ContainerDischarge", departed + 280), ("DeliveryComplete", departed + 290),
        ]
        for status, steps in (("Planned", planned), ("Actual", actual)):
            for milestone, hours in steps:
                data["events"].append(
                    {
                        "shipment_id": sid, "milestone": milestone, "status": status, "source": "carrier",
                        "occurrence_time": t0 + hours, "emitted_at": t0 if status == "Planned" else t0 + hours,
                    }
                )
        if plan["predicted_days"] is not None:
            data["predictor"]["predictions"].append(
                {
                    "shipment_id": sid,
                    "target": {"kind": "DwellDays", "port": "SGSIN"},
                    "value": plan["predicted_days"],
                    "score": plan["score"],
                    "produced_at_milestone": "VesselDeparture@CNSHA",
                    "charge_code": "DWELL_EXCESS_FEE",
                }
            )
    return Scenario.from_dict(data)


@settings(max_examples=60, deadline=None)
@given(
    plans=st.lists(shipment_plan, min_size=1, max_size=3),
    discount=st.sampled_from(["0", "0.05", "0.08", "0.2"]),
    threshold=st.sampled_from(["0", "0.5", "0.7", "0.75", "1"]),
    fraction=st.sampled_from(["0.5", "1"]),
    accuracy=st.floats(min_value=0.0, max_value=1.0),
)
def test_scenario_cash_equals_entitlements_plus_open_surplus(plans, discount, threshold, fraction, accuracy):
    result = run(_generated_scenario(plans, discount, threshold, fraction, accuracy))
    carrier_cash = sum(
        f.amount for f in result.report.flows[result.method]
        if f.payee == "carrier" and f.kind in ("installment", "settlement")
    )
    finals = {i.shipment_id: i for i in result.invoices if i.final}
    assert len(result.settlements) == len(plans)
    for settlement in result.settlements:
        total = finals[settlement.shipment_id].total_actual
        assert settlement.entitlement == total * (1 - Decimal(discount)) // 1
    open_surplus = rebuild_account(result.finance, "carrier").surplus_balance
    assert open_surplus >= 0
    assert carrier_cash == sum(s.entitlement for s in result.settlements) + open_surplus
