# tests/test_evaluation.py

import numpy as np
import pandas as pd
import pytest

from freight_ledger.contracts import ShippingLane
from freight_ledger.events import Milestone
from freight_ledger.evaluation import DwellModelEvaluator, milestone_report, stratified_split, threshold_labels
from freight_ledger.registry import AccuracyRegistry
from freight_ledger.rnn import DwellModel, TrainingConfig
from freight_ledger.synthetic import SyntheticDataSpec, generate_synthetic


@pytest.fixture
def dummy_data():
    # 30 sequences of class 0, 10 of class 1; the class is the sign of x[0]
    dataset = []
    for i in range(40):
        label = int(i >= 30)
        dataset.append((np.full((2, 3), 1.0 if label else -1.0), label))
    return dataset


def _sign_model(threshold_hours=24):
    """Hand-built model scoring positive first features as class 1."""
    model = DwellModel.zeros(input_dim=3, hidden_dim=1, threshold_hours=threshold_hours)
    model.W_xh[0, 0] = 5.0
    model.w_o[0] = 5.0
    return model


def test_stratified_split_keeps_ratio(dummy_data):
    train_set, test_set = stratified_split(dummy_data, test_fraction=0.2, seed=1)
    assert len(train_set) + len(test_set) == 40
    assert sum(label for _, label in test_set) == 2
    assert sum(1 - label for _, label in test_set) == 6
    again = stratified_split(dummy_data, test_fraction=0.2, seed=1)
    assert [id(s) for s, _ in again[1]] == [id(s) for s, _ in test_set]


def test_stratified_split_rejects_bad_fraction(dummy_data):
    with pytest.raises(ValueError):
        stratified_split(dummy_data, test_fraction=1.0)


def test_dwell_evaluator_pipeline(dummy_data):
    calls = []

    def fake_train(dataset, threshold_hours, config, seed):
        calls.append((len(dataset), threshold_hours, seed))
        return _sign_model(threshold_hours)

    evaluator = DwellModelEvaluator(train_fn=fake_train, config=TrainingConfig(epochs=1))
    out = evaluator.evaluate(dummy_data, 48, seed=3)
    assert calls == [(32, 48, 3)]
    assert out["test"].balanced_accuracy == 1.0
    assert out["train"].balanced_accuracy == 1.0
    assert out["confusion"] == {"TP": 2, "FN": 0, "TN": 6, "FP": 0}


def test_threshold_labels():
    assert threshold_labels({"A": 24.0, "B": 24.5, "C": 80.0}, 24) == {"A": 0, "B": 1, "C": 1}


def test_milestone_report_fills_registry():
    lane = ShippingLane.from_dict(
        {
            "lane_id": "L",
            "ports": [
                {"port_code": "CNSHA", "role": "Origin"},
                {"port_code": "SGSIN", "role": "Transshipment"},
                {"port_code": "NLRTM", "role": "Destination"},
            ],
            "dwell_limit_days": {"SGSIN": 1},
        }
    )
    data = generate_synthetic(SyntheticDataSpec(lane, shipments=60, seed=4))
    registry = AccuracyRegistry()
    evaluator = DwellModelEvaluator(config=TrainingConfig(hidden_dim=2, epochs=5))
    df = milestone_report(
        data.timeline,
        lane,
        data.dwell_hours,
        data.contexts,
        thresholds=(24,),
        seed=0,
        evaluator=evaluator,
        registry=registry,
        registry_target="DWELL_EXCESS_FEE",
        registry_threshold=24,
        milestones=[Milestone.departure("CNSHA"), Milestone.arrival("SGSIN")],
    )
    assert isinstance(df, pd.DataFrame)
    assert list(df["milestone"]) == ["VesselDeparture@CNSHA", "VesselArrival@SGSIN"]
    assert (df["train_size"] + df["test_size"] == 60).all()
    assert df["balanced_accuracy"].between(0.0, 1.0).all()
    assert len(registry) == 2
    assert registry.accuracy("L", "VesselArrival@SGSIN", "DWELL_EXCESS_FEE") == pytest.approx(
        df["balanced_accuracy"].iloc[1]
    )
