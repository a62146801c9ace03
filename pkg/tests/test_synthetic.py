# tests/test_synthetic.py

import json

import pytest

from freight_ledger.contracts import ShippingLane
from freight_ledger.errors import ScenarioError
from freight_ledger.events import EventStatus, Milestone, dwell_time
from freight_ledger.evaluation import DwellModelEvaluator
from freight_ledger.features import training_sequences
from freight_ledger.rnn import TrainingConfig
from freight_ledger.synthetic import SyntheticDataSpec, generate_synthetic, load_dataset, save_dataset


@pytest.fixture
def onehop_spec(scenarios_dir):
    data = json.loads((scenarios_dir / "synthetic_onehop.json").read_text(encoding="utf-8"))
    return SyntheticDataSpec.from_dict(data)


def _small(spec, shipments):
    return SyntheticDataSpec.from_dict({**spec.to_dict(), "shipments": shipments})


def test_classes_are_balanced_at_24h(onehop_spec):
    data = generate_synthetic(_small(onehop_spec, 400))
    labels = data.labels(24)
    assert len(labels) == 400
    assert 0.4 <= sum(labels.values()) / len(labels) <= 0.6


def test_labels_match_the_event_stream(onehop_spec):
    data = generate_synthetic(_small(onehop_spec, 50))
    for shipment_id, hours in data.dwell_hours.items():
        assert dwell_time(data.timeline, shipment_id, "SGSIN", status=EventStatus.ACTUAL) == pytest.approx(hours)
        assert hours >= 1.0


def test_generation_is_deterministic(onehop_spec):
    spec = _small(onehop_spec, 30)
    assert generate_synthetic(spec).to_dict() == generate_synthetic(spec).to_dict()
    other = SyntheticDataSpec.from_dict({**spec.to_dict(), "seed": 99})
    assert generate_synthetic(other).dwell_hours != generate_synthetic(spec).dwell_hours


def test_emissions_are_time_ordered(onehop_spec):
    data = generate_synthetic(_small(onehop_spec, 20))
    emitted = [e.emitted_at for e in data.events]
    assert emitted == sorted(emitted)
    assert [e.emission_seq for e in data.events] == list(range(len(data.events)))


def test_saved_dataset_loads_back(tmp_path, onehop_spec):
    data = generate_synthetic(_small(onehop_spec, 10))
    path = tmp_path / "onehop.dataset.json"
    save_dataset(data, path)
    loaded = load_dataset(path)
    assert loaded.dwell_hours == data.dwell_hours
    assert loaded.events == data.events


def test_bad_specs(onehop_spec):
    with pytest.raises(ScenarioError):
        SyntheticDataSpec.from_dict({**onehop_spec.to_dict(), "colour": "red"})
    with pytest.raises(ScenarioError):
        _small(onehop_spec, -1)
    direct = ShippingLane.from_dict(
        {
            "lane_id": "CNSHA-NLRTM",
            "ports": [{"port_code": "CNSHA", "role": "Origin"}, {"port_code": "NLRTM", "role": "Destination"}],
            "dwell_limit_days": {},
        }
    )
    with pytest.raises(ScenarioError):
        SyntheticDataSpec(direct)


def test_dwell_classifier_beats_chance(onehop_spec):
    data = generate_synthetic(_small(onehop_spec, 1000))
    lane = data.spec.lane
    arrival = Milestone.arrival("SGSIN")
    dataset = training_sequences(data.timeline, lane, arrival, data.labels(24), data.contexts)
    result = DwellModelEvaluator(config=TrainingConfig(hidden_dim=8, epochs=150)).evaluate(dataset, 24, seed=0)
    assert result["test"].balanced_accuracy >= 0.65
