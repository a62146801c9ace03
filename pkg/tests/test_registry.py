# tests/test_registry.py

import pytest

from freight_ledger.codec import decode, encode
from freight_ledger.errors import EventDataError, MetricError
from freight_ledger.events import Milestone
from freight_ledger.registry import AccuracyRegistry, EvalResult, update_registry

LANE = "CNSHA-NLRTM"


def test_lookup_by_milestone_or_key():
    registry = AccuracyRegistry()
    registry.set(LANE, Milestone.departure("CNSHA"), "DWELL_EXCESS_FEE", EvalResult(0.7027, 200))
    assert registry.accuracy(LANE, "VesselDeparture@CNSHA", "DWELL_EXCESS_FEE") == pytest.approx(0.7027)
    assert registry.accuracy(LANE, Milestone.arrival("SGSIN"), "DWELL_EXCESS_FEE") is None
    assert len(registry) == 1


def test_update_replaces_entry():
    registry = AccuracyRegistry()
    update_registry(registry, LANE, Milestone.arrival("SGSIN"), "DWELL_EXCESS_FEE", EvalResult(0.6, 100))
    update_registry(registry, LANE, Milestone.arrival("SGSIN"), "DWELL_EXCESS_FEE", EvalResult(0.8, 120))
    assert registry.get(LANE, Milestone.arrival("SGSIN"), "DWELL_EXCESS_FEE") == EvalResult(0.8, 120)
    assert len(registry) == 1


def test_payload_survives_the_codec():
    registry = AccuracyRegistry()
    registry.set(LANE, Milestone.arrival("SGSIN"), "DWELL_EXCESS_FEE", EvalResult(0.74, 90))
    registry.set(LANE, Milestone.departure("CNSHA"), "DWELL_EXCESS_FEE", EvalResult(0.72, 90))
    restored = AccuracyRegistry.from_payload(decode(encode(registry.to_payload())))
    assert restored == registry
    assert [row["milestone"] for row in restored.rows()] == ["VesselArrival@SGSIN", "VesselDeparture@CNSHA"]


def test_invalid_entries():
    with pytest.raises(MetricError):
        EvalResult(1.2, 10)
    with pytest.raises(MetricError):
        EvalResult(0.5, 0)
    with pytest.raises(MetricError):
        AccuracyRegistry.from_payload({"entries": [{"lane_id": LANE}]})
    with pytest.raises(EventDataError):
        AccuracyRegistry().set(LANE, "Sailing@SGSIN", "X", EvalResult(0.5, 1))
