# tests/test_fusion.py

import pytest
from hypothesis import given
from hypothesis import strategies as st

from freight_ledger.events import AI_SERVICE, CARRIER, PORT_AUTHORITY, EventStatus, Milestone, MilestoneEvent, Timeline
from freight_ledger.fusion import aggregate_estimate, estimate_event_time, timeline_estimates

ARRIVAL = Milestone.arrival("SGSIN")


def test_weighted_mean_of_latest_estimates():
    estimates = [(CARRIER, 100.0), (PORT_AUTHORITY, 110.0), (CARRIER, 104.0)]
    assert aggregate_estimate(estimates) == pytest.approx(107.0)
    assert aggregate_estimate(estimates, {CARRIER: 3.0, PORT_AUTHORITY: 1.0}) == pytest.approx(105.5)


def test_fallback_and_nothing():
    assert aggregate_estimate([], fallback=96.0) == 96.0
    assert aggregate_estimate([]) is None


def test_bad_weights():
    with pytest.raises(ValueError):
        aggregate_estimate([(CARRIER, 1.0)], {CARRIER: -1.0})
    with pytest.raises(ValueError):
        aggregate_estimate([(CARRIER, 1.0)], {CARRIER: 0.0})


@given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=8))
def test_estimate_lies_within_the_sources(times):
    estimates = [(f"source-{i}", t) for i, t in enumerate(times)]
    result = aggregate_estimate(estimates)
    assert min(times) - 1e-6 <= result <= max(times) + 1e-6


@given(st.floats(min_value=-1e6, max_value=1e6), st.integers(min_value=1, max_value=6))
def test_agreeing_sources_are_exact(time, count):
    assert aggregate_estimate([(f"s{i}", time) for i in range(count)]) == time


def test_ai_estimates_are_not_fused_back():
    timeline = Timeline()
    timeline.record_event(MilestoneEvent("SHP-1", ARRIVAL, EventStatus.ESTIMATED, PORT_AUTHORITY, 398, 100))
    timeline.record_event(MilestoneEvent("SHP-1", ARRIVAL, EventStatus.ESTIMATED, AI_SERVICE, 500, 110))
    timeline.record_event(MilestoneEvent("SHP-1", ARRIVAL, EventStatus.ESTIMATED, CARRIER, 402, 120))

    assert timeline_estimates(timeline, "SHP-1", ARRIVAL) == [(PORT_AUTHORITY, 398), (CARRIER, 402)]
    assert estimate_event_time(timeline, "SHP-1", ARRIVAL) == pytest.approx(400.0)
    assert estimate_event_time(timeline, "SHP-1", ARRIVAL, as_of=105) == pytest.approx(398.0)
    assert estimate_event_time(timeline, "SHP-2", ARRIVAL, fallback=400.0) == 400.0
