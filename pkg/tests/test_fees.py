# tests/test_fees.py

import pytest
from hypothesis import given
from hypothesis import strategies as st

from freight_ledger.fees import dwell_days_from_hours, dwell_excess_fee, dwell_excess_fee_closed_form
from freight_ledger.money import discounted, floor_cents, format_cents


def test_three_day_dwell_over_one_free_day():
    # $100 first day past the limit, +$100 for each further day
    assert dwell_excess_fee(3, 1, 10_000, 10_000) == 30_000
    assert dwell_excess_fee_closed_form(3, 1, 10_000, 10_000) == 30_000


@pytest.mark.parametrize("days", [0, 1])
def test_no_fee_within_limit(days):
    assert dwell_excess_fee(days, 1, 500, 250) == 0
    assert dwell_excess_fee_closed_form(days, 1, 500, 250) == 0


@given(
    st.integers(min_value=0, max_value=1000),
    st.integers(min_value=0, max_value=30),
    st.integers(min_value=0, max_value=100_000),
    st.integers(min_value=0, max_value=100_000),
)
def test_closed_form_matches_summation(days, limit, base, increment):
    assert dwell_excess_fee_closed_form(days, limit, base, increment) == dwell_excess_fee(days, limit, base, increment)


@given(st.integers(min_value=0, max_value=200), st.integers(min_value=1, max_value=10))
def test_fee_never_decreases_with_dwell(days, limit):
    assert dwell_excess_fee(days + 1, limit, 1000, 500) >= dwell_excess_fee(days, limit, 1000, 500)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        dwell_excess_fee(-1, 1, 100, 100)
    with pytest.raises(TypeError):
        dwell_excess_fee(2.5, 1, 100, 100)


@pytest.mark.parametrize("hours,days", [(0, 0), (1, 1), (24, 1), (25, 2), (40, 2), (48, 2), (60, 3)])
def test_started_day_counts_in_full(hours, days):
    assert dwell_days_from_hours(hours) == days


def test_money_rounding_floors():
    assert discounted(10_000, "0.08") == 9_200
    assert discounted(999, "0.08") == 919
    assert floor_cents(1000, "0.5", "0.92") == 460
    assert format_cents(9_200) == "$92.00"
    assert format_cents(-5) == "-$0.05"
