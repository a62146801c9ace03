# freight_ledger/fees.py

"""
Charge formulas of the service contract.

Included:
- dwell_days_from_hours: ceiling day quantization of a dwell duration
- dwell_excess_fee: escalating per-day fee past the port's dwell limit
- dwell_excess_fee_closed_form: n·base + increment·n(n−1)/2

All amounts are integer cents.
"""

import math


def _validate_inputs(**values: int) -> None:
    """Raise error if fee inputs are not non-negative integers."""
    for name, value in values.items():
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(f"{name} must be an integer, got {type(value).__name__}.")
        if value < 0:
            raise ValueError(f"{name} must be non-negative, got {value}.")


def dwell_days_from_hours(dwell_hours: float) -> int:
    """
    Billable dwell days: a started day counts as a full day (25h → 2 days).

    Parameters:
        dwell_hours (float): Non-negative dwell duration in hours.

    Returns:
        int: ceil(dwell_hours / 24).
    """
    if not math.isfinite(dwell_hours) or dwell_hours < 0:
        raise ValueError(f"dwell_hours must be a finite non-negative number, got {dwell_hours}.")
    return int(math.ceil(dwell_hours / 24.0))


def dwell_excess_fee(
    dwell_days: int, limit_days: int, base_per_day: int, increment_per_day: int
) -> int:
    """
    Compute the Dwell Excess Fee by direct summation.

    Day k past the limit (k = 1, 2, ...) costs base_per_day + increment_per_day × (k − 1).

    Parameters:
        dwell_days (int): Billable days the container stayed at the port.
        limit_days (int): Free dwell days granted by the terminal.
        base_per_day (int): Cents charged for the first day past the limit.
        increment_per_day (int): Cents added for each further day.

    Returns:
        int: Fee in cents, 0 when dwell_days <= limit_days.
    """
    _validate_inputs(
        dwell_days=dwell_days,
        limit_days=limit_days,
        base_per_day=base_per_day,
        increment_per_day=increment_per_day,
    )
    total = 0
    for day in range(limit_days + 1, dwell_days + 1):
        total += base_per_day + increment_per_day * (day - limit_days - 1)
    return total


def dwell_excess_fee_closed_form(
    dwell_days: int, limit_days: int, base_per_day: int, increment_per_day: int
) -> int:
    _validate_inputs(
        dwell_days=dwell_days,
        limit_days=limit_days,
        base_per_day=base_per_day,
        increment_per_day=increment_per_day,
    )
    n = max(0, dwell_days - limit_days)
    return n * base_per_day + increment_per_day * n * (n - 1) // 2
