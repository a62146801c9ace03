"""Integer-cent money helpers. Rates are Decimals; every rounding floors."""

from decimal import ROUND_FLOOR, Decimal
from typing import Union

Rate = Union[Decimal, str, int, float]


def to_rate(value: Rate) -> Decimal:
    """Exact Decimal for a rate given as str, int, float or Decimal."""
    if isinstance(value, Decimal):
        return value
    return Decimal(str(value))


def floor_cents(amount: int, *factors: Rate) -> int:
    """floor(amount × Π factors) computed exactly."""
    product = Decimal(amount)
    for factor in factors:
        product *= to_rate(factor)
    return int(product.to_integral_value(rounding=ROUND_FLOOR))


def discounted(amount: int, discount_rate: Rate) -> int:
    """floor(amount × (1 − discount_rate))."""
    return floor_cents(amount, Decimal(1) - to_rate(discount_rate))


def format_cents(amount: int) -> str:
    sign = "-" if amount < 0 else ""
    whole, cents = divmod(abs(amount), 100)
    return f"{sign}${whole:,}.{cents:02d}"
