"""Deterministic positional float formatting for delimited reports."""

from __future__ import annotations

import math
from decimal import ROUND_HALF_EVEN, Decimal

_TEN_DIGITS = Decimal("1.000000000")


def fmt10(value: float) -> str:
    """Positional decimal with exactly ten significant digits.

    Built on Decimal so rounding never drops a digit, unlike printf-style
    shortest forms; output depends only on the float's exact value.
    """
    if not math.isfinite(value):
        return str(value)
    if value == 0:
        return "0"
    exact = Decimal(value)
    shift = exact.adjusted()
    rounded = exact.scaleb(-shift).quantize(_TEN_DIGITS, rounding=ROUND_HALF_EVEN)
    return format(rounded.scaleb(shift), "f")
