"""Small text and number helpers used by several modules."""

import unicodedata
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction


def is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def strip_punct(text: str) -> str:
    return "".join(ch for ch in text if not is_punct(ch))


def source_tokens(text: str) -> list[str]:
    """One token per character, punctuation and whitespace dropped."""
    return [ch for ch in text if not ch.isspace() and not is_punct(ch)]


def target_tokens(text: str) -> list[str]:
    """Whitespace tokens after deleting punctuation characters."""
    return strip_punct(text).split()


def round1(value) -> float:
    """Round to one decimal place, halves away from zero.

    Accepts ints, floats, Decimals and Fractions. Floats go through their
    shortest repr so that 3.65 rounds to 3.7 rather than 3.6.
    """
    if isinstance(value, Fraction):
        dec = Decimal(value.numerator) / Decimal(value.denominator)
    elif isinstance(value, Decimal):
        dec = value
    else:
        dec = Decimal(repr(float(value)))
    return float(dec.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))
