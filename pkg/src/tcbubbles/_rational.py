"""Exact rational arithmetic backend.

All exact-mode computations in this package go through ``Rat``.  When gmpy2
is available its mpq type is used (roughly an order of magnitude faster than
fractions.Fraction on the pivot-heavy linear programs solved here); otherwise
we fall back to the stdlib Fraction.  Both types compare equal across each
other and across ints, so callers never need to know which backend is active.
"""

from __future__ import annotations

import numbers
from fractions import Fraction
from typing import Union

try:
    from gmpy2 import mpq as Rat

    HAVE_GMPY2 = True
except ImportError:  # pragma: no cover - exercised only without gmpy2
    Rat = Fraction
    HAVE_GMPY2 = False

Number = Union[int, float, Fraction, numbers.Rational]

ZERO = Rat(0)
ONE = Rat(1)


def is_exact(x) -> bool:
    """True for values that carry exact rational semantics (int included)."""
    return isinstance(x, numbers.Rational) and not isinstance(x, bool) or isinstance(x, int)


def to_rat(x) -> "Rat":
    """Coerce ``x`` to the exact backend type.

    Accepts ints, Fractions, backend rationals and strings like '3/4' or '7'.
    Floats are rejected: silently rationalizing a float would launder rounding
    error into a computation that claims exactness.
    """
    if isinstance(x, float):
        raise TypeError(f"refusing to treat float {x!r} as exact; pass a rational or string")
    if isinstance(x, str):
        return _parse_rat_str(x)
    if isinstance(x, bool):
        raise TypeError("bool is not a number here")
    if isinstance(x, numbers.Rational):
        return Rat(x.numerator, x.denominator)
    return Rat(x)


def _parse_rat_str(s: str) -> "Rat":
    text = s.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return Rat(int(num.strip()), int(den.strip()))
    if "." in text or "e" in text or "E" in text:
        # decimal literals are exact: 0.25 means 25/100
        return Rat(Fraction(text).numerator, Fraction(text).denominator)
    return Rat(int(text))


def rat_str(x) -> str:
    """Serialize an exact value as 'p' or 'p/q' (used by fixtures and dumps)."""
    q = to_rat(x)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def coerce_number(x) -> Number:
    """Parse a fixture value: rational string / int stays exact, float stays float."""
    if isinstance(x, str):
        return to_rat(x)
    if isinstance(x, bool):
        raise TypeError("bool is not a number here")
    if isinstance(x, float):
        return x
    if isinstance(x, numbers.Rational):
        return to_rat(x)
    raise TypeError(f"unsupported numeric value {x!r}")
