"""Exact arithmetic helpers shared by the whole package.

All bandwidths, data sizes and costs are exact rationals (``fractions.Fraction``)
or the distinguished :data:`INF` sentinel.  No floating point enters cost
accounting; square roots are only ever compared, never materialised (compare
squares instead).
"""
from __future__ import annotations

from decimal import Decimal, localcontext, ROUND_HALF_EVEN
from fractions import Fraction
from typing import Union


class Infinity:
    """Sentinel for an infinite bandwidth.

    A distinguished object rather than a huge number so that dividing a tuple
    count by it yields exactly zero.  Compares strictly above every rational.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "inf"

    def __eq__(self, other):
        return isinstance(other, Infinity)

    def __hash__(self):
        return hash("Infinity-sentinel")

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return isinstance(other, Infinity)

    def __gt__(self, other):
        return not isinstance(other, Infinity)

    def __ge__(self, other):
        return True

    def __add__(self, other):
        return self

    __radd__ = __add__

    def __reduce__(self):
        return (Infinity, ())


INF = Infinity()

Bandwidth = Union[Fraction, Infinity]
Cost = Union[Fraction, Infinity]

ZERO = Fraction(0)


def is_inf(x) -> bool:
    return isinstance(x, Infinity)


def ratio(count, bw: Bandwidth) -> Cost:
    """count / bw with the sentinel conventions of the cost model."""
    count = Fraction(count)
    if count < 0:
        raise ValueError("negative tuple count")
    if is_inf(bw):
        return ZERO
    if bw == 0:
        return ZERO if count == 0 else INF
    return count / bw


def bw_min(a: Bandwidth, b: Bandwidth) -> Bandwidth:
    if is_inf(a):
        return b
    if is_inf(b):
        return a
    return min(a, b)


def bw_sum_squares(values) -> Bandwidth:
    """Sum of squared bandwidths; infinite if any term is infinite."""
    total = ZERO
    for w in values:
        if is_inf(w):
            return INF
        total += w * w
    return total


def parse_bw(text) -> Bandwidth:
    """Parse a bandwidth literal: a decimal / fraction string or ``inf``."""
    if isinstance(text, Infinity):
        return text
    if isinstance(text, (int, Fraction)):
        value = Fraction(text)
    elif isinstance(text, float):
        value = Fraction(str(text))
    else:
        s = str(text).strip()
        if s.lower() in ("inf", "+inf", "infinity"):
            return INF
        value = Fraction(s)
    if value <= 0:
        raise ValueError(f"bandwidth must be positive, got {text!r}")
    return value


def format_bw(bw: Bandwidth) -> str:
    if is_inf(bw):
        return "inf"
    return str(bw)


def dec12(x) -> str:
    """Render an exact value as a decimal with 12 significant digits.

    Rounding is half-even so that repeated runs and platforms agree on the
    emitted text.
    """
    if is_inf(x):
        return "inf"
    x = Fraction(x)
    with localcontext() as ctx:
        ctx.prec = 12
        ctx.rounding = ROUND_HALF_EVEN
        d = Decimal(x.numerator) / Decimal(x.denominator)
    text = format(d, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text if text else "0"


def ceil_pow2_at_least(value: Fraction) -> int:
    """Smallest power of two >= max(value, 1), as an int.

    ``value`` may be any nonnegative rational; comparison is exact.
    """
    if value < 0:
        raise ValueError("negative side length")
    d = 1
    while d < value:
        d *= 2
    return d


def ceil_pow2_sqrt(value_sq: Fraction) -> int:
    """Smallest power of two d (>= 1) with d*d >= value_sq, exactly."""
    if value_sq < 0:
        raise ValueError("negative squared value")
    d = 1
    while d * d < value_sq:
        d *= 2
    return d


def min_feasible(pred, lo: Fraction, hi: Fraction, rel_tol: Fraction = Fraction(1, 2**30)) -> Fraction:
    """Minimal x in [lo, hi] with pred(x), for a monotone predicate.

    Returns a feasible value within relative tolerance ``rel_tol`` of the true
    infimum (binary search on exact rationals, so the result is deterministic).
    The final bracket is snapped to its simplest feasible rational so exact
    thresholds come out exact.
    """
    if pred(lo):
        return lo
    if not pred(hi):
        raise ValueError("predicate not feasible at upper end of search range")
    while hi - lo > hi * rel_tol:
        mid = (lo + hi) / 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    denom = 1
    while denom <= hi.denominator:
        snapped = hi.limit_denominator(denom)
        if lo < snapped <= hi and pred(snapped):
            return snapped
        denom *= 16
    return hi
