from __future__ import annotations

import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fibolab.numerics import (
    Ball,
    PrecisionCeiling,
    Sign,
    Unresolved,
    bmax,
    bmin,
    certified_sign,
    escalate,
    phi_ball,
    precision_budget,
)

rationals = st.fractions(min_value=-1000, max_value=1000, max_denominator=10**6)
nonzero = rationals.filter(lambda q: q != 0)
positive = st.fractions(min_value=Fraction(1, 10**6), max_value=1000, max_denominator=10**6)
precs = st.sampled_from([24, 53, 64, 128, 300])


def _ball(q: Fraction, prec: int, widen: Fraction = Fraction(0)) -> Ball:
    b = Ball.exact(q, prec)
    return b if widen == 0 else b + Ball.from_interval(-widen, widen, prec)


@given(rationals, rationals, precs)
def test_add_sub_mul_contain_exact(x, y, prec):
    bx, by = Ball.exact(x, prec), Ball.exact(y, prec)
    assert (bx + by).contains(x + y)
    assert (bx - by).contains(x - y)
    assert (bx * by).contains(x * y)


@given(rationals, nonzero, precs)
def test_div_contains_exact(x, y, prec):
    assert (Ball.exact(x, prec) / Ball.exact(y, prec)).contains(x / y)


@given(rationals, st.integers(0, 9), precs)
def test_integer_power_contains_exact(x, e, prec):
    assert (Ball.exact(x, prec) ** e).contains(x**e)


@given(rationals, precs)
def test_abs_and_neg(x, prec):
    b = Ball.exact(x, prec)
    assert abs(b).contains(abs(x))
    assert (-b).contains(-x)


@given(positive, st.sampled_from([64, 128, 256]))
@settings(max_examples=60)
def test_transcendental_contain_mpmath(x, prec):
    # independent oracle: mpmath at twice the precision
    mpmath.mp.prec = 2 * prec + 40
    b = Ball.exact(x, prec)
    mx = mpmath.mpf(x.numerator) / x.denominator
    for ours, ref in ((b.log(), mpmath.log(mx)), (b.exp() if x < 50 else None, mpmath.exp(mx)), (b.sqrt(), mpmath.sqrt(mx))):
        if ours is None:
            continue
        lo, hi = mpmath.mpf(ours.lower()), mpmath.mpf(ours.upper())
        assert lo <= ref <= hi


@given(positive, st.fractions(min_value=Fraction(1, 10), max_value=3, max_denominator=100))
@settings(max_examples=60)
def test_real_power_contains_mpmath(x, a):
    mpmath.mp.prec = 300
    ref = mpmath.power(mpmath.mpf(x.numerator) / x.denominator, mpmath.mpf(a.numerator) / a.denominator)
    b = Ball.exact(x, 128) ** Ball.exact(a, 128)
    assert mpmath.mpf(b.lower()) <= ref <= mpmath.mpf(b.upper())


@given(rationals, rationals, st.fractions(min_value=0, max_value=1, max_denominator=1000))
def test_containment_with_wide_operands(x, y, w):
    # the exact result for any enclosed operand pair must be enclosed
    bx, by = _ball(x, 64, w), _ball(y, 64, w)
    for dx in (-w, 0, w):
        for dy in (-w, 0, w):
            assert (bx * by).contains((x + dx) * (y + dy))
            assert (bx - by).contains((x + dx) - (y + dy))


@given(rationals, rationals)
def test_monotone_refinement(x, y):
    lo = (Ball.exact(x, 30) * Ball.exact(y, 30) + Ball.exact(x, 30)).log() if x * y + x > 0 else None
    if lo is None:
        return
    hi = (Ball.exact(x, 200) * Ball.exact(y, 200) + Ball.exact(x, 200)).log()
    assert lo.overlaps(hi)


def test_certified_sign_examples():
    assert certified_sign(Ball(-1, 0.5)) is Sign.NEGATIVE
    assert certified_sign(Ball(0, 0.1)) is Sign.UNRESOLVED
    assert certified_sign(Ball(2.0**-60, 2.0**-80)) is Sign.POSITIVE


@given(st.floats(-1e6, 1e6, allow_nan=False), st.floats(0, 1e6, allow_nan=False))
def test_certified_sign_matches_definition(c, r):
    sg = certified_sign(Ball(c, r, 64))
    if c - r > 0:
        assert sg is Sign.POSITIVE
    elif c + r < 0:
        assert sg is Sign.NEGATIVE
    else:
        assert sg is Sign.UNRESOLVED


def test_precision_budget_examples():
    assert precision_budget(0, "1.73", 53) == 85
    mpmath.mp.dps = 50
    expected = int(mpmath.ceil(1000 * mpmath.log(mpmath.mpf("1.73"), 2))) + 96
    assert expected == 887
    assert precision_budget(1000, "1.73", 64) == expected
    assert precision_budget(6765, 2, 64) == 6861


def test_precision_budget_rejects_contracting_slope():
    with pytest.raises(ValueError):
        precision_budget(10, 1, 64)


def test_high_precision_negation_keeps_bits():
    # a 2000-bit center must survive unary minus and abs without rounding to 53 bits
    x = Ball.exact(Fraction(1, 3), 2000)
    assert (-x).rel_accuracy_bits() > 1900
    assert abs(-x).contains(Fraction(1, 3))


def test_escalate_doubles_until_resolved():
    seen = []

    def fn(bits):
        seen.append(bits)
        if bits < 500:
            raise Unresolved("need more")
        return bits

    assert escalate(fn, 64, 4096) == 512
    assert seen == [64, 128, 256, 512]


def test_escalate_ceiling_is_explicit():
    with pytest.raises(PrecisionCeiling):
        escalate(lambda b: (_ for _ in ()).throw(Unresolved("never")), 64, 256)


def test_phi_ball():
    phi = phi_ball(256)
    assert (phi * phi - phi - 1).contains(0)
    assert abs(float(phi) - (1 + math.sqrt(5)) / 2) < 1e-15


def test_min_max_enclose():
    a, b = Ball(1, 0.5), Ball(1.2, 0.1)
    assert bmin(a, b).contains(Fraction(1, 2)) and bmin(a, b).contains(Fraction(11, 10))
    assert bmax(a, b).contains(Fraction(3, 2))


def test_log_of_unsigned_ball_is_unresolved():
    with pytest.raises(Unresolved):
        Ball(0, 1).log()
