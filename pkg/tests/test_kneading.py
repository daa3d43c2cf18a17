from __future__ import annotations

import math
from fractions import Fraction

import gmpy2
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fibolab.kneading import (
    CONSTANT_ZERO,
    FIBONACCI,
    KneadingMap,
    Ordering,
    TentParams,
    _dyadic_from_json,
    _dyadic_to_json,
    certify_bracket,
    cut_times,
    fib_cut_times,
    golden_record,
    itinerary,
    kneading_compare,
    kneading_from_map,
    kneading_map_from_sequence,
    solve_fibonacci_report,
)
from fibolab.numerics import Ball

GOLDEN_43 = "1.7292119317087213575266487402872706355191085"
PHI = (1 + math.sqrt(5)) / 2


def naive_kneading(q, length):
    """Block rule written out directly: e on (S(k-1), S(k)] copies e_1..e_{S(Q(k))-1} and flips the last."""
    s = [1]
    e = [1]
    k = 1
    while len(e) < length:
        sq = s[q(k)]
        block = e[: sq - 1] + [1 - e[sq - 1]]
        e.extend(block)
        s.append(s[-1] + sq)
        k += 1
    return e[:length]


def exact_itinerary(lam: Fraction, n: int) -> str:
    x = Fraction(0)
    out = []
    for _ in range(n):
        x = lam * (1 - abs(x)) - 1
        out.append("C" if x == 0 else ("1" if x > 0 else "0"))
    return "".join(out)


def test_fibonacci_cut_times():
    s = fib_cut_times(20)
    assert [s[k] for k in range(6)] == [1, 2, 3, 5, 8, 13]
    a, b = 1, 2
    for k in range(2, 16):
        a, b = b, a + b
    assert s[15] == b == 1597
    assert s[-2] == 0 and s[-1] == 1


def test_constant_zero_cut_times():
    s = cut_times(CONSTANT_ZERO, 10)
    assert [s[k] for k in range(11)] == list(range(1, 12))


def test_cut_time_recursion_and_lower_bound():
    s = fib_cut_times(40)
    for k in range(1, 41):
        assert s[k] == s[k - 1] + s[FIBONACCI(k)]
        assert s[k] >= PHI ** (k + 2) / 3


def test_fibonacci_kneading_prefix():
    assert str(kneading_from_map(FIBONACCI, 21)) == "100111011001010011100"


def test_constant_zero_kneading():
    assert str(kneading_from_map(CONSTANT_ZERO, 5)) == "10000"


def test_fast_kneading_matches_block_rule():
    n = 5000
    assert list(kneading_from_map(FIBONACCI, n).symbols) == naive_kneading(FIBONACCI, n)


@st.composite
def kneading_maps(draw):
    qs = [0] + [draw(st.integers(0, k - 1)) for k in range(1, 16)]
    return KneadingMap(lambda k, qs=qs: qs[k] if k < len(qs) else max(0, k - 2), "drawn")


@given(kneading_maps())
@settings(max_examples=50)
def test_any_map_second_symbol_is_zero(q):
    e = kneading_from_map(q, 40)
    assert e[0] == 1 and e[1] == 0
    assert list(e.symbols) == naive_kneading(q, 40)


def test_kneading_map_round_trip():
    s = fib_cut_times(14)
    e = kneading_from_map(FIBONACCI, s[12]).symbols
    qs = kneading_map_from_sequence(e)
    assert qs == [FIBONACCI(k) for k in range(1, len(qs) + 1)]
    assert len(qs) >= 10


def test_itinerary_slope_two():
    assert str(itinerary(TentParams.of(2), 0, 4)) == "1000"


def test_itinerary_slope_three_halves():
    # T(0) = 1/2, T(1/2) = -1/4, T(-1/4) = 1/8
    expected = exact_itinerary(Fraction(3, 2), 3)
    assert expected == "101"
    assert str(itinerary(TentParams.of("1.5"), 0, 3)) == expected


@given(st.fractions(min_value=Fraction(10, 7), max_value=2, max_denominator=64))
@settings(max_examples=40, deadline=None)
def test_itinerary_matches_exact_rational_orbit(lam):
    ref = exact_itinerary(lam, 24)
    if "C" in ref:
        ref = ref[: ref.index("C") + 1]
    got = str(itinerary(TentParams.of(lam), 0, len(ref)))
    assert got == ref


def test_parity_lex_examples():
    a = [1, 0, 0, 1, 1]
    assert kneading_compare(a, a) is Ordering.EQUAL_ON_PREFIX
    assert kneading_compare([1, 1], [1, 0]) is Ordering.LESS
    assert kneading_compare([1, 0], [1, 1]) is Ordering.GREATER


def test_compare_stops_at_turning_symbol():
    assert kneading_compare([1, 2, 0], [1, 2, 1]) is Ordering.EQUAL_ON_PREFIX


def test_slope_16_below_slope_18():
    a = itinerary(TentParams.of("1.6"), 0, 30)
    b = itinerary(TentParams.of("1.8"), 0, 30)
    assert str(a) == exact_itinerary(Fraction(8, 5), 30)
    assert kneading_compare(a, b) is Ordering.LESS


@given(
    st.fractions(min_value=Fraction(10, 7), max_value=2, max_denominator=50),
    st.fractions(min_value=Fraction(10, 7), max_value=2, max_denominator=50),
)
@settings(max_examples=60)
def test_kneading_monotone_in_slope(l1, l2):
    if l1 > l2:
        l1, l2 = l2, l1
    o = kneading_compare(
        [int(c) if c != "C" else 2 for c in exact_itinerary(l1, 20)],
        [int(c) if c != "C" else 2 for c in exact_itinerary(l2, 20)],
    )
    assert o in (Ordering.LESS, Ordering.EQUAL_ON_PREFIX)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=30), st.lists(st.integers(0, 1), min_size=1, max_size=30))
def test_compare_antisymmetric(a, b):
    o1, o2 = kneading_compare(a, b), kneading_compare(b, a)
    assert o1.value == -o2.value


def test_golden_value(golden):
    lam = golden.lambda_
    # the 43-digit string is truncated, so compare within its last digit
    ref = Ball.exact(GOLDEN_43, 256) + Ball.from_interval("-1e-43", "1e-43", 256)
    assert ref.contains(lam)
    assert lam.rel_accuracy_bits() > 10000
    assert golden.prefix_depth == 18
    assert golden_record()["digits"].startswith(GOLDEN_43)


def test_golden_itinerary(golden):
    assert str(itinerary(golden, 0, 21)) == str(kneading_from_map(FIBONACCI, 21))
    s = fib_cut_times(16)
    assert itinerary(golden, 0, s[14]).symbols == kneading_from_map(FIBONACCI, s[14]).symbols


def test_bisection_widths_halve():
    rep = solve_fibonacci_report(8, max_precision=2048, method="bisect")
    w = rep.widths
    assert all(b < a for a, b in zip(w, w[1:]))
    # dyadic midpoints: each accepted step removes one bit of width
    assert all(abs((a - b) - 1) < 1e-9 for a, b in zip(w, w[1:]))
    assert rep.params.lambda_.overlaps(Ball.exact(GOLDEN_43, 256))


def test_newton_and_bisection_agree():
    a = solve_fibonacci_report(10, max_precision=4096, method="bisect").params.lambda_
    b = solve_fibonacci_report(10, max_precision=4096, method="newton").params.lambda_
    assert a.overlaps(b)
    assert a.overlaps(Ball.exact(GOLDEN_43, 256) + Ball.from_interval("-1e-43", "1e-43", 256))


def test_certify_bracket_rejects_wrong_bracket():
    lo = gmpy2.mpfr("1.70", 64)
    hi = gmpy2.mpfr("1.71", 64)
    assert not certify_bracket(lo, hi, 6)


def test_dyadic_json_round_trip():
    x = gmpy2.mpfr("1.7292119317087213575266", 300)
    assert _dyadic_from_json(_dyadic_to_json(x), 300) == x


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        kneading_from_map(FIBONACCI, 0)
    with pytest.raises(ValueError):
        itinerary(TentParams.of(2), "1.5", 3)
    with pytest.raises(ValueError):
        solve_fibonacci_report(2)
