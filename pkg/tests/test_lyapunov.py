from __future__ import annotations

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fibolab.conjugacy import ConjugacyParams
from fibolab.lyapunov import (
    Cocycle,
    Kind,
    alpha_star,
    direct_log_derivative,
    far_correction_bound,
    logdist_terms,
    negative_part_growth,
    pointwise_series,
    positive_part_terms,
)
from fibolab.postcritical import Side, side_rule

# derived from the 5778-point cache; the record indices are re-derived from mpmath below
NEG_RECORDS = [4, 7, 28, 33, 54, 198, 232, 376, 1596, 2583]
RETURNS_FROM_C1 = [5, 13, 26, 47, 81, 136, 225, 369, 602]


def _mp_log_hp(x):
    a = mpmath.mpf(2) if x > 0 else mpmath.mpf("1.2")
    return mpmath.log(a) + (a - 1) * mpmath.log(abs(x))


@pytest.fixture(scope="module")
def cocycle(conj, cache):
    return Cocycle(conj, cache)


@pytest.mark.parametrize("j,n", [(1, 1), (1, 50), (3, 200), (100, 150)])
def test_closed_form_matches_direct_product(conj, cache, cocycle, j, n):
    # the oracle needs exponents as sharp as its working precision near close returns
    direct = direct_log_derivative(ConjugacyParams.of(2, "1.2", prec=2048), cache, j, n, prec=2048)
    closed = cocycle.log_deriv_n(j, n)
    assert closed.overlaps(direct)
    assert abs(float(closed - direct)) <= 1e-8 * max(1.0, abs(float(direct)))


def test_closed_form_matches_mpmath_orbit(cocycle, mp_orbit):
    with mpmath.workdps(60):
        lam = mp_orbit[1] + 1
        for j, n in ((2, 10), (7, 40), (500, 300)):
            ref = n * mpmath.log(lam) + _mp_log_hp(mp_orbit[j + n]) - _mp_log_hp(mp_orbit[j])
            assert abs(ref - mpmath.mpf(cocycle.log_deriv_n(j, n).center)) < 1e-30


@given(st.integers(1, 2000), st.integers(0, 600), st.integers(0, 600))
@settings(max_examples=60, deadline=None)
def test_cocycle_additive(cocycle, j, n, m):
    whole = cocycle.log_deriv_n(j, n + m)
    assert whole.overlaps(cocycle.log_deriv_n(j, n) + cocycle.log_deriv_n(j + n, m))


def test_alpha_star(conj):
    assert float(alpha_star(conj)) == float(conj.alpha_plus) == 1.0


def test_positive_part_terms(conj, cache, s):
    terms = positive_part_terms(conj, cache, range(8, 17), s)
    assert all(t.term.lower() > 0 for t in terms)
    assert all(b.partial_sum.certified_gt(a.partial_sum) for a, b in zip(terms, terms[1:]))
    assert terms[-1].partial_sum.lower() > 1
    for t in terms:
        assert t.skipped == 0
        # J_n hugs c_{S(n-1)}
        assert t.side is side_rule(t.n - 1)
        lo, hi = (0.38, 0.40) if t.side is Side.RIGHT else (0.078, 0.083)
        assert lo < float(t.term) < hi


def test_logdist_terms_scale(conj, cache, s, cocycle):
    terms = logdist_terms(conj, cache, range(8, 17), s)
    for t in terms:
        ratio = float(t.term / (t.mu * conj.a(t.side) * s[t.n] * cocycle.log_lambda))
        assert 0.95 < ratio < 1.0


def test_negative_records_and_averages(conj, cache, s, cocycle):
    ng = negative_part_growth(conj, cache, s[16], s, cocycle=cocycle)
    assert ng.record_indices() == NEG_RECORDS
    assert not ng.unresolved
    assert ng.averages[s[16]].certified_gt(ng.averages[s[10]])
    assert 3.7 < float(ng.averages[s[16]]) < 3.9


def test_negative_records_from_mpmath(mp_orbit):
    with mpmath.workdps(40):
        lam = mp_orbit[1] + 1
        best, recs = mpmath.mpf(0), []
        for j in range(1, 2000):
            g = -(mpmath.log(lam) + _mp_log_hp(mp_orbit[j + 1]) - _mp_log_hp(mp_orbit[j]))
            if g > best:
                best = g
                recs.append(j)
    assert recs == [r for r in NEG_RECORDS if r < 2000]


def test_pointwise_series_from_c1(conj, cache, s, cocycle):
    ps = pointwise_series(conj, cache, 1, 4, 987, s, cocycle)
    assert ps.l == 7
    assert ps.returns == RETURNS_FROM_C1
    assert all(ps.window_ok.values())
    assert [e.n for e in ps.close] == [ps.l + n for n in RETURNS_FROM_C1]
    assert ps.max_far.n == 233 and abs(float(ps.max_far.a_n) - 0.547666) < 1e-6
    assert ps.min_close.n == 376 and ps.min_close.kind is Kind.CLOSE
    assert float(ps.max_far.a_n - ps.min_close.a_n) > 0.15


def test_far_correction_bound_positive(conj, cache, s):
    b = [far_correction_bound(conj, cache, s, k) for k in range(4, 10)]
    assert all(0 < x <= y for x, y in zip(b, b[1:])) and b[-1] > b[0]
    with pytest.raises(ValueError):
        Cocycle(conj, cache).log_deriv_n(1, -1)
