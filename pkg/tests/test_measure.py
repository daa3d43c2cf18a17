from __future__ import annotations

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fibolab.kneading import fib_cut_times
from fibolab.measure import (
    ONE,
    PHI,
    ZPhi,
    check_identities,
    empirical_frequencies,
    fib_matrix_power,
    measure_closed_form,
    measure_recursion,
    symbolic_labels,
)
from fibolab.postcritical import build_partition, locate_index

ints = st.integers(-10**6, 10**6)
zphis = st.builds(ZPhi, ints, ints)


def _mp(z: ZPhi):
    return z.a + z.b * (1 + mpmath.sqrt(5)) / 2


@given(zphis, zphis)
def test_ring_ops_match_real_evaluation(x, y):
    with mpmath.workdps(60):
        for got, ref in ((x + y, _mp(x) + _mp(y)), (x - y, _mp(x) - _mp(y)), (x * y, _mp(x) * _mp(y))):
            assert abs(_mp(got) - ref) <= mpmath.mpf(10) ** -40 * (1 + abs(ref))


@given(zphis, zphis)
def test_norm_multiplicative_and_conjugate(x, y):
    assert (x * y).norm() == x.norm() * y.norm()
    assert (x * y).conjugate() == x.conjugate() * y.conjugate()
    assert x * x.conjugate() == ZPhi(x.norm(), 0)


@given(st.integers(-60, 60))
def test_phi_powers_are_units(e):
    u = PHI**e
    assert abs(u.norm()) == 1
    assert u * u.inverse() == ONE
    with mpmath.workdps(80):
        assert abs(_mp(u) - mpmath.phi**e) < mpmath.mpf(10) ** -50 * mpmath.phi ** abs(e)


def test_non_unit_has_no_inverse():
    with pytest.raises(ZeroDivisionError):
        ZPhi(2, 0).inverse()


def test_first_measures():
    i1, j1 = measure_closed_form(1)
    assert i1 == PHI - 1 and j1 == 2 - PHI
    assert abs(float(i1) - 0.6180339887498949) < 1e-15


def test_recursion_reproduces_closed_form():
    tab = measure_recursion(60)
    for m in range(1, 61):
        assert (tab.mu_I[m], tab.mu_J[m]) == measure_closed_form(m)


def test_identities_exact_to_forty():
    ids = check_identities(measure_recursion(40))
    assert len(ids) == 40
    assert all(all(r.values()) for r in ids.values())


def test_normalisation_uses_piece_counts():
    # M_m has S(m-1) copies of I_m and S(m-2) of J_m
    s = fib_cut_times(30)
    for m in range(1, 25):
        i, j = measure_closed_form(m)
        assert s[m - 1] * i + s[m - 2] * j == ONE


def test_fib_matrix_power():
    assert fib_matrix_power(0) == ((1, 0), (0, 1))
    assert fib_matrix_power(10) == ((89, 55), (55, 34))


def test_symbolic_location_agrees_with_balls(cache, s):
    for k in (3, 5):
        lvl = build_partition(cache, s, k)
        sym = symbolic_labels(lvl, range(1, 2001))
        ball = [str(locate_index(cache, j, lvl)) for j in range(1, 2001)]
        assert sym == ball


@pytest.mark.parametrize("use_numba", [False, True])
def test_frequencies_approach_measure(cache, s, use_numba):
    N = 30000
    for m in (2, 4):
        lvl = build_partition(cache, s, m)
        fr = empirical_frequencies(cache, lvl, N, use_numba=use_numba)
        assert fr.unresolved == 0
        assert fr.by_certificate == {"ball": cache.i_max, "symbolic": N - cache.i_max}
        mi, mj = measure_closed_form(m)
        assert abs(fr.freq(str(lvl.by_label("I", 0).label)) / float(mi) - 1) < 0.02
        assert abs(fr.freq(str(lvl.by_label("J", 0).label)) / float(mj) - 1) < 0.02
        assert fr.total_fraction() == pytest.approx(1.0)
