from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fibolab import _kernels
from fibolab.kneading import fib_cut_times, fibonacci_kneading_array
from fibolab.postcritical import partition_labels

E = fibonacci_kneading_array(40000)

needs_numba = pytest.mark.skipif(not _kernels.HAS_NUMBA, reason="numba not installed")


def _naive_cmp(e, i, j):
    if i == j:
        return 0
    ones = 0
    a, b = i - 1, j - 1
    while a < len(e) and b < len(e):
        if e[a] != e[b]:
            less = e[a] < e[b]
            return (1 if less else -1) if ones & 1 else (-1 if less else 1)
        ones += int(e[a])
        a += 1
        b += 1
    return _kernels.UNRESOLVED


def test_order_matches_reference_orbit(mp_orbit):
    rng = np.random.default_rng(1)
    ii = rng.integers(1, 1500, 3000)
    jj = rng.integers(1, 1500, 3000)
    got = _kernels.compare_pairs(E, ii, jj, use_numba=False)
    for i, j, g in zip(ii, jj, got):
        ref = 0 if i == j else (-1 if mp_orbit[i] < mp_orbit[j] else 1)
        assert g == ref, (i, j)


@given(st.lists(st.tuples(st.integers(1, 30000), st.integers(1, 30000)), min_size=1, max_size=200))
@settings(max_examples=40, deadline=None)
def test_numpy_matches_naive(pairs):
    ii, jj = np.array(pairs).T
    got = _kernels.compare_pairs(E, ii, jj, use_numba=False)
    assert list(got) == [_naive_cmp(E, i, j) for i, j in pairs]


@needs_numba
@given(st.lists(st.tuples(st.integers(1, 39999), st.integers(1, 39999)), min_size=1, max_size=500))
@settings(max_examples=60, deadline=None)
def test_backends_agree_on_compare(pairs):
    ii, jj = np.array(pairs).T
    a = _kernels.compare_pairs(E, ii, jj, use_numba=False)
    b = _kernels.compare_pairs(E, ii, jj, use_numba=True)
    assert np.array_equal(a, b)


def test_suffix_running_off_the_end_is_unresolved():
    short = E[:100]
    assert _kernels.compare_pairs(short, [99], [100], use_numba=False)[0] in (-1, 1, _kernels.UNRESOLVED)
    # two suffixes equal up to the end cannot be ordered
    e = np.zeros(10, dtype=np.int8)
    assert _kernels.compare_pairs(e, [3], [5], use_numba=False)[0] == _kernels.UNRESOLVED
    if _kernels.HAS_NUMBA:
        assert _kernels.compare_pairs(e, [3], [5], use_numba=True)[0] == _kernels.UNRESOLVED


def _level(m):
    s = fib_cut_times(m + 4)
    lows, highs = [], []
    for _, (a, b) in partition_labels(s, m):
        c = _kernels.compare_pairs(E, [a], [b])[0]
        lows.append(a if c < 0 else b)
        highs.append(b if c < 0 else a)
    return np.array(lows), np.array(highs)


@pytest.mark.parametrize("m", [3, 5, 7])
def test_locate_matches_reference_orbit(m, mp_orbit):
    lows, highs = _level(m)
    idx = np.arange(1, 1500)
    got = _kernels.locate_indices(E, idx, lows, highs, use_numba=False)
    for j, g in zip(idx, got):
        x = mp_orbit[j]
        hits = [u for u in range(len(lows)) if mp_orbit[lows[u]] <= x <= mp_orbit[highs[u]]]
        assert g == (hits[0] if hits else _kernels.OUTSIDE)


@needs_numba
@pytest.mark.parametrize("m", [3, 6, 9])
def test_backends_agree_on_locate(m):
    lows, highs = _level(m)
    idx = np.arange(1, 20000)
    a = _kernels.locate_indices(E, idx, lows, highs, use_numba=False)
    b = _kernels.locate_indices(E, idx, lows, highs, use_numba=True)
    assert np.array_equal(a, b)


def test_backend_name():
    assert _kernels.backend() in ("numba", "numpy")
