"""Symbolic order kernels on the kneading sequence.

The itinerary of c_i is the suffix e_i e_{i+1} ... of the kneading sequence, and on
the post-critical set the signed (parity-lexicographic) order of itineraries equals
the order of points.  Comparing c_i with c_j therefore needs only integer work on an
int8 array, which makes it the hot loop for visit counting over 10^5 orbit points.

Two interchangeable backends: numba ``@njit`` loops, and a vectorised numpy path that
scans mismatch windows in blocks.  Set ``FIBOLAB_DISABLE_NUMBA=1`` to force numpy.

Return codes: -1 (c_i < c_j), 0 (same index), +1 (c_i > c_j), UNRESOLVED when the
suffixes agree up to the end of the available sequence.
"""
from __future__ import annotations

import os

import numpy as np

UNRESOLVED = 2
OUTSIDE = -1
LOC_UNRESOLVED = -2

_DISABLED = os.environ.get("FIBOLAB_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("disabled by FIBOLAB_DISABLE_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


# ---------------------------------------------------------------- numpy path

_WINDOW = 64


def _compare_pairs_numpy(e: np.ndarray, ii: np.ndarray, jj: np.ndarray) -> np.ndarray:
    """Vectorised signed-order comparison of c_ii against c_jj (1-based indices)."""
    ii = np.asarray(ii, dtype=np.int64)
    jj = np.asarray(jj, dtype=np.int64)
    n = e.shape[0]
    out = np.zeros(ii.shape[0], dtype=np.int8)
    active = np.nonzero(ii != jj)[0]
    parity = np.zeros(ii.shape[0], dtype=np.int64)
    offset = 0
    ar = np.arange(_WINDOW, dtype=np.int64)
    while active.size:
        a = ii[active] - 1 + offset
        b = jj[active] - 1 + offset
        room = n - np.maximum(a, b)
        width = np.minimum(room, _WINDOW)
        ok = width > 0
        if not ok.all():
            out[active[~ok]] = UNRESOLVED
            active, a, b, width = active[ok], a[ok], b[ok], width[ok]
            if not active.size:
                break
        pos_a = np.minimum(a[:, None] + ar[None, :], n - 1)
        pos_b = np.minimum(b[:, None] + ar[None, :], n - 1)
        valid = ar[None, :] < width[:, None]
        sa = e[pos_a]
        sb = e[pos_b]
        diff = (sa != sb) & valid
        found = diff.any(axis=1)
        first = np.argmax(diff, axis=1)
        # ones strictly before the mismatch (or across the whole window)
        csum = np.cumsum(np.where(valid, sa, 0), axis=1)
        before = np.where(first > 0, csum[np.arange(len(first)), np.maximum(first - 1, 0)], 0)
        whole = csum[:, -1]
        hit = active[found]
        if hit.size:
            par = (parity[hit] + before[found]) & 1
            less = sa[found, first[found]] < sb[found, first[found]]
            less = np.where(par == 1, ~less, less)
            out[hit] = np.where(less, -1, 1)
        short = (~found) & (width < _WINDOW)
        if short.any():
            out[active[short]] = UNRESOLVED
        keep = (~found) & (width == _WINDOW)
        parity[active[keep]] += whole[keep]
        active = active[keep]
        # survivors advance in lockstep, so one shared offset suffices
        offset += _WINDOW
    return out


def _locate_numpy(e: np.ndarray, idx: np.ndarray, lows: np.ndarray, highs: np.ndarray) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    res = np.full(idx.shape[0], OUTSIDE, dtype=np.int64)
    unresolved = np.zeros(idx.shape[0], dtype=bool)
    for t in range(lows.shape[0]):
        lo = np.full(idx.shape[0], lows[t], dtype=np.int64)
        hi = np.full(idx.shape[0], highs[t], dtype=np.int64)
        c1 = _compare_pairs_numpy(e, lo, idx)
        c2 = _compare_pairs_numpy(e, idx, hi)
        bad = (c1 == UNRESOLVED) | (c2 == UNRESOLVED)
        inside = (~bad) & (c1 <= 0) & (c2 <= 0)
        res[inside] = t
        unresolved |= bad
    res[unresolved & (res == OUTSIDE)] = LOC_UNRESOLVED
    return res


# ---------------------------------------------------------------- numba path

if HAS_NUMBA:

    @njit(cache=True)
    def _cmp_one(e, i, j):
        if i == j:
            return 0
        n = e.shape[0]
        a = i - 1
        b = j - 1
        ones = 0
        while a < n and b < n:
            x = e[a]
            y = e[b]
            if x != y:
                less = x < y
                if ones & 1:
                    less = not less
                return -1 if less else 1
            ones += x
            a += 1
            b += 1
        return UNRESOLVED

    @njit(cache=True)
    def _compare_pairs_numba(e, ii, jj):
        out = np.empty(ii.shape[0], dtype=np.int8)
        for t in range(ii.shape[0]):
            out[t] = _cmp_one(e, ii[t], jj[t])
        return out

    @njit(cache=True)
    def _locate_numba(e, idx, lows, highs):
        res = np.empty(idx.shape[0], dtype=np.int64)
        for t in range(idx.shape[0]):
            j = idx[t]
            label = OUTSIDE
            unresolved = False
            for u in range(lows.shape[0]):
                c1 = _cmp_one(e, lows[u], j)
                if c1 == UNRESOLVED:
                    unresolved = True
                    continue
                if c1 > 0:
                    continue
                c2 = _cmp_one(e, j, highs[u])
                if c2 == UNRESOLVED:
                    unresolved = True
                    continue
                if c2 <= 0:
                    label = u
                    break
            if label == OUTSIDE and unresolved:
                label = LOC_UNRESOLVED
            res[t] = label
        return res


def backend() -> str:
    return "numba" if HAS_NUMBA else "numpy"


def compare_pairs(e: np.ndarray, ii, jj, use_numba: bool | None = None) -> np.ndarray:
    """Signed-order comparison of c_ii[t] against c_jj[t] for every t."""
    e = np.ascontiguousarray(e, dtype=np.int8)
    ii = np.ascontiguousarray(ii, dtype=np.int64)
    jj = np.ascontiguousarray(jj, dtype=np.int64)
    if (HAS_NUMBA if use_numba is None else use_numba and HAS_NUMBA):
        return _compare_pairs_numba(e, ii, jj)
    return _compare_pairs_numpy(e, ii, jj)


def locate_indices(e: np.ndarray, idx, lows, highs, use_numba: bool | None = None) -> np.ndarray:
    """Interval label (position in ``lows``/``highs``) holding c_idx[t], OUTSIDE or LOC_UNRESOLVED.

    ``lows[u]``/``highs[u]`` are the orbit indices of the left/right endpoint of interval u
    in the point order; the intervals must be pairwise disjoint.
    """
    e = np.ascontiguousarray(e, dtype=np.int8)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    lows = np.ascontiguousarray(lows, dtype=np.int64)
    highs = np.ascontiguousarray(highs, dtype=np.int64)
    if (HAS_NUMBA if use_numba is None else use_numba and HAS_NUMBA):
        return _locate_numba(e, idx, lows, highs)
    return _locate_numpy(e, idx, lows, highs)
