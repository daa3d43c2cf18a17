from __future__ import annotations

import pytest

from fibolab.natext import backward_return_windows, backward_series, gap, gap_target, windows_ok


def test_windows_for_k_hat_four(s):
    wins = backward_return_windows(s, 4, 6)
    assert [(lo, hi) for _, lo, hi in wins] == [(8, 13), (21, 34), (42, 68), (76, 123), (131, 212), (220, 356)]
    with pytest.raises(ValueError):
        backward_return_windows(s, 0, 3)


def test_chain_at_cut_time_anchor(conj, cache, s):
    ch = backward_series(conj, cache, s[16], s[12], 4, s)
    assert ch.t == 0
    assert ch.returns == [8, 21, 55, 89, 144, 233, 377]
    assert all(windows_ok(ch, s).values())
    assert all(r.contains(0) for r in ch.residuals)
    # log h'(c_m) is very negative at m = S(k), and enters every b_n with weight 1/n
    assert ch.window_min.n == 1 and float(ch.window_min.b_n) < -2000


def test_chain_one_step_later(conj, cache, s):
    ch = backward_series(conj, cache, s[16] + 1, s[12], 4, s)
    assert ch.t == 1
    assert ch.returns == [9, 22, 56, 90, 145, 234]
    assert all(windows_ok(ch, s).values())
    assert abs(float(ch.window_min.b_n) - 0.5476658) < 1e-6
    assert ch.tagged_max.n == 145 and float(ch.tagged_max.b_n) > 1.9
    assert float(gap(ch)) > float(gap_target(conj, ch.entries[0].b_n * 0 + ch.window_min.b_n * 0 + _ll(conj, cache)))


def _ll(conj, cache):
    return cache.params.lambda_.with_precision(256).log()


def test_bad_depth(conj, cache):
    with pytest.raises(ValueError):
        backward_series(conj, cache, 10, 10)
