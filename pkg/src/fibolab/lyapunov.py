"""Derivative cocycle of f along the critical orbit, per-interval integral terms, pointwise series.

Everything goes through the telescoped form

    log|(f^n)'(h(c_j))| = n log(lambda) + log h'(c_{j+n}) - log h'(c_j),

so an n-step derivative costs three logarithms rather than n multiplications.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .conjugacy import ConjugacyParams, H, f_prime
from .kneading import CutTimes, TentParams, fib_cut_times
from .measure import measure_closed_form
from .numerics import Ball, Sign, Unresolved, certified_sign
from .postcritical import (
    I_endpoints,
    J_endpoints,
    OrbitCache,
    Side,
    _order_pair,
    first_entry,
    forward_return_times,
    in_I,
    return_window,
)

WORK_BITS = 256


def log_h_prime(p: ConjugacyParams, x: Ball) -> Ball:
    """log h'(x) = log a + (a - 1) log|x| on the side of x."""
    s = certified_sign(x)
    if s is Sign.UNRESOLVED:
        raise Unresolved("h' at a point not certified away from 0")
    a = p.a(Side.RIGHT if s is Sign.POSITIVE else Side.LEFT)
    return a.log() + (a - 1) * abs(x).log()


def alpha_star(p: ConjugacyParams) -> Ball:
    """Largest critical order of h', the alpha used in the integral bounds."""
    ap, am = p.alpha_plus, p.alpha_minus
    return ap if ap.center >= am.center else am


class Cocycle:
    """Lazily cached log h'(c_j) along an orbit cache, evaluated at ``bits`` precision."""

    def __init__(self, p: ConjugacyParams, cache: OrbitCache, bits: int = WORK_BITS):
        self.p = p
        self.cache = cache
        self.bits = bits
        self.log_lambda = cache.params.lambda_.with_precision(max(bits, 64)).log()
        self._lh: dict[int, Ball] = {}

    def log_hp(self, j: int) -> Ball:
        v = self._lh.get(j)
        if v is None:
            try:
                v = log_h_prime(self.p, self.cache[j].with_precision(self.bits))
            except Unresolved as exc:
                raise Unresolved(str(exc), index=j) from exc
            self._lh[j] = v
        return v

    def log_deriv_n(self, j: int, n: int) -> Ball:
        if n < 0:
            raise ValueError("n must be >= 0")
        if n == 0:
            return Ball.exact(0, self.bits)
        return n * self.log_lambda + self.log_hp(j + n) - self.log_hp(j)

    def log_fprime_at(self, j: int) -> Ball:
        """log|f'(h(c_j))|."""
        return self.log_deriv_n(j, 1)


def log_deriv_n(p: ConjugacyParams, cache: OrbitCache, j: int, n: int) -> Ball:
    return Cocycle(p, cache).log_deriv_n(j, n)


def direct_log_derivative(p: ConjugacyParams, cache: OrbitCache, j: int, n: int, prec: int = 512) -> Ball:
    """Oracle: sum of log|f'| over n points, each f' from the chain-rule quotient.

    Near a close return the quotient cancels many bits, so ``p`` must carry exponents
    at about ``prec`` bits as well.
    """
    params = TentParams(cache.params.lambda_.with_precision(prec))
    total = Ball.exact(0, prec)
    for i in range(n):
        x = H(p, cache[j + i].with_precision(prec))
        total = total + abs(f_prime(p, params, x)).log()
    return total


# ---------------------------------------------------------------------------
# per-interval terms


def _grid(lo: Ball, hi: Ball, points: int) -> list[Ball]:
    """Half uniform, half geometric (in distance to 0) samples of [lo, hi], endpoints included."""
    half = max(2, points // 2)
    out = [lo + (hi - lo) * Ball.exact(t, lo.precision_bits) / (half - 1) for t in range(half)]
    near, far = (lo, hi) if abs(lo).center < abs(hi).center else (hi, lo)
    ratio = far / near
    for t in range(1, points - half + 1):
        out.append(near * ratio ** (Ball.exact(t, lo.precision_bits) / (points - half + 1)))
    return out


@dataclass
class IntervalTerm:
    n: int
    side: Side
    mu: Ball
    grid_min: Ball
    term: Ball
    partial_sum: Ball
    skipped: int = 0


def _j_hull(cache: OrbitCache, s: CutTimes, n: int, bits: int) -> tuple[Ball, Ball]:
    a, b = J_endpoints(s, n)
    if max(a, b) > cache.i_max:
        raise IndexError(f"J_{n} needs orbit index {max(a, b)}")
    lo, hi = _order_pair(cache, a, b)
    if lo is None:
        raise Unresolved(f"endpoints of J_{n} unordered")
    return cache[lo].with_precision(bits), cache[hi].with_precision(bits)


def _terms(cache, s, n_range, bits, points, value) -> list[IntervalTerm]:
    lam = cache.params.lambda_.with_precision(bits)
    out = []
    acc = Ball.exact(0, bits)
    for n in n_range:
        lo, hi = _j_hull(cache, s, n, bits)
        side = Side.RIGHT if certified_sign(lo) is Sign.POSITIVE else Side.LEFT
        vals, skipped = [], 0
        for x in _grid(lo, hi, points):
            try:
                vals.append(value(x, lam))
            except Unresolved:
                skipped += 1
        if not vals:
            raise Unresolved(f"no certified grid point in J_{n}")
        gmin = min(vals, key=lambda v: v.lower())
        mu = measure_closed_form(n)[1].to_ball(bits)
        term = mu * gmin
        acc = acc + term
        out.append(IntervalTerm(n, side, mu, gmin, term, acc, skipped))
    return out


def positive_part_terms(
    p: ConjugacyParams,
    cache: OrbitCache,
    n_range,
    s: CutTimes | None = None,
    bits: int = WORK_BITS,
    points: int = 64,
) -> list[IntervalTerm]:
    """mu(J_n) times the grid minimum of log|f'(h(x))| over x in J_n, with running sums."""
    s = s or fib_cut_times(max(n_range) + 4)

    def value(x, lam):
        tx = lam * (1 - abs(x)) - 1
        return lam.log() + log_h_prime(p, tx) - log_h_prime(p, x)

    return _terms(cache, s, n_range, bits, points, value)


def logdist_terms(
    p: ConjugacyParams,
    cache: OrbitCache,
    n_range,
    s: CutTimes | None = None,
    bits: int = WORK_BITS,
    points: int = 64,
) -> list[IntervalTerm]:
    """mu(J_n) times the grid minimum of |log|h(x)|| over x in J_n (h(0) = 0)."""
    s = s or fib_cut_times(max(n_range) + 4)

    def value(x, lam):
        side = Side.RIGHT if certified_sign(x) is Sign.POSITIVE else Side.LEFT
        return abs(p.a(side) * abs(x).log())

    return _terms(cache, s, n_range, bits, points, value)


@dataclass
class NegativeGrowth:
    records: list  # (orbit index j, value) where max(0, -log|f'(h(c_j))|) sets a new record
    averages: dict  # N -> Birkhoff average over j = 1..N
    values: list = field(repr=False, default_factory=list)  # index j-1 -> Ball
    unresolved: list = field(default_factory=list)

    def record_indices(self) -> list[int]:
        return [j for j, _ in self.records]


def negative_part_growth(
    p: ConjugacyParams,
    cache: OrbitCache,
    N: int,
    s: CutTimes | None = None,
    checkpoints=None,
    cocycle: Cocycle | None = None,
) -> NegativeGrowth:
    """Record values of the negative part of log|f'| along h(c_1), h(c_2), ..., h(c_N)."""
    if N + 1 > cache.i_max:
        raise IndexError(f"cache must reach index {N + 1}")
    s = s or fib_cut_times(30)
    cc = cocycle or Cocycle(p, cache)
    if checkpoints is None:
        checkpoints = [s[k] for k in range(8, s.k_max + 1) if s[k] <= N]
    zero = Ball.exact(0, cc.bits)
    records, values, bad = [], [], []
    best = None
    total = zero
    averages = {}
    cps = set(checkpoints)
    for j in range(1, N + 1):
        try:
            lf = cc.log_fprime_at(j)
            g = -lf if certified_sign(lf) is Sign.NEGATIVE else (zero if certified_sign(lf) is Sign.POSITIVE else None)
        except Unresolved:
            g = None
        if g is None:
            bad.append(j)
            g = zero
        values.append(g)
        total = total + g
        if g.center > 0 and (best is None or g.certified_gt(best)):
            records.append((j, g))
            best = g
        if j in cps:
            averages[j] = total / j
    return NegativeGrowth(records, averages, values, bad)


# ---------------------------------------------------------------------------
# pointwise series


class Kind(enum.Enum):
    CLOSE = "CloseReturn"
    FAR = "Far"


@dataclass
class SeriesEntry:
    n: int
    a_n: Ball
    kind: Kind
    i: int | None = None  # return index for close returns

    @property
    def tag(self) -> str:
        return f"CloseReturn({self.i})" if self.kind is Kind.CLOSE else "Far"


@dataclass
class PointwiseSeries:
    j: int
    k: int
    l: int  # first entry time into I_k
    entries: list
    returns: list  # n_i from the entry point
    window_ok: dict  # i -> bool, n_i inside its predicted window

    @property
    def close(self) -> list:
        return [e for e in self.entries if e.kind is Kind.CLOSE]

    @property
    def far(self) -> list:
        return [e for e in self.entries if e.kind is Kind.FAR]

    @property
    def max_far(self) -> SeriesEntry:
        return max(self.far, key=lambda e: e.a_n.center)

    @property
    def min_close(self) -> SeriesEntry:
        return min(self.close, key=lambda e: e.a_n.center)


def pointwise_series(
    p: ConjugacyParams,
    cache: OrbitCache,
    j: int,
    k: int,
    depth: int,
    s: CutTimes | None = None,
    cocycle: Cocycle | None = None,
) -> PointwiseSeries:
    """a_n = (1/n) log|(f^n)'(h(c_j))| for n = 1..depth, tagged by the returns to I_{k+i}."""
    s = s or fib_cut_times(40)
    if j + depth > cache.i_max:
        raise IndexError(f"cache must reach index {j + depth}")
    cc = cocycle or Cocycle(p, cache)
    l = first_entry(cache, s, j, k, limit=cache.i_max - j)
    # enough return levels to cover the window, limited by the cache
    levels = 1
    while s[k + levels + 2] - s[k + 2] + l <= depth:
        levels += 1
    rets = forward_return_times(cache, s, j + l, k, levels)
    close = {l + n: i for i, n in enumerate(rets, start=1) if l + n <= depth}
    entries = []
    for n in range(1, depth + 1):
        a = cc.log_deriv_n(j, n) / n
        if n in close:
            entries.append(SeriesEntry(n, a, Kind.CLOSE, close[n]))
        else:
            entries.append(SeriesEntry(n, a, Kind.FAR))
    ok = {}
    for i, n in enumerate(rets, start=1):
        lo, hi = return_window(s, k, i)
        ok[i] = lo <= n <= hi
    return PointwiseSeries(j, k, l, entries, rets, ok)


def far_correction_bound(p: ConjugacyParams, cache: OrbitCache, s: CutTimes, k: int) -> float:
    """Bound on |log h'(y)| for y outside I_{k+1}: I_{k+1} holds 0 inside, so |y| >= the nearer endpoint."""
    a, b = I_endpoints(s, k + 1)
    log_delta = min(float(abs(cache[a]).log()), float(abs(cache[b]).log()))
    out = 0.0
    for side in Side:
        av = float(p.a(side))
        out = max(out, abs(math.log(av)) + (av - 1) * abs(log_delta))
    return out
