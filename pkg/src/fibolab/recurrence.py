"""Closest returns of the singularity h(0) = 0 under f and their exponential rate."""
from __future__ import annotations

from dataclasses import dataclass, field

from .conjugacy import ConjugacyParams
from .kneading import CutTimes, fib_cut_times
from .lyapunov import WORK_BITS
from .numerics import Ball, Sign, Unresolved, bmax, certified_sign
from .postcritical import OrbitCache, Side, side_rule


@dataclass
class RecurrenceRow:
    k: int
    s_k: int
    side: Side
    dist: Ball  # |f^{S(k)}(0)| = |h(c_{S(k)})|
    log_dist: Ball
    exponent: Ball  # -log dist / S(k)
    ratio: Ball  # exponent * S(k) / (S(k+1) a_side log lambda)
    sandwich_lo: Ball | None = None
    sandwich_hi: Ball | None = None


def _side_of(x: Ball, index: int) -> Side:
    sg = certified_sign(x)
    if sg is Sign.UNRESOLVED:
        raise Unresolved(f"side of c_{index} unresolved", index=index)
    return Side.RIGHT if sg is Sign.POSITIVE else Side.LEFT


def _log_abs_h(p: ConjugacyParams, x: Ball, index: int) -> tuple[Side, Ball]:
    side = _side_of(x, index)
    return side, p.a(side) * abs(x).log()


def closest_returns(
    p: ConjugacyParams, cache: OrbitCache, k_max: int, s: CutTimes | None = None, bits: int = WORK_BITS
) -> list[RecurrenceRow]:
    s = s or fib_cut_times(k_max + 3)
    if s[k_max] > cache.i_max:
        raise IndexError(f"cache must reach S({k_max}) = {s[k_max]}")
    loglam = cache.params.lambda_.with_precision(bits).log()
    rows = []
    for k in range(1, k_max + 1):
        x = cache[s[k]].with_precision(bits)
        side, ld = _log_abs_h(p, x, s[k])
        expo = -ld / s[k]
        ratio = expo * s[k] / (s[k + 1] * p.a(side) * loglam)
        rows.append(RecurrenceRow(k, s[k], side, ld.exp(), ld, expo, ratio))
    return rows


def sides_follow_rule(rows: list[RecurrenceRow]) -> bool:
    return all(r.side is side_rule(r.k) for r in rows)


def decreasing_per_side(rows: list[RecurrenceRow]) -> bool:
    """dist_k strictly decreasing (certified) along each side class."""
    for side in Side:
        seq = [r.log_dist for r in rows if r.side is side]
        if not all(b.certified_lt(a) for a, b in zip(seq, seq[1:])):
            return False
    return True


def _rho(s: CutTimes, k: int) -> float:
    return s[k + 1] / s[k]


def fit_theta(
    p: ConjugacyParams, rows: list[RecurrenceRow], loglam: Ball, s: CutTimes, k_min: int = 8
) -> Ball:
    """Smallest Theta >= 1 making the two-sided lambda-power bound hold on the given rows.

    Lower exponent alpha'' = max_side(rho_k^2 a_side) - 1, upper exponent alpha' = min(a+, a-).
    Fills sandwich_lo/hi on each row (log scale, before Theta).
    """
    a_lo = min(float(p.a_plus), float(p.a_minus))
    a_hi = max(float(p.a_plus), float(p.a_minus))
    slack = Ball.exact(0, loglam.precision_bits)
    for r in rows:
        if r.k < k_min:
            continue
        rho = _rho(s, r.k)
        lo = -r.s_k * (rho * rho * a_hi - 1) * loglam
        hi = -r.s_k * a_lo * loglam
        r.sandwich_lo, r.sandwich_hi = lo, hi
        slack = bmax(slack, lo - r.log_dist, r.log_dist - hi)
    return slack.exp()


def sandwich_holds(rows: list[RecurrenceRow], theta: Ball) -> bool:
    lt = theta.log()
    return all(
        (r.sandwich_lo - lt).certified_lt(r.log_dist) is not False
        and r.log_dist.certified_lt(r.sandwich_hi + lt) is not False
        for r in rows
        if r.sandwich_lo is not None
    )


@dataclass
class AnnulusReport:
    k_range: tuple
    log_abs: dict = field(default_factory=dict)  # (k, side) -> log |h(A_k^side)|
    telescoping: dict = field(default_factory=dict)  # side -> residual Ball
    q_fit: Ball | None = None
    sandwich_ok: bool = False
    equal_sides: bool = False


def annulus_checks(
    p: ConjugacyParams, cache: OrbitCache, k_range, s: CutTimes | None = None, bits: int = WORK_BITS
) -> AnnulusReport:
    """A_k = D_k minus D_{k+1} on each side of 0, with |A_k| = |D_k| - |D_{k+1}|."""
    ks = list(k_range)
    s = s or fib_cut_times(max(ks) + 4)
    if s[max(ks) + 1] > cache.i_max:
        raise IndexError(f"cache must reach S({max(ks) + 1})")
    loglam = cache.params.lambda_.with_precision(bits).log()
    d = {k: abs(cache[s[k]].with_precision(bits)) for k in range(min(ks), max(ks) + 2)}
    rep = AnnulusReport((min(ks), max(ks)))
    width = {k: d[k] - d[k + 1] for k in ks}
    # both annuli have the same length by construction; the certified check is on the ball
    rep.equal_sides = all(certified_sign(width[k]) is Sign.POSITIVE for k in ks)
    hA = {}
    for side in Side:
        a = p.a(side)
        hD = {k: d[k] ** a for k in d}
        for k in ks:
            hA[(k, side)] = hD[k] - hD[k + 1]
            rep.log_abs[(k, side)] = hA[(k, side)].log()
        total = sum((hA[(k, side)] for k in ks), Ball.exact(0, bits))
        rep.telescoping[side] = total - (hD[min(ks)] - hD[max(ks) + 1])
    q = Ball.exact(0, bits)
    for k in ks:
        rho = _rho(s, k)
        for side in Side:
            a = p.a(side)
            lo = -s[k] * (rho * rho * a - 1) * loglam
            hi = -s[k] * a * loglam
            la = rep.log_abs[(k, side)]
            q = bmax(q, lo - la, la - hi)
    rep.q_fit = q.exp()
    lq = q
    rep.sandwich_ok = all(
        certified_sign(rep.log_abs[(k, side)] - (-s[k] * (_rho(s, k) ** 2 * p.a(side) - 1) * loglam - lq))
        is not Sign.NEGATIVE
        and certified_sign(-s[k] * p.a(side) * loglam + lq - rep.log_abs[(k, side)]) is not Sign.NEGATIVE
        for k in ks
        for side in Side
    )
    return rep


@dataclass
class RecurrenceEstimate:
    value: Ball
    n: int  # time attaining the window maximum
    window: int


def exponential_recurrence_estimate(rows: list[RecurrenceRow], n_max: int) -> RecurrenceEstimate:
    """max over close-return times S(k) <= n_max of -log|f^n(0)|/n."""
    cand = [r for r in rows if r.s_k <= n_max]
    if not cand:
        raise ValueError("no rows inside the window")
    best = max(cand, key=lambda r: r.exponent.center)
    return RecurrenceEstimate(best.exponent, best.s_k, n_max)


def recurrence_scan(
    p: ConjugacyParams, cache: OrbitCache, n_max: int, bits: int = WORK_BITS
) -> RecurrenceEstimate:
    """Same maximum taken over every n <= n_max, as a check that it sits at a cut time."""
    if n_max > cache.i_max:
        raise IndexError(f"cache must reach {n_max}")
    best, arg = None, 0
    for n in range(1, n_max + 1):
        _, ld = _log_abs_h(p, cache[n].with_precision(bits), n)
        e = -ld / n
        if best is None or e.center > best.center:
            best, arg = e, n
    return RecurrenceEstimate(best, arg, n_max)
