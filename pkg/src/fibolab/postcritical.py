"""Certified critical orbit, closest-return diameters and the partitions M_k.

Intervals are stored as pairs of orbit indices; every geometric claim reduces to
certified comparisons between cached orbit balls, with identical indices counting
as equal points.
"""
from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field
from typing import Iterable

import gmpy2
from .kneading import CutTimes, TentParams, fib_cut_times, tent_orbit_raw
from .numerics import (
    Ball,
    PrecisionCeiling,
    Sign,
    Unresolved,
    certified_sign,
    precision_budget,
)


class DisjointnessUnresolved(RuntimeError):
    pass


class StructureError(RuntimeError):
    """The orbit violated a combinatorial property it is expected to satisfy."""


class Side(enum.Enum):
    LEFT = "L"
    RIGHT = "R"


@dataclass(frozen=True)
class OrbitCache:
    params: TentParams
    points: tuple  # points[i] is the ball for c_i, points[0] = c = 0
    precision_bits: int

    @property
    def i_max(self) -> int:
        return len(self.points) - 1

    def __getitem__(self, i: int) -> Ball:
        if i < 0 or i > self.i_max:
            raise IndexError(f"orbit index {i} outside cache 0..{self.i_max}")
        return self.points[i]

    def sign(self, i: int) -> Sign:
        return certified_sign(self.points[i])

    def side(self, i: int) -> Side | None:
        s = self.sign(i)
        if s is Sign.UNRESOLVED:
            return None
        return Side.RIGHT if s is Sign.POSITIVE else Side.LEFT

    def dist(self, i: int) -> Ball:
        """|c_i - c| with c = 0."""
        return abs(self.points[i])

    def compare(self, i: int, j: int) -> int | None:
        """Certified order of c_i and c_j: -1, 0, 1, or None if undecided."""
        if i == j:
            return 0
        s = certified_sign(self.points[i] - self.points[j])
        if s is Sign.UNRESOLVED:
            return None
        return -1 if s is Sign.NEGATIVE else 1

    def abs_compare(self, i: int, j: int) -> int | None:
        """Certified order of |c_i| and |c_j|."""
        if i == j:
            return 0
        s = certified_sign(self.dist(i) - self.dist(j))
        if s is Sign.UNRESOLVED:
            return None
        return -1 if s is Sign.NEGATIVE else 1

    def min_rel_accuracy_bits(self, indices: Iterable[int] | None = None) -> float:
        idx = range(1, self.i_max + 1) if indices is None else indices
        return min(self.points[i].rel_accuracy_bits() for i in idx)


def orbit_points(
    params: TentParams,
    i_max: int,
    target_bits: int = 64,
    max_precision: int = 1 << 16,
    require_signs: bool = True,
) -> OrbitCache:
    """c_0 .. c_{i_max} at precision_budget(i_max, lambda, target_bits) bits.

    With ``require_signs`` every c_i (i >= 1) must have a certified sign; otherwise the
    precision is doubled up to ``max_precision``.
    """
    if i_max < 1:
        raise ValueError("i_max must be >= 1")
    lam = params.lambda_
    slope = lam if lam.lower() > 1 else Ball.exact(2, 64)
    prec = min(max_precision, precision_budget(i_max, slope, target_bits))
    zero = Ball.exact(0, prec)
    while True:
        pts = [zero]
        bad = None
        for i, (c, r, _exact) in enumerate(tent_orbit_raw(lam, zero, i_max, prec), start=1):
            b = Ball._raw(c, r, prec)
            if require_signs and bad is None and certified_sign(b) is Sign.UNRESOLVED:
                bad = i
            pts.append(b)
        if bad is None:
            return OrbitCache(params, tuple(pts), prec)
        if prec >= max_precision:
            raise PrecisionCeiling(f"sign of c_{bad} unresolved at {prec} bits", index=bad, bits=prec)
        prec = min(2 * prec, max_precision)


# ---------------------------------------------------------------------------
# diameters


@dataclass
class DiameterRow:
    k: int
    s_k: int
    d: Ball
    nu: Ball | None
    c_ratio: Ball | None
    L: Ball


@dataclass
class DiameterStats:
    rows: list
    beta_estimate: Ball
    identity_residuals: dict = field(default_factory=dict)  # k -> Ball of lam^S(k-1)|D_k| - |D_k-1| - |D_k+1|

    def by_k(self, k: int) -> DiameterRow:
        return next(r for r in self.rows if r.k == k)


def diameter_stats(cache: OrbitCache, s: CutTimes | None = None, k_max: int = 14) -> DiameterStats:
    s = s or fib_cut_times(k_max + 3)
    lam = cache.params.lambda_
    prec = cache.precision_bits
    lamp = lam.with_precision(prec)
    avail = [k for k in range(0, k_max + 2) if s[k] <= cache.i_max]
    d = {}
    for k in avail:
        dk = cache.dist(s[k])
        if certified_sign(dk) is not Sign.POSITIVE:
            raise Unresolved(f"|D_{k}| not certified positive", index=s[k])
        d[k] = dk
    rows = []
    for k in range(0, k_max + 1):
        if k not in d:
            break
        L = lamp ** s[k + 1] * d[k]
        nu = d[k] / d[k + 1] if k + 1 in d else None
        cr = nu / lamp ** s[k] if nu is not None else None
        rows.append(DiameterRow(k, s[k], d[k], nu, cr, L))
    last, prev = rows[-1].L, rows[-2].L
    spread = abs(last - prev)
    beta = Ball._raw(last.center, gmpy2.context(precision=53, round=gmpy2.RoundUp).add(last.radius, spread.mag()), prec)
    resid = {}
    for k in range(2, k_max + 1):
        if k + 1 in d and k - 1 in d:
            resid[k] = lamp ** s[k - 1] * d[k] - d[k - 1] - d[k + 1]
    return DiameterStats(rows, beta, resid)


# ---------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class Label:
    kind: str  # "I" or "J"
    k: int
    n: int

    def __str__(self) -> str:
        return f"{self.kind}({self.k},{self.n})"


@dataclass(frozen=True)
class LabeledInterval:
    label: Label
    endpoints: tuple  # orbit indices (a, b) as given by the index formulas
    lo: int  # endpoint index that is certified to the left
    hi: int
    hull: tuple  # (Ball of c_lo, Ball of c_hi)

    def contains_index(self, cache: OrbitCache, j: int) -> bool | None:
        c1 = cache.compare(self.lo, j)
        c2 = cache.compare(j, self.hi)
        if c1 is None or c2 is None:
            if (c1 is not None and c1 > 0) or (c2 is not None and c2 > 0):
                return False
            return None
        return c1 <= 0 and c2 <= 0

    def contains_ball(self, x: Ball) -> bool | None:
        a, b = self.hull
        # the endpoints are themselves orbit points: an identical ball is the endpoint
        if _same(x, a) or _same(x, b):
            return True
        if a.upper() <= x.lower() and x.upper() <= b.lower():
            return True
        if x.upper() < a.lower() or x.lower() > b.upper():
            return False
        return None


def _same(x: Ball, y: Ball) -> bool:
    return x is y or (x.center == y.center and x.radius == y.radius)


def I_endpoints(s: CutTimes, k: int, n: int = 0) -> tuple[int, int]:
    if n == 0:
        return (s[k], s[k + 1]) if k % 2 == 0 else (s[k], s[k + 2])
    if not 1 <= n < s[k - 1]:
        raise ValueError(f"I_{k}^{n} is not part of M_{k}")
    return (n, s[k] + n)


def J_endpoints(s: CutTimes, k: int, n: int = 0) -> tuple[int, int]:
    if not 0 <= n < s[k - 2]:
        raise ValueError(f"J_{k}^{n} is not part of M_{k}")
    return (s[k - 1] + n, s[k + 1] + s[k - 1] + n)


def D_endpoints(s: CutTimes, k: int) -> tuple[int, int]:
    return (0, s[k])


def partition_labels(s: CutTimes, k: int) -> list[tuple[Label, tuple[int, int]]]:
    out = [(Label("I", k, n), I_endpoints(s, k, n)) for n in range(0, s[k - 1])]
    out += [(Label("J", k, n), J_endpoints(s, k, n)) for n in range(0, s[k - 2])]
    return out


def required_index(s: CutTimes, k: int) -> int:
    """Largest orbit index referenced by M_k."""
    return max(max(e) for _, e in partition_labels(s, k))


def _oriented(cache: OrbitCache, label: Label, a: int, b: int) -> LabeledInterval:
    c = cache.compare(a, b)
    if c is None:
        raise DisjointnessUnresolved(f"endpoints of {label} cannot be ordered")
    lo, hi = (a, b) if c < 0 else (b, a)
    return LabeledInterval(label, (a, b), lo, hi, (cache[lo], cache[hi]))


@dataclass(frozen=True)
class PartitionLevel:
    k: int
    intervals: tuple  # sorted left to right

    def __len__(self) -> int:
        return len(self.intervals)

    def by_label(self, kind: str, n: int = 0) -> LabeledInterval:
        return next(iv for iv in self.intervals if iv.label.kind == kind and iv.label.n == n)


def build_partition(cache: OrbitCache, s: CutTimes | None, k: int) -> PartitionLevel:
    s = s or fib_cut_times(k + 3)
    if k < 1:
        raise ValueError("k must be >= 1")
    need = required_index(s, k)
    if need > cache.i_max:
        raise IndexError(f"M_{k} needs orbit index {need}, cache has {cache.i_max}")
    ivs = [_oriented(cache, lab, *ends) for lab, ends in partition_labels(s, k)]
    ivs.sort(key=lambda iv: iv.hull[0].center)
    for left, right in zip(ivs, ivs[1:]):
        c = cache.compare(left.hi, right.lo)
        if c is None or c >= 0:
            raise DisjointnessUnresolved(f"{left.label} and {right.label} not certified disjoint")
    return PartitionLevel(k, tuple(ivs))


def interval_inside(cache: OrbitCache, inner: tuple[int, int], outer: tuple[int, int]) -> bool | None:
    """Certified [inner] subset of [outer] for closed intervals given by orbit indices."""
    il, ih = _order_pair(cache, *inner)
    ol, oh = _order_pair(cache, *outer)
    if None in (il, ol):
        return None
    c1 = cache.compare(ol, il)
    c2 = cache.compare(ih, oh)
    if c1 is None or c2 is None:
        return None
    return c1 <= 0 and c2 <= 0


def _order_pair(cache: OrbitCache, a: int, b: int):
    c = cache.compare(a, b)
    if c is None:
        return None, None
    return (a, b) if c <= 0 else (b, a)


# ---------------------------------------------------------------------------
# combinatorial verification


def side_rule(k: int) -> Side:
    """Side of c_{S(k)} from k mod 4 (0, 3 -> right; 1, 2 -> left)."""
    return Side.RIGHT if k % 4 in (0, 3) else Side.LEFT


@dataclass
class CombinatoricsReport:
    claims: dict = field(default_factory=dict)  # (claim, k) -> True/False/None
    unresolved: list = field(default_factory=list)

    def record(self, claim: str, key, value: bool | None) -> None:
        self.claims[(claim, key)] = value
        if value is None:
            self.unresolved.append((claim, key))

    def all_true(self) -> bool:
        return all(v is True for v in self.claims.values())

    def failures(self) -> list:
        return [key for key, v in self.claims.items() if v is not True]

    def by_claim(self) -> dict:
        out: dict = {}
        for (claim, key), v in self.claims.items():
            out.setdefault(claim, {})[key] = v
        return out


def verify_combinatorics(cache: OrbitCache, s: CutTimes | None = None, k_max: int = 12) -> CombinatoricsReport:
    s = s or fib_cut_times(k_max + 4)
    rep = CombinatoricsReport()
    levels: dict[int, PartitionLevel] = {}
    for k in range(1, k_max + 2):
        if required_index(s, k) > cache.i_max:
            break
        try:
            levels[k] = build_partition(cache, s, k)
            if k <= k_max:
                rep.record("disjoint", k, True)
        except DisjointnessUnresolved:
            if k <= k_max:
                rep.record("disjoint", k, None)
    for k in range(1, k_max + 1):
        if k in levels:
            rep.record("count", k, len(levels[k]) == s[k])
            # integer-level check of the index formulas against the doubling rule
            # T^n(I_k) = [c_n, c_{S(k)+n}] continued to n = S(k-1)
            img = (s[k - 1], s[k] + s[k - 1])
            rep.record("image_formula", k, img == (s[k - 1], s[k + 1]))
    for k in range(1, k_max + 1):
        if k in levels and k + 1 in levels:
            rep.record("nested", k, _nested(cache, levels[k + 1], levels[k]))
            rep.record(
                "JI_in_I",
                k,
                _all3(
                    interval_inside(cache, J_endpoints(s, k + 1), I_endpoints(s, k)),
                    interval_inside(cache, I_endpoints(s, k + 1), I_endpoints(s, k)),
                ),
            )
    for k in range(1, k_max + 1):
        for kp in range(k + 1, k_max + 1):
            if max(J_endpoints(s, kp)) > cache.i_max:
                continue
            rep.record(
                "J_in_D_in_I",
                (k, kp),
                _all3(
                    interval_inside(cache, J_endpoints(s, kp), D_endpoints(s, kp - 1)),
                    interval_inside(cache, D_endpoints(s, kp - 1), I_endpoints(s, k)),
                ),
            )
    for k in range(1, k_max + 1):
        if s[k] > cache.i_max:
            break
        # |c_i| > |c_S(k-1)| for 0 < i < S(k), i != S(k-1)
        ok = True
        for i in range(1, s[k]):
            if i == s[k - 1]:
                continue
            c = cache.abs_compare(i, s[k - 1])
            if c is None:
                ok = None
                break
            if c <= 0:
                ok = False
                break
        rep.record("orbit_order", k, ok)
    for k in range(0, k_max + 1):
        if s[k] > cache.i_max:
            break
        sd = cache.side(s[k])
        rep.record("side_rule", k, None if sd is None else sd is side_rule(k))
    ks = [k for k in range(0, k_max + 1) if s[k] <= cache.i_max]
    for a, b in zip(ks, ks[1:]):
        c = cache.abs_compare(s[a], s[b])
        rep.record("diam_decreasing", a, None if c is None else c > 0)
    if cache.i_max >= 4:
        c = cache.abs_compare(3, 4)
        rep.record("c3_closer_than_c4", 0, None if c is None else c < 0)
    return rep


def _nested(cache: OrbitCache, inner: PartitionLevel, outer: PartitionLevel) -> bool | None:
    """Every interval of ``inner`` inside some interval of ``outer`` (both sorted)."""
    lefts = [ov.hull[0].center for ov in outer.intervals]
    for iv in inner.intervals:
        pos = bisect.bisect_right(lefts, iv.hull[0].center) - 1
        # centre placement only picks candidates; containment itself is certified
        cands = [outer.intervals[q] for q in (pos - 1, pos, pos + 1) if 0 <= q < len(outer)]
        hits = [interval_inside(cache, (iv.lo, iv.hi), (ov.lo, ov.hi)) for ov in cands]
        if any(h is True for h in hits):
            continue
        hits = [interval_inside(cache, (iv.lo, iv.hi), (ov.lo, ov.hi)) for ov in outer.intervals]
        if any(h is True for h in hits):
            continue
        return None if any(h is None for h in hits) else False
    return True


def _all3(*vals) -> bool | None:
    if any(v is False for v in vals):
        return False
    if any(v is None for v in vals):
        return None
    return True


# ---------------------------------------------------------------------------
# membership


OUTSIDE = "Outside"
UNRESOLVED = "Unresolved"


def locate(x: Ball, level: PartitionLevel):
    """Label of the interval holding x, ``OUTSIDE`` or ``UNRESOLVED``."""
    undecided = False
    for iv in level.intervals:
        v = iv.contains_ball(x)
        if v is True:
            return iv.label
        if v is None:
            undecided = True
    return UNRESOLVED if undecided else OUTSIDE


def locate_index(cache: OrbitCache, j: int, level: PartitionLevel):
    """Like ``locate`` for the orbit point c_j, using index identity at endpoints."""
    undecided = False
    for iv in level.intervals:
        v = iv.contains_index(cache, j)
        if v is True:
            return iv.label
        if v is None:
            undecided = True
    return UNRESOLVED if undecided else OUTSIDE


def in_I(cache: OrbitCache, s: CutTimes, j: int, m: int) -> bool:
    ends = I_endpoints(s, m)
    if max(ends) > cache.i_max:
        raise IndexError(f"I_{m} needs orbit index {max(ends)}")
    lo, hi = _order_pair(cache, *ends)
    if lo is None:
        raise Unresolved(f"endpoints of I_{m} unordered", index=j)
    c1 = cache.compare(lo, j)
    c2 = cache.compare(j, hi)
    if c1 is not None and c1 > 0 or c2 is not None and c2 > 0:
        return False
    if c1 is None or c2 is None:
        raise Unresolved(f"membership of c_{j} in I_{m} undecided", index=j)
    return True


def in_J(cache: OrbitCache, s: CutTimes, j: int, m: int) -> bool:
    ends = J_endpoints(s, m)
    if max(ends) > cache.i_max:
        raise IndexError(f"J_{m} needs orbit index {max(ends)}")
    lo, hi = _order_pair(cache, *ends)
    if lo is None:
        raise Unresolved(f"endpoints of J_{m} unordered", index=j)
    c1 = cache.compare(lo, j)
    c2 = cache.compare(j, hi)
    if c1 is not None and c1 > 0 or c2 is not None and c2 > 0:
        return False
    if c1 is None or c2 is None:
        raise Unresolved(f"membership of c_{j} in J_{m} undecided", index=j)
    return True


def first_entry(cache: OrbitCache, s: CutTimes, j: int, k: int, limit: int) -> int:
    """Smallest l >= 0 with c_{j+l} in I_k."""
    for l in range(0, limit + 1):
        if in_I(cache, s, j + l, k):
            return l
    raise StructureError(f"c_{j} does not enter I_{k} within {limit} steps")


def return_window(s: CutTimes, k: int, i: int) -> tuple[int, int]:
    return s[k + i] - s[k], s[k + i + 2] - s[k + 2]


def forward_return_times_scan(cache: OrbitCache, s: CutTimes, start_index: int, k: int, depth: int) -> list[int]:
    """Brute-force oracle: n_i = min{m > n_{i-1} : c_{start+m} in I_{k+i}}, n_0 = 0."""
    if not in_I(cache, s, start_index, k):
        raise ValueError(f"c_{start_index} is not in I_{k}")
    out = []
    n = 0
    for i in range(1, depth + 1):
        m = n + 1
        while True:
            if start_index + m > cache.i_max:
                return out
            if in_I(cache, s, start_index + m, k + i):
                break
            m += 1
        out.append(m)
        n = m
    return out


def forward_return_times(cache: OrbitCache, s: CutTimes | None, start_index: int, k: int, depth: int) -> list[int]:
    """Return times n_i of c_{start} into I_{k+i}, i = 1..depth, by the I/J case analysis.

    A point of the post-critical set in I_m lies in I_{m+1} or in J_{m+1}.  Points of
    J_{m+1} reach I_{m+1} after S(m-1) steps; points of I_{m+1} come back to
    I_{m+1} or J_{m+1} after S(m) steps, and in the J case need S(m-1) more.  So each
    step costs two or three membership tests instead of a scan.  Stops early (shorter
    list) when the cache runs out.
    """
    s = s or fib_cut_times(k + depth + 4)
    if not in_I(cache, s, start_index, k):
        raise ValueError(f"c_{start_index} is not in I_{k}")
    out: list[int] = []
    n = 0
    for i in range(1, depth + 1):
        m = k + i - 1  # current point lies in I_m
        y = start_index + n
        if in_J(cache, s, y, m + 1):
            step = s[m - 1]
        elif in_I(cache, s, y, m + 1):
            step = s[m]
            z = y + step
            if z > cache.i_max:
                return out
            if not in_I(cache, s, z, m + 1):
                if not in_J(cache, s, z, m + 1):
                    raise StructureError(f"c_{z} left I_{m + 1} and J_{m + 1}")
                step += s[m - 1]
        else:
            raise StructureError(f"c_{y} in I_{m} but in neither I_{m + 1} nor J_{m + 1}")
        if start_index + n + step > cache.i_max:
            return out
        if not in_I(cache, s, start_index + n + step, m + 1):
            raise StructureError(f"case analysis failed at i={i}: c_{start_index + n + step} not in I_{m + 1}")
        n += step
        out.append(n)
    return out
