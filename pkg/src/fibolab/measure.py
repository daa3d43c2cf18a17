"""Invariant measure of the partition pieces: exact values in Z[phi] and visit counts."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .kneading import CutTimes, fib_cut_times, fibonacci_kneading_array
from .numerics import Ball, phi_ball
from .postcritical import OUTSIDE, UNRESOLVED, OrbitCache, PartitionLevel, locate_index


@dataclass(frozen=True)
class ZPhi:
    """a + b*phi with integer a, b and phi^2 = phi + 1."""

    a: int
    b: int = 0

    def __add__(self, o):
        o = _zp(o)
        return ZPhi(self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __sub__(self, o):
        o = _zp(o)
        return ZPhi(self.a - o.a, self.b - o.b)

    def __rsub__(self, o):
        return _zp(o) - self

    def __neg__(self):
        return ZPhi(-self.a, -self.b)

    def __mul__(self, o):
        o = _zp(o)
        # (a + b phi)(c + d phi) = ac + bd + (ad + bc + bd) phi
        return ZPhi(self.a * o.a + self.b * o.b, self.a * o.b + self.b * o.a + self.b * o.b)

    __rmul__ = __mul__

    def norm(self) -> int:
        return self.a * self.a + self.a * self.b - self.b * self.b

    def conjugate(self) -> "ZPhi":
        # phi -> 1 - phi
        return ZPhi(self.a + self.b, -self.b)

    def inverse(self) -> "ZPhi":
        n = self.norm()
        if n not in (1, -1):
            raise ZeroDivisionError(f"{self} is not a unit of Z[phi]")
        c = self.conjugate()
        return ZPhi(c.a * n, c.b * n)

    def __pow__(self, e: int) -> "ZPhi":
        base = self if e >= 0 else self.inverse()
        e = abs(e)
        out = ONE
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    def to_ball(self, prec: int = 128) -> Ball:
        return self.a + self.b * phi_ball(prec)

    def __float__(self) -> float:
        return self.a + self.b * (1 + 5**0.5) / 2

    def __str__(self) -> str:
        return f"({self.a},{self.b})"


def _zp(x) -> ZPhi:
    return x if isinstance(x, ZPhi) else ZPhi(int(x), 0)


ONE = ZPhi(1, 0)
PHI = ZPhi(0, 1)


def measure_closed_form(m: int) -> tuple[ZPhi, ZPhi]:
    """(mu(I_m), mu(J_m)) = (phi^-m, phi^-(m+1))."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return PHI ** (-m), PHI ** (-(m + 1))


@dataclass
class MeasureTable:
    mu_I: dict = field(default_factory=dict)
    mu_J: dict = field(default_factory=dict)

    @property
    def m_max(self) -> int:
        return max(self.mu_I)


def measure_recursion(m_max: int) -> MeasureTable:
    """Run the Fibonacci matrix step backwards from the m = 1 anchor.

    [[1,1],[1,0]] [mu_I(k); mu_J(k)] = [mu_I(k-1); mu_J(k-1)], so
    mu_I(k) = mu_J(k-1) and mu_J(k) = mu_I(k-1) - mu_J(k-1).
    """
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    tab = MeasureTable()
    tab.mu_I[1], tab.mu_J[1] = measure_closed_form(1)
    for k in range(2, m_max + 1):
        pi, pj = tab.mu_I[k - 1], tab.mu_J[k - 1]
        tab.mu_I[k] = pj
        tab.mu_J[k] = pi - pj
    return tab


def check_identities(tab: MeasureTable, s: CutTimes | None = None) -> dict:
    """Exact normalisation / splitting / shift identities for every m in the table."""
    if s is None or s.k_max < tab.m_max:
        s = fib_cut_times(tab.m_max + 2)
    out = {}
    for m in sorted(tab.mu_I):
        i, j = tab.mu_I[m], tab.mu_J[m]
        norm = s[m - 1] * i + s[m - 2] * j == ONE
        split = m == 1 or i + j == tab.mu_I[m - 1]
        shift = m == 1 or tab.mu_J[m - 1] == i
        closed = (i, j) == measure_closed_form(m)
        out[m] = {"normalisation": norm, "split": split, "shift": shift, "closed_form": closed}
    return out


def fib_matrix_power(e: int) -> tuple[tuple[int, int], tuple[int, int]]:
    a, b, c, d = 1, 0, 0, 1
    for _ in range(e):
        a, b, c, d = a + b, a, c + d, c
    return (a, b), (c, d)


@dataclass
class FrequencyReport:
    level_k: int
    N: int
    counts: dict  # label string -> visits
    unresolved: int
    outside: int
    by_certificate: dict  # "ball" / "symbolic" -> number of points classified that way
    backend: str

    def freq(self, label: str) -> float:
        return self.counts.get(label, 0) / self.N

    @property
    def unresolved_fraction(self) -> float:
        return self.unresolved / self.N

    def total_fraction(self) -> float:
        return (sum(self.counts.values()) + self.unresolved + self.outside) / self.N


def empirical_frequencies(
    cache: OrbitCache,
    level: PartitionLevel,
    N: int,
    ball_limit: int | None = None,
    use_numba: bool | None = None,
) -> FrequencyReport:
    """Visit counts of c_1..c_N in each interval of ``level``.

    Points up to ``ball_limit`` (default: the cache size) are located with certified ball
    comparisons.  Beyond the cache, c_j is located through its itinerary: on the
    post-critical set the signed order of kneading suffixes equals the point order, so
    comparing c_j with the interval endpoints needs only the exact Fibonacci kneading
    sequence.  Endpoints are orbit points, so ties are index identities.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    ball_limit = min(N, cache.i_max if ball_limit is None else ball_limit)
    labels = [str(iv.label) for iv in level.intervals]
    counts = {lab: 0 for lab in labels}
    unresolved = 0
    outside = 0
    for j in range(1, ball_limit + 1):
        lab = locate_index(cache, j, level)
        if lab == UNRESOLVED:
            unresolved += 1
        elif lab == OUTSIDE:
            outside += 1
        else:
            counts[str(lab)] += 1
    n_sym = N - ball_limit
    if n_sym > 0:
        e = fibonacci_kneading_array(4 * N + 4096)
        idx = np.arange(ball_limit + 1, N + 1, dtype=np.int64)
        lows = np.array([iv.lo for iv in level.intervals], dtype=np.int64)
        highs = np.array([iv.hi for iv in level.intervals], dtype=np.int64)
        res = _kernels.locate_indices(e, idx, lows, highs, use_numba=use_numba)
        unresolved += int(np.count_nonzero(res == _kernels.LOC_UNRESOLVED))
        outside += int(np.count_nonzero(res == _kernels.OUTSIDE))
        hist = np.bincount(res[res >= 0], minlength=len(labels))
        for u, lab in enumerate(labels):
            counts[lab] += int(hist[u])
    backend = _kernels.backend() if use_numba is None else ("numba" if use_numba and _kernels.HAS_NUMBA else "numpy")
    return FrequencyReport(
        level.k, N, counts, unresolved, outside, {"ball": ball_limit, "symbolic": max(0, n_sym)}, backend
    )


def symbolic_labels(level: PartitionLevel, indices, use_numba: bool | None = None) -> list:
    """Symbolic location of c_j for each j (labels as strings, or Outside/Unresolved)."""
    idx = np.asarray(list(indices), dtype=np.int64)
    e = fibonacci_kneading_array(4 * int(idx.max()) + 4096)
    lows = np.array([iv.lo for iv in level.intervals], dtype=np.int64)
    highs = np.array([iv.hi for iv in level.intervals], dtype=np.int64)
    res = _kernels.locate_indices(e, idx, lows, highs, use_numba=use_numba)
    names = [str(iv.label) for iv in level.intervals]
    return [names[r] if r >= 0 else (OUTSIDE if r == _kernels.OUTSIDE else UNRESOLVED) for r in res]
