"""Backward chains x_{-n} = h(c_{m-n}) along the critical orbit and their derivative cocycle."""
from __future__ import annotations

from dataclasses import dataclass, field

from .conjugacy import ConjugacyParams
from .kneading import CutTimes, fib_cut_times
from .lyapunov import WORK_BITS, Cocycle, alpha_star
from .numerics import Ball
from .postcritical import OrbitCache, StructureError, in_I


@dataclass
class BackwardEntry:
    n: int
    b_n: Ball
    i: int | None = None  # backward close return into I_{k_hat+i}

    @property
    def tag(self) -> str:
        return "Far" if self.i is None else f"CloseReturn({self.i})"


@dataclass
class BackwardChain:
    m: int
    depth: int
    k_hat: int
    t: int  # first backward entry into I_{k_hat}
    entries: list
    returns: list  # n_i, i = 1, 2, ...
    residuals: list = field(repr=False, default_factory=list)  # n b_n + log|D f^-n|, per n

    @property
    def tagged(self) -> list:
        return [e for e in self.entries if e.i is not None]

    @property
    def window_min(self) -> BackwardEntry:
        return min(self.entries, key=lambda e: e.b_n.center)

    @property
    def window_max(self) -> BackwardEntry:
        return max(self.entries, key=lambda e: e.b_n.center)

    @property
    def tagged_max(self) -> BackwardEntry | None:
        tg = self.tagged
        return max(tg, key=lambda e: e.b_n.center) if tg else None


def backward_return_windows(s: CutTimes, k_hat: int, depth: int) -> list[tuple[int, int, int]]:
    """(i, lo, hi) with lo <= n_i - t <= hi for the i-th backward return into I_{k_hat+i}."""
    if k_hat < 1:
        raise ValueError("k_hat must be >= 1")
    return [
        (i, s[k_hat + i + 1] - s[k_hat + 1], s[k_hat + i + 2] - s[k_hat + 2]) for i in range(1, depth + 1)
    ]


def _backward_returns(cache: OrbitCache, s: CutTimes, m: int, k_hat: int, depth: int) -> tuple[int, list]:
    t = next((n for n in range(0, m) if in_I(cache, s, m - n, k_hat)), None)
    if t is None:
        raise StructureError(f"no backward entry of c_{m} into I_{k_hat}")
    rets = []
    n, i = t, 1
    while True:
        ends = max(s[k_hat + i], s[k_hat + i + 2])
        if ends > cache.i_max:
            break
        n += 1
        while n <= depth and not in_I(cache, s, m - n, k_hat + i):
            n += 1
        if n > depth:
            break
        rets.append(n)
        i += 1
    return t, rets


def backward_series(
    p: ConjugacyParams,
    cache: OrbitCache,
    m: int,
    depth: int,
    k_hat: int = 4,
    s: CutTimes | None = None,
    bits: int = WORK_BITS,
) -> BackwardChain:
    """b_n = log(lambda) - (1/n) log h'(c_{m-n}) + (1/n) log h'(c_m), n = 1..depth."""
    if not 0 < depth < m:
        raise ValueError("need 0 < depth < m")
    if m > cache.i_max:
        raise IndexError(f"cache must reach {m}")
    s = s or fib_cut_times(40)
    cc = Cocycle(p, cache, bits)
    # independent forward evaluation at a different precision for the consistency residual
    fwd = Cocycle(p, cache, bits + 64)
    t, rets = _backward_returns(cache, s, m, k_hat, depth)
    tag = {n: i for i, n in enumerate(rets, start=1)}
    top = cc.log_hp(m)
    entries, res = [], []
    for n in range(1, depth + 1):
        b = cc.log_lambda - cc.log_hp(m - n) / n + top / n
        entries.append(BackwardEntry(n, b, tag.get(n)))
        # log|D f^-n(x_0)| = -log|(f^n)'(x_{-n})|
        res.append(n * b - fwd.log_deriv_n(m - n, n))
    return BackwardChain(m, depth, k_hat, t, entries, rets, res)


def windows_ok(chain: BackwardChain, s: CutTimes) -> dict:
    wins = backward_return_windows(s, chain.k_hat, len(chain.returns))
    return {i: lo <= n - chain.t <= hi for (i, lo, hi), n in zip(wins, chain.returns)}


def gap(chain: BackwardChain) -> Ball:
    return chain.window_max.b_n - chain.window_min.b_n


def gap_target(p: ConjugacyParams, chain_loglam: Ball) -> Ball:
    return alpha_star(p) * chain_loglam - Ball.exact("0.2", chain_loglam.precision_bits)
