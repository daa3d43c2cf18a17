"""Power-law conjugacy h_{a+,a-} and the conjugated map f = h o T o h^-1."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .kneading import CutTimes, TentParams, fib_cut_times
from .numerics import Ball, Sign, Unresolved, bmax, bmin, certified_sign, is_exact_zero
from .postcritical import I_endpoints, OrbitCache, Side


class HFun(enum.Enum):
    H = "H"
    H_INV = "H_INV"
    H_PRIME = "H_PRIME"


@dataclass(frozen=True)
class ConjugacyParams:
    """Exponents of h(x) = sign(x)|x|^a, a = a_plus for x > 0 and a_minus for x < 0."""

    a_plus: Ball
    a_minus: Ball

    def __post_init__(self):
        for name in ("a_plus", "a_minus"):
            if certified_sign(getattr(self, name) - 1) is not Sign.POSITIVE:
                raise ValueError(f"{name} must be certified > 1")

    @classmethod
    def of(cls, a_plus=2, a_minus="1.2", prec: int = 256) -> "ConjugacyParams":
        conv = lambda v: v if isinstance(v, Ball) else Ball.exact(v, prec)
        return cls(conv(a_plus), conv(a_minus))

    def a(self, side: Side) -> Ball:
        return self.a_plus if side is Side.RIGHT else self.a_minus

    # critical order of h' at 0
    def alpha(self, side: Side) -> Ball:
        return self.a(side) - 1

    # singularity order of f at h(0)
    def ell(self, side: Side) -> Ball:
        return 1 - 1 / self.a(side)

    def M(self, side: Side) -> Ball:
        """Non-flatness constant: e^-M |x|^alpha <= |h'(x)| <= e^M |x|^alpha holds with M = |log a|."""
        return abs(self.a(side).log())

    @property
    def alpha_plus(self) -> Ball:
        return self.alpha(Side.RIGHT)

    @property
    def alpha_minus(self) -> Ball:
        return self.alpha(Side.LEFT)

    @property
    def ell_plus(self) -> Ball:
        return self.ell(Side.RIGHT)

    @property
    def ell_minus(self) -> Ball:
        return self.ell(Side.LEFT)


def _ball(x, prec: int = 256) -> Ball:
    return x if isinstance(x, Ball) else Ball.exact(x, prec)


def _side(x: Ball) -> Side:
    s = certified_sign(x)
    if s is Sign.UNRESOLVED:
        raise Unresolved("sign of argument not certified")
    return Side.RIGHT if s is Sign.POSITIVE else Side.LEFT


def h_family_eval(p: ConjugacyParams, which: HFun, x) -> Ball:
    x = _ball(x)
    if is_exact_zero(x):
        if which is HFun.H_PRIME:
            raise Unresolved("h' at the critical point")
        return x
    side = _side(x)
    a = p.a(side)
    ax = abs(x)
    if which is HFun.H:
        y = ax ** a
    elif which is HFun.H_INV:
        y = ax ** (1 / a)
    else:
        return a * ax ** (a - 1)
    return y if side is Side.RIGHT else -y


def H(p, x):
    return h_family_eval(p, HFun.H, x)


def H_inv(p, x):
    return h_family_eval(p, HFun.H_INV, x)


def H_prime(p, x):
    return h_family_eval(p, HFun.H_PRIME, x)


def tent_eval(params: TentParams, x) -> Ball:
    x = _ball(x)
    return params.lambda_ * (1 - abs(x)) - 1


def f_eval(p: ConjugacyParams, params: TentParams, x) -> Ball:
    return H(p, tent_eval(params, H_inv(p, x)))


def f_prime(p: ConjugacyParams, params: TentParams, x) -> Ball:
    """|f'(x)| = lambda h'(T(y)) / h'(y), y = h^-1(x); signed by the branch of T."""
    y = H_inv(p, _ball(x))
    ty = tent_eval(params, y)
    mag = params.lambda_ * H_prime(p, ty) / H_prime(p, y)
    # T is increasing left of 0, h increasing everywhere
    return mag if _side(y) is Side.LEFT else -mag


def log_abs_f_prime(p: ConjugacyParams, params: TentParams, x) -> Ball:
    """log lambda + log h'(T(y)) - log h'(y)."""
    y = H_inv(p, _ball(x))
    return params.log_lambda + H_prime(p, tent_eval(params, y)).log() - H_prime(p, y).log()


@dataclass
class SingularityFit:
    side: Side
    log_dist: np.ndarray
    log_fprime: np.ndarray
    slope: float
    expected: float

    @property
    def error(self) -> float:
        return abs(self.slope - self.expected)


def fit_singularity_order(
    p: ConjugacyParams,
    params: TentParams,
    side: Side,
    decades: int = 9,
    start: float = 1e-3,
    per_decade: int = 8,
    prec: int = 256,
) -> SingularityFit:
    """Least-squares slope of log|f'(x)| against log|x - h(0)| on one side of the singularity."""
    if decades < 3:
        raise ValueError("decades must be >= 3")
    # keep the window clear of h(T^-1(0)) = h(+-(lambda-1)/lambda)
    pre = float((params.lambda_ - 1) / params.lambda_)
    limit = min(abs(float(H(p, Ball.exact(pre, 64)))), abs(float(H(p, Ball.exact(-pre, 64)))))
    if start >= limit:
        raise ValueError(f"start {start} reaches the critical preimages at {limit:.3g}")
    sign = 1 if side is Side.RIGHT else -1
    ts = np.linspace(0.0, decades, decades * per_decade + 1)
    xs = [Ball.exact(sign * start * 10.0 ** (-t), prec) for t in ts]
    ld = np.array([math.log(start) - t * math.log(10) for t in ts])
    lf = np.array([float(log_abs_f_prime(p, params, x)) for x in xs])
    slope = float(np.polyfit(ld, lf, 1)[0])
    return SingularityFit(side, ld, lf, slope, -float(p.ell(side)))


def estimate_h_prime_bounds(
    p: ConjugacyParams, cache: OrbitCache, k: int, s: CutTimes | None = None
) -> tuple[Ball, Ball]:
    """Certified (W1, W2) with W1 <= |h'(T(x))| <= W2 for x in I_k.

    T(I_k) is the hull of c_1 and the images of the endpoints of I_k; it stays on
    one side of 0 and |h'| is monotone in |x| there.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    s = s or fib_cut_times(k + 4)
    a, b = I_endpoints(s, k)
    idx = (1, a + 1, b + 1)
    if max(idx) > cache.i_max:
        raise ValueError(f"cache must reach index {max(idx)}")
    pts = [cache[i] for i in idx]
    signs = {certified_sign(q) for q in pts}
    if Sign.UNRESOLVED in signs or len(signs) != 1:
        raise Unresolved(f"T(I_{k}) not certified away from 0")
    dists = [abs(q) for q in pts]
    near, far = bmin(*dists), bmax(*dists)
    if signs == {Sign.NEGATIVE}:
        near, far = -near, -far
    lo, hi = H_prime(p, near), H_prime(p, far)
    return bmin(lo, hi), bmax(lo, hi)
