"""Midpoint-radius ball arithmetic on top of MPFR (via gmpy2).

A ``Ball`` is a center carried at ``precision_bits`` plus a 53-bit radius
that is always rounded upward, so the interval [c - r, c + r] encloses the
exact result of every operation applied to enclosed operands.
"""
from __future__ import annotations

import enum
import math
from fractions import Fraction
from functools import lru_cache
from typing import Callable, TypeVar, Union

import gmpy2
from gmpy2 import mpfr

RAD_BITS = 53
GUARD_BITS = 32
DEFAULT_PRECISION = 128

_UP = gmpy2.context(precision=RAD_BITS, round=gmpy2.RoundUp)
_DOWN = gmpy2.context(precision=RAD_BITS, round=gmpy2.RoundDown)
_ZERO = mpfr(0)

T = TypeVar("T")
Number = Union[int, float, str, Fraction, "Ball"]


class PrecisionCeiling(RuntimeError):
    """Raised when a sign or membership stays undecided at the maximum precision."""

    def __init__(self, message: str, index: int | None = None, bits: int | None = None):
        super().__init__(message)
        self.index = index
        self.bits = bits


class Unresolved(ArithmeticError):
    """Internal signal: the current precision cannot decide a sign."""

    def __init__(self, message: str = "unresolved", index: int | None = None):
        super().__init__(message)
        self.index = index


class Sign(enum.Enum):
    NEGATIVE = -1
    UNRESOLVED = 0
    POSITIVE = 1


@lru_cache(maxsize=None)
def nearest(prec: int) -> gmpy2.context:
    """Round-to-nearest context at ``prec`` bits (cached)."""
    return gmpy2.context(precision=prec, round=gmpy2.RoundToNearest)


def _err(y, prec: int):
    # bound on |exact - RN_prec(exact)|
    return _UP.mul_2exp(_UP.abs(y), -prec)


def _exact_neg(x):
    return nearest(max(x.precision, 2)).minus(x)


def _radd(*terms):
    acc = _ZERO
    for t in terms:
        acc = _UP.add(acc, t)
    return acc


class Ball:
    __slots__ = ("center", "radius", "precision_bits")

    def __init__(self, center, radius=0, precision_bits: int = DEFAULT_PRECISION):
        if precision_bits < 2:
            raise ValueError("precision_bits must be >= 2")
        ctx = nearest(precision_bits)
        c = ctx.plus(mpfr(center, precision_bits + 64)) if not isinstance(center, type(_ZERO)) else center
        r = _UP.plus(mpfr(radius)) if not isinstance(radius, type(_ZERO)) else radius
        if r < 0:
            raise ValueError("radius must be nonnegative")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", r)
        object.__setattr__(self, "precision_bits", precision_bits)

    def __setattr__(self, name, value):
        raise AttributeError("Ball is immutable")

    # -- constructors -------------------------------------------------------
    @classmethod
    def _raw(cls, c, r, prec: int) -> "Ball":
        b = object.__new__(cls)
        object.__setattr__(b, "center", c)
        object.__setattr__(b, "radius", r)
        object.__setattr__(b, "precision_bits", prec)
        return b

    @classmethod
    def exact(cls, value: Union[int, str, Fraction, float], prec: int = DEFAULT_PRECISION) -> "Ball":
        """Enclose an exact rational (int, Fraction, float, or decimal string)."""
        if isinstance(value, Ball):
            return value.with_precision(prec)
        if isinstance(value, str):
            value = Fraction(value)
        if isinstance(value, float):
            value = Fraction(value)
        if isinstance(value, int):
            value = Fraction(value)
        ctx = nearest(prec)
        num = gmpy2.mpz(value.numerator)
        den = gmpy2.mpz(value.denominator)
        c = ctx.div(mpfr(num, max(prec, num.bit_length() + 1)), mpfr(den, max(prec, den.bit_length() + 1)))
        r = _ZERO if Fraction(int(gmpy2.mpq(c).numerator), int(gmpy2.mpq(c).denominator)) == value else _err(c, prec)
        return cls._raw(c, r, prec)

    @classmethod
    def from_interval(cls, lo, hi, prec: int = DEFAULT_PRECISION) -> "Ball":
        lo = lo if isinstance(lo, Ball) else cls.exact(lo, prec)
        hi = hi if isinstance(hi, Ball) else cls.exact(hi, prec)
        a, b = lo.lower(), hi.upper()
        if a > b:
            raise ValueError("empty interval")
        ctx = nearest(prec + 2)
        c = nearest(prec).plus(ctx.div_2exp(ctx.add(a, b), 1))
        r = _UP.plus(max(_UP.sub(b, c), _UP.sub(c, a)))
        return cls._raw(c, r, prec)

    @classmethod
    def hull(cls, *balls: "Ball") -> "Ball":
        prec = max(b.precision_bits for b in balls)
        lo = min(b.lower() for b in balls)
        hi = max(b.upper() for b in balls)
        return cls.from_interval(Ball._raw(lo, _ZERO, prec), Ball._raw(hi, _ZERO, prec), prec)

    # -- inspection ---------------------------------------------------------
    def lower(self):
        ctx = gmpy2.context(precision=self.precision_bits + RAD_BITS + 8, round=gmpy2.RoundDown)
        return ctx.sub(self.center, self.radius)

    def upper(self):
        ctx = gmpy2.context(precision=self.precision_bits + RAD_BITS + 8, round=gmpy2.RoundUp)
        return ctx.add(self.center, self.radius)

    def contains(self, value: Union[int, Fraction, str, float, "Ball"]) -> bool:
        if isinstance(value, Ball):
            return self.lower() <= value.lower() and value.upper() <= self.upper()
        q = gmpy2.mpq(Fraction(value)) if isinstance(value, (str, float)) else gmpy2.mpq(value)
        return gmpy2.mpq(self.lower()) <= q <= gmpy2.mpq(self.upper())

    def overlaps(self, other: "Ball") -> bool:
        return not (self.upper() < other.lower() or other.upper() < self.lower())

    def sign(self) -> Sign:
        return certified_sign(self)

    def is_exact(self) -> bool:
        return gmpy2.is_zero(self.radius)

    def with_precision(self, prec: int) -> "Ball":
        if prec >= self.precision_bits:
            return Ball._raw(self.center, self.radius, prec)
        c = nearest(prec).plus(self.center)
        return Ball._raw(c, _radd(self.radius, _UP.sub(c, self.center) if c >= self.center else _UP.sub(self.center, c)), prec)

    def rel_accuracy_bits(self) -> float:
        """-log2(radius/|center|); inf for exact balls."""
        if gmpy2.is_zero(self.radius):
            return math.inf
        if gmpy2.is_zero(self.center):
            return -math.inf
        return float(gmpy2.log2(abs(self.center)) - gmpy2.log2(self.radius))

    def __float__(self) -> float:
        return float(self.center)

    def __repr__(self) -> str:
        return f"Ball({self.mid_str(20)} +/- {self.rad_str()}, {self.precision_bits}b)"

    def mid_str(self, digits: int = 30) -> str:
        return sci(self.center, digits)

    def rad_str(self) -> str:
        return sci(self.radius, 3)

    def digits(self) -> str:
        """Decimal digits of the center that are guaranteed by the radius (truncated string)."""
        if gmpy2.is_zero(self.radius):
            n = max(10, int(self.precision_bits * 0.30103))
        else:
            mag = 0 if gmpy2.is_zero(self.center) else int(gmpy2.floor(gmpy2.log10(abs(self.center))))
            n = max(1, mag - int(gmpy2.floor(gmpy2.log10(self.radius))) - 1)
        return sci(self.center, n)

    # -- arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "Ball":
        if isinstance(other, Ball):
            return other
        return Ball.exact(other, self.precision_bits)

    def __neg__(self) -> "Ball":
        return Ball._raw(_exact_neg(self.center), self.radius, self.precision_bits)

    def __pos__(self) -> "Ball":
        return self

    def __add__(self, other) -> "Ball":
        o = self._coerce(other)
        p = max(self.precision_bits, o.precision_bits)
        c = nearest(p).add(self.center, o.center)
        return Ball._raw(c, _radd(self.radius, o.radius, _err(c, p)), p)

    __radd__ = __add__

    def __sub__(self, other) -> "Ball":
        o = self._coerce(other)
        p = max(self.precision_bits, o.precision_bits)
        c = nearest(p).sub(self.center, o.center)
        return Ball._raw(c, _radd(self.radius, o.radius, _err(c, p)), p)

    def __rsub__(self, other) -> "Ball":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Ball":
        o = self._coerce(other)
        p = max(self.precision_bits, o.precision_bits)
        c = nearest(p).mul(self.center, o.center)
        r = _radd(
            _UP.mul(_UP.abs(self.center), o.radius),
            _UP.mul(_UP.abs(o.center), self.radius),
            _UP.mul(self.radius, o.radius),
            _err(c, p),
        )
        return Ball._raw(c, r, p)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Ball":
        o = self._coerce(other)
        if certified_sign(o) is Sign.UNRESOLVED:
            raise Unresolved("division by a ball containing zero")
        p = max(self.precision_bits, o.precision_bits)
        c = nearest(p).div(self.center, o.center)
        bc = _UP.abs(o.center)
        bd = _DOWN.abs(o.center)
        den = _DOWN.mul(bd, _DOWN.sub(bd, o.radius))
        if den <= 0:
            # radius huge relative to the precision of the radius arithmetic
            den = _DOWN.mul(o.mig(), bd)
        num = _radd(_UP.mul(_UP.abs(self.center), o.radius), _UP.mul(bc, self.radius))
        return Ball._raw(c, _radd(_UP.div(num, den), _err(c, p)), p)

    def __rtruediv__(self, other) -> "Ball":
        return self._coerce(other) / self

    def mig(self):
        """Lower bound on |x| over the ball (0 if it straddles zero)."""
        lo = _DOWN.sub(_DOWN.abs(self.center), self.radius)
        return lo if lo > 0 else _ZERO

    def mag(self):
        """Upper bound on |x| over the ball."""
        return _UP.add(_UP.abs(self.center), self.radius)

    def __abs__(self) -> "Ball":
        s = certified_sign(self)
        if s is Sign.POSITIVE:
            return self
        if s is Sign.NEGATIVE:
            return -self
        hi = self.mag()
        p = self.precision_bits
        c = nearest(p).div_2exp(hi, 1)
        return Ball._raw(c, _radd(_UP.div_2exp(hi, 1), _err(c, p)), p)

    def __pow__(self, other) -> "Ball":
        if isinstance(other, int) and other >= 0:
            out = Ball.exact(1, self.precision_bits)
            base = self
            e = other
            while e:
                if e & 1:
                    out = out * base
                base = base * base
                e >>= 1
            return out
        return bpow(self, other)

    def sqr(self) -> "Ball":
        return self * self

    def log(self) -> "Ball":
        return blog(self)

    def exp(self) -> "Ball":
        return bexp(self)

    def sqrt(self) -> "Ball":
        return bsqrt(self)

    # comparisons are certified: they return True/False only when decided
    def certified_lt(self, other) -> bool | None:
        d = certified_sign(self._coerce(other) - self)
        if d is Sign.UNRESOLVED:
            return None
        return d is Sign.POSITIVE

    def certified_gt(self, other) -> bool | None:
        return self._coerce(other).certified_lt(self)


def sci(x, digits: int) -> str:
    """Scientific notation with ``digits`` significant digits (works for any exponent)."""
    if gmpy2.is_zero(x):
        return "0"
    x = x if isinstance(x, type(_ZERO)) else mpfr(x)
    mant, exp, _ = x.digits(10, digits)
    neg = mant.startswith("-")
    mant = mant.lstrip("-")
    body = mant[0] + ("." + mant[1:] if len(mant) > 1 else "")
    return ("-" if neg else "") + f"{body}e{exp - 1}"


def certified_sign(x: Ball) -> Sign:
    if gmpy2.is_zero(x.radius):
        if gmpy2.is_zero(x.center):
            return Sign.UNRESOLVED
        return Sign.POSITIVE if x.center > 0 else Sign.NEGATIVE
    if x.center > 0 and x.center > x.radius:
        return Sign.POSITIVE
    if x.center < 0 and x.center < _exact_neg(x.radius):
        return Sign.NEGATIVE
    return Sign.UNRESOLVED


def is_exact_zero(x: Ball) -> bool:
    return gmpy2.is_zero(x.radius) and gmpy2.is_zero(x.center)


def blog(x: Ball) -> Ball:
    """Natural log of a ball certified positive."""
    if certified_sign(x) is not Sign.POSITIVE:
        raise Unresolved("log of a ball not certified positive")
    p = x.precision_bits
    c = nearest(p).log(x.center)
    # |log y - log c| <= r / (c - r) for y in the ball
    r = _UP.div(x.radius, _DOWN.sub(x.center, x.radius)) if not gmpy2.is_zero(x.radius) else _ZERO
    err = _err(c, p) if not gmpy2.is_zero(c) else _ZERO
    return Ball._raw(c, _radd(r, err), p)


def bexp(x: Ball) -> Ball:
    p = x.precision_bits
    c = nearest(p).exp(x.center)
    # |e^y - e^c| <= e^c (e^r - 1)
    r = _UP.mul(c, _UP.expm1(x.radius)) if not gmpy2.is_zero(x.radius) else _ZERO
    return Ball._raw(c, _radd(r, _err(c, p)), p)


def bsqrt(x: Ball) -> Ball:
    if certified_sign(x) is not Sign.POSITIVE:
        raise Unresolved("sqrt of a ball not certified positive")
    p = x.precision_bits
    c = nearest(p).sqrt(x.center)
    # |sqrt y - sqrt c| = |y - c| / (sqrt y + sqrt c) <= r / sqrt c
    r = _UP.div(x.radius, _DOWN.sqrt(x.center)) if not gmpy2.is_zero(x.radius) else _ZERO
    return Ball._raw(c, _radd(r, _err(c, p)), p)


def bpow(x: Ball, a) -> Ball:
    """x**a for x certified positive and real exponent a (exp(a log x))."""
    a = a if isinstance(a, Ball) else Ball.exact(a, x.precision_bits)
    if gmpy2.is_zero(x.radius) and gmpy2.is_zero(a.radius):
        p = max(x.precision_bits, a.precision_bits)
        if certified_sign(x) is not Sign.POSITIVE:
            raise Unresolved("pow of a ball not certified positive")
        c = nearest(p).pow(x.center, a.center)
        return Ball._raw(c, _err(c, p), p)
    return bexp(a * blog(x))


def bmin(*balls: Ball) -> Ball:
    """Enclosure of min over the listed balls."""
    p = max(b.precision_bits for b in balls)
    lo = min(b.lower() for b in balls)
    hi = min(b.upper() for b in balls)
    return Ball.from_interval(Ball._raw(lo, _ZERO, p), Ball._raw(hi, _ZERO, p), p)


def bmax(*balls: Ball) -> Ball:
    p = max(b.precision_bits for b in balls)
    lo = max(b.lower() for b in balls)
    hi = max(b.upper() for b in balls)
    return Ball.from_interval(Ball._raw(lo, _ZERO, p), Ball._raw(hi, _ZERO, p), p)


def log2_upper(x: Ball) -> float:
    """Float upper bound for log2 of a positive ball."""
    return float(_UP.log2(x.upper()))


def precision_budget(n_steps: int, slope: Union[Ball, float, int, str], target_bits: int) -> int:
    """Working precision so that an n-step orbit with expansion ``slope`` keeps ``target_bits``."""
    if n_steps < 0 or target_bits < 1:
        raise ValueError("n_steps >= 0 and target_bits >= 1 required")
    s = slope if isinstance(slope, Ball) else Ball.exact(slope, 128)
    if certified_sign(s - 1) is not Sign.POSITIVE:
        raise ValueError("slope must exceed 1")
    if n_steps == 0:
        return target_bits + GUARD_BITS
    # upper bound of n*log2(slope), taken at the ball's upper end
    up = gmpy2.context(precision=256, round=gmpy2.RoundUp)
    growth = up.mul(n_steps, up.log2(s.upper()))
    return int(gmpy2.ceil(growth)) + target_bits + GUARD_BITS


def escalate(fn: Callable[[int], T], start_bits: int, max_bits: int) -> T:
    """Run ``fn(bits)``, doubling bits on ``Unresolved`` until ``max_bits``."""
    bits = max(2, start_bits)
    while True:
        try:
            return fn(bits)
        except Unresolved as exc:
            if bits >= max_bits:
                raise PrecisionCeiling(
                    f"unresolved at the {max_bits}-bit ceiling: {exc}", index=exc.index, bits=max_bits
                ) from exc
            bits = min(2 * bits, max_bits)


def phi_ball(prec: int = DEFAULT_PRECISION) -> Ball:
    return (1 + bsqrt(Ball.exact(5, prec))) / 2
