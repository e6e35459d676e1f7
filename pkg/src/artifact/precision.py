"""Scalar arithmetic contexts.

Two modes are supported: plain IEEE doubles ("standard") and an unevaluated
double-double pair ("extended") carrying roughly 32 significant digits.
Extended values are built from error-free transformations, so no external
multiprecision library is required at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

__all__ = [
    "PrecisionCtx",
    "STANDARD",
    "EXTENDED",
    "ExtReal",
    "two_sum",
    "two_prod",
    "ext_arith",
    "ext_log",
    "ext_exp",
    "ext_pow",
    "ext_sqrt",
    "ext_pow_log_exp",
    "LN2",
    "lift",
    "to_float",
    "power",
]

Number = Union[int, float, "ExtReal"]


@dataclass(frozen=True)
class PrecisionCtx:
    """Arithmetic mode plus comparison tolerances."""

    mode: str = "standard"
    rel_tol: float = 1e-13
    abs_tol: float = 1e-300

    def __post_init__(self):
        if self.mode not in ("standard", "extended"):
            raise ValueError(f"unknown precision mode {self.mode!r}")

    @property
    def extended(self) -> bool:
        return self.mode == "extended"

    @property
    def digits(self) -> int:
        return 32 if self.extended else 17


STANDARD = PrecisionCtx("standard", 1e-13, 1e-300)
EXTENDED = PrecisionCtx("extended", 1e-28, 1e-300)


# -- error-free transformations ---------------------------------------------

_SPLITTER = 134217729.0  # 2**27 + 1
_SPLIT_THRESH = 6.69692879491417e299


def two_sum(a: float, b: float):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def quick_two_sum(a: float, b: float):
    s = a + b
    return s, b - (s - a)


def _split(a: float):
    if abs(a) > _SPLIT_THRESH:
        a *= 3.7252902984619140625e-09  # 2**-28
        t = _SPLITTER * a
        hi = t - (t - a)
        lo = a - hi
        return hi * 268435456.0, lo * 268435456.0
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a: float, b: float):
    p = a * b
    if not math.isfinite(p):
        return p, 0.0
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


# -- the double-double value type -------------------------------------------


_new = object.__new__


class ExtReal:
    """Extended-precision real stored as the unevaluated sum ``hi + lo``."""

    __slots__ = ("hi", "lo")

    def __init__(self, hi: float = 0.0, lo: float = 0.0):
        # treated as an immutable value; no operation mutates an instance
        self.hi, self.lo = two_sum(float(hi), float(lo))

    @classmethod
    def _raw(cls, hi: float, lo: float) -> "ExtReal":
        obj = _new(cls)
        obj.hi = hi
        obj.lo = lo
        return obj

    # construction helpers
    @classmethod
    def of(cls, x) -> "ExtReal":
        if isinstance(x, ExtReal):
            return x
        if isinstance(x, bool):
            x = int(x)
        if isinstance(x, int):
            hi = float(x)
            if math.isinf(hi):
                raise OverflowError("integer too large for ExtReal")
            return cls(hi, float(x - int(hi)))
        if isinstance(x, Fraction):
            return cls.from_fraction(x)
        if isinstance(x, complex):
            raise TypeError("complex values are not supported in extended mode")
        return cls._raw(float(x), 0.0)

    @classmethod
    def from_fraction(cls, f: Fraction) -> "ExtReal":
        hi = float(f)
        lo = float(f - Fraction(hi)) if math.isfinite(hi) else 0.0
        return cls(hi, lo)

    @classmethod
    def from_string(cls, s: str) -> "ExtReal":
        return cls.from_fraction(Fraction(s))

    def to_fraction(self) -> Fraction:
        return Fraction(self.hi) + Fraction(self.lo)

    def __float__(self) -> float:
        return self.hi + self.lo

    def __repr__(self) -> str:
        return f"ExtReal({self.hi!r}, {self.lo!r})"

    def __str__(self) -> str:
        return self.format(32)

    def format(self, digits: int = 32) -> str:
        """Decimal rendering with ``digits`` significant digits."""
        if not math.isfinite(self.hi):
            return repr(self.hi)
        if self.hi == 0.0:
            return "0"
        f = self.to_fraction()
        neg = f < 0
        f = abs(f)
        e = math.floor(math.log10(float(f)))
        scaled = f / Fraction(10) ** (e - digits + 1)
        m = round(scaled)
        if m >= 10**digits:
            m = round(m / 10)
            e += 1
        s = str(m)
        mant = s[0] + "." + s[1:] if len(s) > 1 else s
        return f"{'-' if neg else ''}{mant}e{e:+03d}"

    # comparison
    def _cmp_key(self, other):
        o = ExtReal.of(other)
        return (self.hi, self.lo), (o.hi, o.lo)

    def __eq__(self, other):
        try:
            a, b = self._cmp_key(other)
        except TypeError:
            return NotImplemented
        return a == b

    def __hash__(self):
        return hash((self.hi, self.lo))

    def __lt__(self, other):
        a, b = self._cmp_key(other)
        return a < b

    def __le__(self, other):
        a, b = self._cmp_key(other)
        return a <= b

    def __gt__(self, other):
        a, b = self._cmp_key(other)
        return a > b

    def __ge__(self, other):
        a, b = self._cmp_key(other)
        return a >= b

    def __bool__(self):
        return self.hi != 0.0

    # arithmetic
    def __neg__(self):
        return ExtReal._raw(-self.hi, -self.lo)

    def __pos__(self):
        return self

    def __abs__(self):
        return -self if self.hi < 0 else self

    def __add__(self, other):
        if isinstance(other, complex):
            return NotImplemented
        return _add(self, ExtReal.of(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, complex):
            return NotImplemented
        return _add(self, -ExtReal.of(other))

    def __rsub__(self, other):
        return _add(ExtReal.of(other), -self)

    def __mul__(self, other):
        if isinstance(other, complex):
            return NotImplemented
        return _mul(self, ExtReal.of(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, complex):
            return NotImplemented
        return _div(self, ExtReal.of(other))

    def __rtruediv__(self, other):
        return _div(ExtReal.of(other), self)

    def __pow__(self, a):
        return ext_pow(self, a)

    def is_finite(self) -> bool:
        return math.isfinite(self.hi) and math.isfinite(self.lo)


def _add(a: ExtReal, b: ExtReal) -> ExtReal:
    ah, bh = a.hi, b.hi
    s = ah + bh
    bb = s - ah
    e = (ah - (s - bb)) + (bh - bb)
    al, bl = a.lo, b.lo
    t = al + bl
    tb = t - al
    f = (al - (t - tb)) + (bl - tb)
    e += t
    h = s + e
    e = e - (h - s)
    e += f
    s = h + e
    obj = _new(ExtReal)
    obj.hi = s
    obj.lo = e - (s - h)
    return obj


def _mul(a: ExtReal, b: ExtReal) -> ExtReal:
    ah, bh = a.hi, b.hi
    p = ah * bh
    obj = _new(ExtReal)
    if not -_SPLIT_THRESH < ah < _SPLIT_THRESH or not -_SPLIT_THRESH < bh < _SPLIT_THRESH:
        p1, p2 = two_prod(ah, bh)
        if not math.isfinite(p1):
            obj.hi, obj.lo = p1, 0.0
            return obj
        p2 += ah * b.lo + a.lo * bh
        obj.hi, obj.lo = quick_two_sum(p1, p2)
        return obj
    t = _SPLITTER * ah
    a1 = t - (t - ah)
    a2 = ah - a1
    t = _SPLITTER * bh
    b1 = t - (t - bh)
    b2 = bh - b1
    e = ((a1 * b1 - p) + a1 * b2 + a2 * b1) + a2 * b2
    e += ah * b.lo + a.lo * bh
    s = p + e
    obj.hi = s
    obj.lo = e - (s - p)
    return obj


def _div(a: ExtReal, b: ExtReal) -> ExtReal:
    if b.hi == 0.0:
        raise ZeroDivisionError("ExtReal division by zero")
    q1 = a.hi / b.hi
    r = _add(a, -_mul(b, ExtReal._raw(q1, 0.0)))
    q2 = r.hi / b.hi
    r = _add(r, -_mul(b, ExtReal._raw(q2, 0.0)))
    q3 = r.hi / b.hi
    q1, q2 = quick_two_sum(q1, q2)
    return _add(ExtReal._raw(q1, q2), ExtReal._raw(q3, 0.0))


def ext_arith(a: ExtReal, b: ExtReal, op: str) -> ExtReal:
    """Apply ``op`` in {add, sub, mul, div} to two extended values."""
    a = ExtReal.of(a)
    b = ExtReal.of(b)
    if op == "add":
        return _add(a, b)
    if op == "sub":
        return _add(a, -b)
    if op == "mul":
        return _mul(a, b)
    if op == "div":
        if b.hi == 0.0:
            raise ValueError("division by zero")
        return _div(a, b)
    raise ValueError(f"unknown op {op!r}")


# -- elementary functions ---------------------------------------------------

LN2 = ExtReal._raw(6.931471805599452862e-01, 2.319046813846299558e-17)
_ONE = ExtReal._raw(1.0, 0.0)
_EPS = 1e-34


def _ldexp(x: ExtReal, e: int) -> ExtReal:
    return ExtReal._raw(math.ldexp(x.hi, e), math.ldexp(x.lo, e))


# float-pair kernels used inside the series loops (no object overhead)


def _kmul(ah, al, bh, bl):
    p = ah * bh
    t = _SPLITTER * ah
    a1 = t - (t - ah)
    a2 = ah - a1
    t = _SPLITTER * bh
    b1 = t - (t - bh)
    b2 = bh - b1
    e = ((a1 * b1 - p) + a1 * b2 + a2 * b1) + a2 * b2
    e += ah * bl + al * bh
    s = p + e
    return s, e - (s - p)


def _kadd(ah, al, bh, bl):
    s = ah + bh
    bb = s - ah
    e = (ah - (s - bb)) + (bh - bb)
    t = al + bl
    tb = t - al
    f = (al - (t - tb)) + (bl - tb)
    e += t
    h = s + e
    e = e - (h - s)
    e += f
    s = h + e
    return s, e - (s - h)


def ext_sqrt(x) -> ExtReal:
    x = ExtReal.of(x)
    if x.hi < 0:
        raise ValueError("sqrt of negative value")
    if x.hi == 0.0:
        return ExtReal._raw(0.0, 0.0)
    y = math.sqrt(x.hi)
    yy = ExtReal._raw(y, 0.0)
    # one Newton correction on the double estimate
    r = _add(x, -_mul(yy, yy))
    return _add(yy, ExtReal._raw(r.hi / (2.0 * y), 0.0))


def _atanh_series_log(x: ExtReal) -> ExtReal:
    """``log x`` for ``x`` near 1 via ``2 atanh((x-1)/(x+1))``."""
    t = _div(_add(x, -_ONE), _add(x, _ONE))
    t2h, t2l = _kmul(t.hi, t.lo, t.hi, t.lo)
    # Horner in t^2 with reciprocal odd integers
    nterms = 1
    tt = abs(t.hi) if t.hi else 1e-300
    while nterms < 60 and tt ** (2 * nterms) > 1e-35:
        nterms += 1
    acc_h, acc_l = _INV_ODD[nterms]
    for k in range(nterms - 1, -1, -1):
        acc_h, acc_l = _kmul(acc_h, acc_l, t2h, t2l)
        acc_h, acc_l = _kadd(acc_h, acc_l, *_INV_ODD[k])
    acc_h, acc_l = _kmul(acc_h, acc_l, t.hi, t.lo)
    return ExtReal._raw(2.0 * acc_h, 2.0 * acc_l)


_INV_ODD = [
    ((lambda f: (float(f), float(f - Fraction(float(f)))))(Fraction(1, 2 * k + 1)))
    for k in range(62)
]
_INV_FACT = [
    ((lambda f: (float(f), float(f - Fraction(float(f)))))(Fraction(1, math.factorial(k))))
    for k in range(40)
]
_LOG_TABLE_N = 64
# log(1 + i/64) for the table reduction of the mantissa, i in [-16, 32]
_LOG_TABLE = {
    i: _atanh_series_log(ExtReal.from_fraction(Fraction(_LOG_TABLE_N + i, _LOG_TABLE_N)))
    for i in range(-16, 33)
}


def ext_log(x) -> ExtReal:
    """Natural logarithm: binary reduction, a table step, then an atanh series."""
    x = ExtReal.of(x)
    if not x.hi > 0:
        raise ValueError("log requires a positive argument")
    if not math.isfinite(x.hi):
        raise OverflowError("log of non-finite value")
    m, e = math.frexp(x.hi)
    # mantissa into [0.75, 1.5) so arguments near 1 never pick up a log 2
    if m < 0.75:
        e -= 1
    xr = _ldexp(x, -e)
    i = int(round((xr.hi - 1.0) * _LOG_TABLE_N))
    if i:
        c = ExtReal._raw(1.0 + i / _LOG_TABLE_N, 0.0)
        res = _add(_atanh_series_log(_div(xr, c)), _LOG_TABLE[i])
    else:
        res = _atanh_series_log(xr)
    if e:
        res = _add(res, _mul(LN2, ExtReal._raw(float(e), 0.0)))
    return res


def ext_exp(x) -> ExtReal:
    """Exponential by reduction modulo log 2, scaling, and a Taylor series."""
    x = ExtReal.of(x)
    if x.hi > 709.78:
        raise OverflowError("exp overflow")
    if x.hi < -745.0:
        return ExtReal._raw(0.0, 0.0)
    k = int(round(x.hi / LN2.hi))
    r = _add(x, -_mul(LN2, ExtReal._raw(float(k), 0.0)))
    sq = 6
    rh, rl = math.ldexp(r.hi, -sq), math.ldexp(r.lo, -sq)
    # s = expm1(r) by Horner on the Taylor coefficients
    nterms = 2
    ar = abs(rh) if rh else 1e-300
    while nterms < 38 and ar**nterms * _INV_FACT[nterms][0] > 1e-35:
        nterms += 1
    sh, sl = _INV_FACT[nterms]
    for j in range(nterms - 1, 0, -1):
        sh, sl = _kmul(sh, sl, rh, rl)
        sh, sl = _kadd(sh, sl, *_INV_FACT[j])
    sh, sl = _kmul(sh, sl, rh, rl)
    # undo the scaling: expm1(2y) = 2 expm1(y) + expm1(y)^2
    for _ in range(sq):
        qh, ql = _kmul(sh, sl, sh, sl)
        sh, sl = _kadd(2.0 * sh, 2.0 * sl, qh, ql)
    sh, sl = _kadd(sh, sl, 1.0, 0.0)
    return ExtReal._raw(math.ldexp(sh, k), math.ldexp(sl, k))


def _int_pow(x: ExtReal, n: int) -> ExtReal:
    if n < 0:
        return _div(_ONE, _int_pow(x, -n))
    result = _ONE
    base = x
    while n:
        if n & 1:
            result = _mul(result, base)
        n >>= 1
        if n:
            base = _mul(base, base)
    return result


def ext_pow(x, a) -> ExtReal:
    """``x**a`` for positive ``x``; integer and half-integer exponents are exact-ish."""
    x = ExtReal.of(x)
    if isinstance(a, ExtReal) and a.lo == 0.0:
        a = a.hi
    if isinstance(a, ExtReal):
        af = a.hi + a.lo
        if x.hi == 0.0 and af > 0:
            return ExtReal._raw(0.0, 0.0)
        if not x.hi > 0:
            raise ValueError("power requires a positive base")
        return ext_exp(_mul(a, ext_log(x)))
    a = float(a)
    if a.is_integer() and abs(a) <= 64:
        if x.hi == 0.0:
            return _zero_pow(a)
        return _int_pow(x, int(a))
    if not x.hi > 0:
        if x.hi == 0.0 and a > 0:
            return ExtReal._raw(0.0, 0.0)
        raise ValueError("power requires a positive base")
    if (2 * a).is_integer() and abs(a) <= 64:
        r = ext_sqrt(x)
        return _int_pow(r, int(2 * a))
    return ext_exp(_mul(ExtReal._raw(a, 0.0), ext_log(x)))


def _zero_pow(a: float) -> ExtReal:
    if a > 0:
        return ExtReal._raw(0.0, 0.0)
    if a == 0:
        return _ONE
    raise ValueError("zero raised to a negative power")


def ext_pow_log_exp(x, a):
    """Return ``(x**a, log x, exp(log x))`` for a positive extended ``x``."""
    x = ExtReal.of(x)
    if not x.hi > 0:
        raise ValueError("x must be positive")
    lx = ext_log(x)
    return ext_pow(x, a), lx, ext_exp(lx)


# -- mode-generic helpers ---------------------------------------------------


def lift(x, ctx: PrecisionCtx | None = None):
    """Convert ``x`` into the working type of ``ctx``."""
    if ctx is not None and ctx.extended:
        return ExtReal.of(x)
    if isinstance(x, ExtReal):
        return float(x)
    if isinstance(x, Fraction):
        return float(x)
    return x


def to_float(x) -> float:
    return float(x)


def power(x, a, ctx: PrecisionCtx | None = None):
    """``x**a`` in the working type, with ``0**a = 0`` for ``a > 0``."""
    if ctx is not None and ctx.extended or isinstance(x, ExtReal):
        return ext_pow(ExtReal.of(x), a)
    if x == 0:
        return 0.0 if a > 0 else math.inf
    return float(x) ** float(a)


def log(x, ctx: PrecisionCtx | None = None):
    if ctx is not None and ctx.extended or isinstance(x, ExtReal):
        return ext_log(x)
    return math.log(x)


def exp(x, ctx: PrecisionCtx | None = None):
    if ctx is not None and ctx.extended or isinstance(x, ExtReal):
        return ext_exp(x)
    return math.exp(x)
