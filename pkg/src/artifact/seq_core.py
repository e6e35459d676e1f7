"""Finite-window sequences on the integers and their difference calculus.

A :class:`LatticeSeq` stores values on ``[lo, hi]`` and is zero elsewhere.
Values are ``complex128`` in standard mode; real sequences may instead carry
:class:`~artifact.precision.ExtReal` entries (object arrays) so the same
stencils run in extended precision.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable

import numpy as np

from .precision import ExtReal, ext_pow

__all__ = [
    "LatticeSeq",
    "grad_k",
    "div_k",
    "shift_middle",
    "signed_pow",
    "signed_pow_array",
    "p_laplacian",
    "lp_energy",
    "stencil_coefficients",
]


def _is_ext_array(v: np.ndarray) -> bool:
    return v.dtype == object


def _zeros(n: int, ext: bool) -> np.ndarray:
    if ext:
        out = np.empty(n, dtype=object)
        out[:] = [ExtReal(0.0)] * n
        return out
    return np.zeros(n, dtype=np.complex128)


def _nonzero(v: np.ndarray) -> np.ndarray:
    if _is_ext_array(v):
        return np.fromiter((x.hi != 0.0 for x in v), dtype=bool, count=len(v))
    return v != 0


class LatticeSeq:
    """Sequence on ``[lo, hi]`` zero-extended to all of Z.

    ``level`` is the asserted H^level membership: every value below ``level``
    is zero. ``None`` means no membership claim.
    """

    __slots__ = ("lo", "hi", "values", "level")

    def __init__(self, lo: int, values, level: int | None = 0, trim: bool = True):
        vals = np.asarray(values)
        if vals.dtype == object:
            if any(isinstance(x, complex) for x in vals):
                raise TypeError("complex values cannot be stored in extended precision")
            vals = np.array([ExtReal.of(x) for x in vals], dtype=object)
        else:
            vals = vals.astype(np.complex128, copy=True)
        vals = vals.reshape(-1)
        lo = int(lo)
        if trim:
            nz = np.flatnonzero(_nonzero(vals))
            if len(nz) == 0:
                lo, vals = 0, vals[:0]
            else:
                lo += int(nz[0])
                vals = vals[nz[0] : nz[-1] + 1]
        self.lo = lo
        self.hi = lo + len(vals) - 1
        self.values = vals
        if level is not None:
            level = int(level)
            if level < 0:
                raise ValueError("level must be non-negative")
            if len(vals) and self.lo < level:
                bad = _nonzero(vals[: level - self.lo])
                if bad.any():
                    raise ValueError(f"values below level {level} must vanish")
        self.level = level

    # construction
    @classmethod
    def from_function(cls, f: Callable[[int], object], lo: int, hi: int, level: int | None = 0, extended=False):
        vals = [f(n) for n in range(lo, hi + 1)]
        if extended:
            vals = np.array([ExtReal.of(x) for x in vals], dtype=object)
        return cls(lo, vals, level=level)

    @classmethod
    def delta(cls, n: int, level: int | None = None) -> "LatticeSeq":
        if level is None:
            level = n if n >= 0 else None
        return cls(n, [1.0], level=level)

    @classmethod
    def empty(cls, level: int | None = 0) -> "LatticeSeq":
        return cls(0, np.zeros(0, dtype=np.complex128), level=level)

    # access
    @property
    def extended(self) -> bool:
        return _is_ext_array(self.values)

    def is_empty(self) -> bool:
        return len(self.values) == 0

    def __len__(self) -> int:
        return len(self.values)

    def at(self, n: int):
        if self.lo <= n <= self.hi:
            return self.values[n - self.lo]
        return ExtReal(0.0) if self.extended else 0j

    __getitem__ = at

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Dense values on ``[lo, hi]`` including the zero extension."""
        out = _zeros(hi - lo + 1, self.extended)
        if self.is_empty():
            return out
        a = max(lo, self.lo)
        b = min(hi, self.hi)
        if a <= b:
            out[a - lo : b - lo + 1] = self.values[a - self.lo : b - self.lo + 1]
        return out

    def indices(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def real(self) -> np.ndarray:
        if self.extended:
            return np.array([float(x) for x in self.values])
        return self.values.real.copy()

    def support(self):
        return (self.lo, self.hi) if not self.is_empty() else None

    def _derive(self, lo: int, vals: np.ndarray, level: int | None) -> "LatticeSeq":
        try:
            return LatticeSeq(lo, vals, level=level)
        except ValueError:
            return LatticeSeq(lo, vals, level=None)

    # pointwise algebra
    def _binary(self, other: "LatticeSeq", op, union: bool):
        if self.is_empty() and other.is_empty():
            return LatticeSeq.empty()
        if union:
            spans = [s.support() for s in (self, other) if not s.is_empty()]
            lo = min(s[0] for s in spans)
            hi = max(s[1] for s in spans)
        else:
            if self.is_empty() or other.is_empty():
                return LatticeSeq.empty()
            lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
            if lo > hi:
                return LatticeSeq.empty()
        vals = op(self.window(lo, hi), other.window(lo, hi))
        levels = [x for x in (self.level, other.level) if x is not None]
        level = min(levels) if len(levels) == 2 else None
        if not union and len(levels):
            level = max(levels)
        return self._derive(lo, vals, level)

    def __add__(self, other):
        return self._binary(other, np.add, True)

    def __sub__(self, other):
        return self._binary(other, np.subtract, True)

    def __mul__(self, other):
        if isinstance(other, LatticeSeq):
            return self._binary(other, np.multiply, False)
        return self._derive(self.lo, self.values * other, self.level)

    __rmul__ = __mul__

    def __neg__(self):
        return self._derive(self.lo, -self.values, self.level)

    def map(self, f) -> "LatticeSeq":
        """Apply ``f`` to the stored values (``f(0)`` must be 0)."""
        return self._derive(self.lo, f(self.values), self.level)

    def __repr__(self):
        if self.is_empty():
            return "LatticeSeq(empty)"
        return f"LatticeSeq(lo={self.lo}, hi={self.hi}, level={self.level})"


def stencil_coefficients(k: int, kind: str) -> list:
    """Coefficients of the order-``k`` stencil, listed by offset ``j = 0..k``.

    grad: u_{n-j} weights ``(-1)^j C(k,j)``; div: u_{n+j} weights
    ``(-1)^(k-j) C(k,j)``; middle: u_{n+j} weights ``C(k,j)/2^k``.
    """
    if kind == "grad":
        return [(-1) ** j * math.comb(k, j) for j in range(k + 1)]
    if kind == "div":
        return [(-1) ** (k - j) * math.comb(k, j) for j in range(k + 1)]
    if kind == "middle":
        return [math.comb(k, j) / 2**k for j in range(k + 1)]
    raise ValueError(f"unknown stencil kind {kind!r}")


def grad_k(u: LatticeSeq, k: int) -> LatticeSeq:
    """Backward difference applied ``k`` times."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0 or u.is_empty():
        return u
    m = len(u)
    out = _zeros(m + k, u.extended)
    for j, c in enumerate(stencil_coefficients(k, "grad")):
        out[j : j + m] = out[j : j + m] + c * u.values
    return u._derive(u.lo, out, u.level)


def div_k(u: LatticeSeq, k: int) -> LatticeSeq:
    """Forward difference applied ``k`` times."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0 or u.is_empty():
        return u
    m = len(u)
    out = _zeros(m + k, u.extended)
    # result index i corresponds to n = lo - k + i and reads u_{n+j}
    for j, c in enumerate(stencil_coefficients(k, "div")):
        out[k - j : k - j + m] = out[k - j : k - j + m] + c * u.values
    level = None if u.level is None else max(0, u.level - k)
    return u._derive(u.lo - k, out, level)


def shift_middle(u: LatticeSeq, m: int, kind: str) -> LatticeSeq:
    """``S^m u`` (``kind='shift'``) or ``M^m u`` (``kind='middle'``)."""
    if kind == "shift":
        level = None if u.level is None else u.level - m
        if level is not None and level < 0:
            level = 0
        return u._derive(u.lo - m, u.values.copy(), level)
    if kind == "middle":
        if m < 0:
            raise ValueError("middle operator needs m >= 0")
        if m == 0 or u.is_empty():
            return u
        n = len(u)
        out = _zeros(n + m, u.extended)
        for j, c in enumerate(stencil_coefficients(m, "middle")):
            out[m - j : m - j + n] = out[m - j : m - j + n] + c * u.values
        level = None if u.level is None else max(0, u.level - m)
        return u._derive(u.lo - m, out, level)
    raise ValueError(f"unknown kind {kind!r}")


def signed_pow(z, a: float):
    """``z |z|^(a-1)`` with ``0 -> 0``."""
    if not a > 0:
        raise ValueError("signed power needs a > 0")
    if isinstance(z, ExtReal):
        if z.hi == 0.0:
            return ExtReal(0.0)
        if a == 1:
            return z
        return z * ext_pow(abs(z), a - 1)
    if z == 0:
        return 0 * z
    if a == 1:
        return z
    return z * abs(z) ** (a - 1)


def signed_pow_array(v: np.ndarray, a: float) -> np.ndarray:
    if not a > 0:
        raise ValueError("signed power needs a > 0")
    if _is_ext_array(v):
        out = np.empty(len(v), dtype=object)
        out[:] = [signed_pow(x, a) for x in v]
        return out
    if a == 1:
        return v.copy()
    mag = np.abs(v)
    out = np.zeros_like(v)
    nz = mag > 0
    out[nz] = v[nz] * mag[nz] ** (a - 1)
    return out


def p_laplacian(u: LatticeSeq, ell: int, p: float) -> LatticeSeq:
    """``(-1)^ell div^ell ((grad^ell u)^<p-1>)``; ``ell = 0`` gives ``u^<p-1>``."""
    if ell < 0:
        raise ValueError("ell must be non-negative")
    if not p > 1:
        raise ValueError("p must exceed 1")
    if ell == 0:
        return u.map(lambda v: signed_pow_array(v, p - 1))
    w = grad_k(u, ell).map(lambda v: signed_pow_array(v, p - 1))
    r = div_k(w, ell)
    return -r if ell % 2 else r


def _abs_pow_sum(vals: Iterable, p: float) -> float:
    vals = np.asarray(vals)
    if _is_ext_array(vals):
        acc = ExtReal(0.0)
        for x in vals:
            if x.hi != 0.0:
                acc = acc + ext_pow(abs(x), p)
        return acc
    return math.fsum(np.abs(vals) ** p)


def _weight_values(weight, ns: np.ndarray):
    if hasattr(weight, "values") and callable(weight.values):
        return np.asarray(weight.values(ns), dtype=float)
    return np.array([float(weight(int(n))) for n in ns])


def lp_energy(u: LatticeSeq, ell: int, p: float, weight=None):
    """``sum_{n>=ell} |grad^ell u_n|^p``, or ``sum_{n>=ell} w_n |u_n|^p`` with a weight."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    if u.is_empty():
        return 0.0
    if weight is None:
        d = grad_k(u, ell)
        if d.is_empty() or d.hi < ell:
            return 0.0
        return _abs_pow_sum(d.window(max(ell, d.lo), d.hi), p)
    lo = max(ell, u.lo)
    if lo > u.hi:
        return 0.0
    ns = np.arange(lo, u.hi + 1)
    vals = u.window(lo, u.hi)
    mask = _nonzero(vals)
    if not mask.any():
        return 0.0
    w = _weight_values(weight, ns[mask])
    return math.fsum(w * np.abs(vals[mask].astype(np.complex128)) ** p)
