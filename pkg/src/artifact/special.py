"""Log-gamma, gamma ratios, rising factorials, Stirling numbers and two
classical identity validators.

Every routine that takes a ``ctx`` works in plain floats for the standard
context and in :class:`~artifact.precision.ExtReal` for the extended one.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

from .precision import (
    EXTENDED,
    STANDARD,
    ExtReal,
    PrecisionCtx,
    ext_exp,
    ext_log,
    lift,
)

__all__ = [
    "pochhammer",
    "log_gamma",
    "gamma_ratio",
    "gamma_fn",
    "binom",
    "stirling_numbers",
    "chu_vandermonde_residual",
    "chu_vandermonde_check",
    "gautschi_check",
    "is_nonpositive_integer",
]

_PI = ExtReal._raw(3.141592653589793116e00, 1.224646799147353207e-16)

# Lanczos coefficients, g = 7, n = 9
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.91893853320467274178


def is_nonpositive_integer(x) -> bool:
    xf = float(x)
    return xf <= 0 and xf == math.floor(xf) and (not isinstance(x, ExtReal) or x.lo == 0.0)


def binom(n: int, k: int) -> int:
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


def pochhammer(a, ell: int, ctx: PrecisionCtx | None = None):
    """Rising factorial ``a (a+1) ... (a+ell-1)``; ``(a)_0 = 1``."""
    if ell < 0:
        raise ValueError("pochhammer order must be non-negative")
    a = lift(a, ctx)
    out = lift(1, ctx)
    for j in range(ell):
        out = out * (a + j)
    return out


# -- Bernoulli numbers for the Stirling series ------------------------------


@lru_cache(maxsize=None)
def _bernoulli(m: int) -> Fraction:
    # B_m with B_1 = -1/2 via the standard recurrence
    if m == 0:
        return Fraction(1)
    return -sum(math.comb(m + 1, j) * _bernoulli(j) for j in range(m)) / (m + 1)


@lru_cache(maxsize=None)
def _stirling_coeffs(terms: int):
    return tuple(
        ExtReal.from_fraction(_bernoulli(2 * k) / (2 * k * (2 * k - 1)))
        for k in range(1, terms + 1)
    )


_EXT_SHIFT = 16
_EXT_TERMS = 18


def _log_gamma_lanczos(x: float) -> float:
    if x < 0.5:
        # reflection keeps the approximation on its accurate half-plane
        return math.log(math.pi / abs(math.sin(math.pi * x))) - _log_gamma_lanczos(1.0 - x)
    x -= 1.0
    s = _LANCZOS[0]
    for i in range(1, 9):
        s += _LANCZOS[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (x + 0.5) * math.log(t) - t + math.log(s)


def _log_gamma_stirling(x: ExtReal) -> ExtReal:
    shift = 0
    prod = ExtReal(1.0)
    while float(x) + shift < _EXT_SHIFT:
        prod = prod * (x + shift)
        shift += 1
    y = x + shift
    half_log_2pi = ext_log(_PI * 2) * 0.5
    res = (y - 0.5) * ext_log(y) - y + half_log_2pi
    inv = 1 / y
    inv2 = inv * inv
    pw = inv
    for c in _stirling_coeffs(_EXT_TERMS):
        res = res + c * pw
        pw = pw * inv2
    if shift:
        res = res - ext_log(prod)
    return res


def log_gamma(x, ctx: PrecisionCtx = STANDARD):
    """``log Gamma(x)`` for ``x > 0``."""
    if not float(x) > 0:
        raise ValueError("log_gamma requires x > 0")
    if ctx.extended:
        xe = ExtReal.of(x)
        if xe.lo == 0.0 and float(xe).is_integer() and float(xe) < 200:
            # exact factorial, so the zeros at 1 and 2 come out exact
            return ext_log(ExtReal.of(math.factorial(int(float(xe)) - 1)))
        return _log_gamma_stirling(xe)
    x = float(x)
    if x.is_integer() and x < 171:
        return math.log(math.factorial(int(x) - 1))
    return _log_gamma_lanczos(x)


def gamma_fn(x: float) -> float:
    """Real gamma function in standard precision, poles rejected."""
    if is_nonpositive_integer(x):
        raise ValueError(f"Gamma has a pole at {x}")
    if x > 0:
        return math.exp(_log_gamma_lanczos(x)) if not float(x).is_integer() else float(
            math.factorial(int(x) - 1)
        )
    # reflection for negative non-integers
    return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))


def _as_exact_int(d) -> int | None:
    df = float(d)
    if isinstance(d, ExtReal) and abs(d.lo) > 0:
        return None
    if df == math.floor(df):
        return int(df)
    return None


_ASYM_START = 20.0


def _log_ratio_asym(x, a, b, ctx):
    """log Gamma(x+a)/Gamma(x+b) for large x without subtractive cancellation."""
    one = lift(1, ctx)
    xa = x + a
    xb = x + b
    if ctx.extended:
        l1a = ext_log(one + a / x)
        l1b = ext_log(one + b / x)
        lx = ext_log(x)
    else:
        l1a = math.log1p(a / x)
        l1b = math.log1p(b / x)
        lx = math.log(x)
    res = (a - b) * lx + (xa - 0.5) * l1a - (xb - 0.5) * l1b - (a - b)
    terms = _EXT_TERMS if ctx.extended else 8
    stop = 1e-34 if ctx.extended else 1e-18
    ia = 1 / xa
    ib = 1 / xb
    ia2 = ia * ia
    ib2 = ib * ib
    pa, pb = ia, ib
    scale = abs(float(res)) + 1.0
    for c in _stirling_coeffs(terms):
        cc = c if ctx.extended else float(c)
        term = cc * (pa - pb)
        res = res + term
        if abs(float(term)) < stop * scale:
            break
        pa = pa * ia2
        pb = pb * ib2
    return res


def gamma_ratio(num_arg, den_arg, ctx: PrecisionCtx = STANDARD):
    """``Gamma(num_arg) / Gamma(den_arg)``.

    Returns 0 when ``den_arg`` is a non-positive integer (zero of the
    reciprocal gamma function). Integer differences use a finite product;
    other differences use a cancellation-free asymptotic log difference after
    upward recurrence.
    """
    if is_nonpositive_integer(den_arg):
        return lift(0, ctx)
    if is_nonpositive_integer(num_arg):
        raise ValueError(f"Gamma(num_arg) has a pole at {num_arg}")
    num = lift(num_arg, ctx)
    den = lift(den_arg, ctx)
    d = _as_exact_int(num - den)
    if d is not None:
        if d >= 0:
            return pochhammer(den, d, ctx)
        return lift(1, ctx) / pochhammer(num, -d, ctx)
    if not (float(num) > 0 and float(den) > 0):
        # negative non-integer arguments: fall back to reflection formula
        return lift(gamma_fn(float(num)) / gamma_fn(float(den)), ctx)
    # shift both arguments up by m so the asymptotic series converges fast
    base = min(float(num), float(den))
    m = max(0, int(math.ceil(_ASYM_START - base)))
    x = lift(m, ctx) + den
    a = num - den
    logr = _log_ratio_asym(x, a, lift(0, ctx), ctx)
    if ctx.extended:
        r = ext_exp(logr)
    else:
        r = math.exp(logr)
    if m:
        # Gamma(num)/Gamma(den) = [Gamma(num+m)/Gamma(den+m)] * (den)_m / (num)_m
        r = r * pochhammer(den, m, ctx) / pochhammer(num, m, ctx)
    return r


# -- Stirling numbers -------------------------------------------------------

_STIRLING_MAX = 20
_INT64_MAX = 2**63 - 1


def _build_stirling_tables():
    n_max = _STIRLING_MAX
    first = [[0] * (n_max + 1) for _ in range(n_max + 1)]
    second = [[0] * (n_max + 1) for _ in range(n_max + 1)]
    first[0][0] = 1
    second[0][0] = 1
    for n in range(1, n_max + 1):
        for k in range(1, n + 1):
            first[n][k] = first[n - 1][k - 1] - (n - 1) * first[n - 1][k]
            second[n][k] = second[n - 1][k - 1] + k * second[n - 1][k]
            if abs(first[n][k]) > _INT64_MAX or abs(second[n][k]) > _INT64_MAX:
                raise OverflowError("Stirling number exceeds 64-bit range")
    return tuple(map(tuple, first)), tuple(map(tuple, second))


_STIRLING_FIRST, _STIRLING_SECOND = _build_stirling_tables()


def stirling_numbers(n: int, k: int, kind: str = "first_signed") -> int:
    """Signed Stirling number of the first kind or Stirling number of the second kind."""
    if not (0 <= k <= n <= _STIRLING_MAX):
        raise ValueError(f"Stirling indices out of range: n={n}, k={k}")
    if kind == "first_signed":
        return _STIRLING_FIRST[n][k]
    if kind == "second":
        return _STIRLING_SECOND[n][k]
    raise ValueError(f"unknown kind {kind!r}")


# -- identity validators ----------------------------------------------------


def chu_vandermonde_residual(b: float, c: float, k: int, with_scale: bool = False):
    """Residual of ``sum_j C(k,j)(-1)^j (b)_j / Gamma(c+j) = (c-b)_k / Gamma(c+k)``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    for j in range(k + 1):
        if is_nonpositive_integer(c + j):
            raise ValueError(f"Gamma pole at c+{j}={c + j}")
    terms = [
        math.comb(k, j) * (-1) ** j * pochhammer(b, j) / gamma_fn(c + j)
        for j in range(k + 1)
    ]
    lhs = math.fsum(terms)
    rhs = pochhammer(c - b, k) / gamma_fn(c + k)
    res = lhs - rhs
    if with_scale:
        return res, max(abs(t) for t in terms)
    return res


def chu_vandermonde_check(
    b_grid=(-2.5, -0.5, 0.0, 0.25, 0.5, 1.0, 1.5, 3.0),
    c_grid=(0.5, 1.0, 1.5, 2.0, 3.25, 7.0),
    k_max: int = 10,
    tol: float = 1e-12,
):
    """Run the residual over a grid; returns ``(violations, worst_relative)``."""
    violations = []
    worst = 0.0
    for b in b_grid:
        for c in c_grid:
            for k in range(k_max + 1):
                res, scale = chu_vandermonde_residual(b, c, k, with_scale=True)
                rel = abs(res) / scale if scale else abs(res)
                worst = max(worst, rel)
                if rel > tol:
                    violations.append((b, c, k, res))
    return violations, worst


GAUTSCHI_X = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 1e3)
GAUTSCHI_S = (0.1, 0.25, 0.5, 0.75, 0.9)


def gautschi_check(x_grid=GAUTSCHI_X, s_grid=GAUTSCHI_S, ctx: PrecisionCtx = STANDARD):
    """Check ``x^(1-s) < Gamma(x+1)/Gamma(x+s) < (x+1)^(1-s)`` with margin.

    Returns ``(violations, min_relative_margin)``.
    """
    need = 10 * ctx.rel_tol
    violations = []
    min_margin = math.inf
    for x in x_grid:
        for s in s_grid:
            r = float(gamma_ratio(x + 1, x + s, EXTENDED if ctx.extended else STANDARD))
            lo = x ** (1 - s)
            hi = (x + 1) ** (1 - s)
            margin = min((r - lo) / r, (hi - r) / r)
            min_margin = min(min_margin, margin)
            if margin <= need:
                violations.append((x, s, lo, r, hi))
    return violations, min_margin
