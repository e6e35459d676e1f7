"""Window audits of parameter sequences and complete-monotonicity checks.

The sign conditions audited here sit behind stencils that cancel roughly
``n**(2 ell)`` digits, which is more than double-double can absorb for
``ell >= 4`` at ``n ~ 10**3``. The audits therefore run in the standard
library :mod:`decimal` module at a precision sized to the window, and every
report carries the window it was checked on. Passing a window check is
finite evidence only.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Callable, Sequence

from .precision import EXTENDED, ExtReal
from .seq_core import LatticeSeq
from .special import _bernoulli, stirling_numbers
from .weights import (
    ExtractionError,
    WeightSpec,
    g_seq,
    g_tilde_seq,
    rho_tilde_series,
    rho_tilde_window,
)

__all__ = [
    "AssumptionReport",
    "A4Fit",
    "CMReport",
    "ScanRow",
    "ParamSeq",
    "OptimalParam",
    "TildeParam",
    "CallableParam",
    "as_param",
    "check_A1_A2_A3",
    "check_A4",
    "cm_window_check",
    "cm_power_class_check",
    "conjecture_scan",
    "hp_rho",
    "AUDIT_COLUMNS",
]

TOL = 1e-10
AUDIT_COLUMNS = (
    "ell",
    "p",
    "assumption_or_item",
    "window_lo",
    "window_hi",
    "passed",
    "first_violation_n",
    "min_margin",
)


# -- decimal helpers ---------------------------------------------------------


def _digits_for(ell: int, n_hi: int) -> int:
    # two stencils of order ell cancel about (2 n)^(2 ell)
    return 30 + int(math.ceil(2 * ell * math.log10(2 * max(n_hi, 10))))


def _dec(x) -> Decimal:
    if isinstance(x, Decimal):
        return x
    if isinstance(x, ExtReal):
        return Decimal(x.hi) + Decimal(x.lo)
    if isinstance(x, Fraction):
        return Decimal(x.numerator) / Decimal(x.denominator)
    if isinstance(x, complex):
        raise TypeError("audits need real values")
    return Decimal(float(x)) if not isinstance(x, int) else Decimal(x)


def _rel_err_of(x) -> float:
    if isinstance(x, (Decimal, int, Fraction)):
        return 0.0
    if isinstance(x, ExtReal):
        return EXTENDED.rel_tol
    return 2.0**-52


_PI_CACHE: dict[int, Decimal] = {}


def _dec_pi() -> Decimal:
    with localcontext() as ctx:
        prec = ctx.prec
        if prec in _PI_CACHE:
            return _PI_CACHE[prec]
        ctx.prec = prec + 5
        # series from the decimal module documentation
        three = Decimal(3)
        lasts, t, s, n, na, d, da = 0, three, 3, 1, 0, 0, 24
        while s != lasts:
            lasts = s
            n, na = n + na, na + 8
            d, da = d + da, da + 32
            t = (t * n) / d
            s += t
        ctx.prec = prec
        out = +s
    _PI_CACHE[prec] = out
    return out


def _dec_lgamma(x: Decimal) -> Decimal:
    """``log Gamma(x)`` for ``x > 0`` at the active decimal precision."""
    with localcontext() as ctx:
        digits = ctx.prec
        ctx.prec = digits + 12
        y = x
        prod = Decimal(1)
        while y < digits:
            prod *= y
            y += 1
        half = Decimal("0.5")
        res = (y - half) * y.ln() - y + (2 * _dec_pi()).ln() * half
        inv = 1 / y
        inv2 = inv * inv
        pw = inv
        eps = Decimal(10) ** -(digits + 4)
        for k in range(1, 400):
            b = _bernoulli(2 * k)
            term = Decimal(b.numerator) / Decimal(b.denominator * 2 * k * (2 * k - 1)) * pw
            res += term
            if abs(term) < eps * max(1, abs(res)):
                break
            pw *= inv2
        else:  # pragma: no cover
            raise ArithmeticError("Stirling series did not converge")
        res -= prod.ln()
    return +res


# -- parameter sequences -----------------------------------------------------


class ParamSeq:
    """A parameter sequence in ``H^ell``: zero below ``ell``.

    Subclasses supply :meth:`value` (float) and :meth:`hp_window`, which
    returns decimals at the active precision.
    """

    name = "param"
    rel_err = 0.0  # relative error of hp values beyond the decimal rounding

    def __init__(self, ell: int, p: float):
        if not (isinstance(ell, int) and ell >= 1):
            raise ValueError("ell must be an integer >= 1")
        if not float(p) > 1:
            raise ValueError("p must exceed 1")
        self.ell = ell
        self.p = float(p)

    def value(self, n: int) -> float:
        raise NotImplementedError

    def __call__(self, n: int) -> float:
        return self.value(n) if n >= self.ell else 0.0

    def hp_value(self, n: int) -> Decimal:
        return self.hp_window(n, n)[0]

    def hp_window(self, lo: int, hi: int) -> list:
        return [_dec(self(n)) for n in range(lo, hi + 1)]


class OptimalParam(ParamSeq):
    """``Gamma(n + 1/q) / Gamma(n - ell + 1)``."""

    name = "sw"

    def value(self, n):
        return float(g_seq(self.ell, self.p, n))

    def _iq(self) -> Decimal:
        return 1 - 1 / Decimal(self.p)

    def hp_value(self, n):
        if n < self.ell:
            return Decimal(0)
        iq = self._iq()
        return (_dec_lgamma(n + iq) - _dec_lgamma(Decimal(n - self.ell + 1))).exp()

    def hp_window(self, lo, hi):
        out = [Decimal(0)] * (hi - lo + 1)
        start = max(lo, self.ell)
        if start > hi:
            return out
        iq = self._iq()
        v = self.hp_value(start)
        for n in range(start, hi + 1):
            out[n - lo] = v
            v = v * (n + iq) / (n + 1 - self.ell)
        return out


class TildeParam(ParamSeq):
    """``n^(1/q) (n-1)(n-2)...(n-ell+1)``."""

    name = "sw_tilde"

    def value(self, n):
        return float(g_tilde_seq(self.ell, self.p, n))

    def hp_window(self, lo, hi):
        iq = 1 - 1 / Decimal(self.p)
        out = []
        for n in range(lo, hi + 1):
            if n < self.ell:
                out.append(Decimal(0))
                continue
            v = Decimal(n) ** iq
            for j in range(1, self.ell):
                v *= n - j
            out.append(v)
        return out


class CallableParam(ParamSeq):
    """Wraps a generator ``f(ell, p, n) -> real``; values below ``ell`` are zeroed."""

    name = "callable"

    def __init__(self, f: Callable, ell: int, p: float):
        super().__init__(ell, p)
        self.f = f
        self.rel_err = 0.0

    def value(self, n):
        v = self.f(self.ell, self.p, n)
        if isinstance(v, Decimal):
            v = float(v)
        v = float(v)
        if not math.isfinite(v):
            raise ValueError(f"generator returned non-finite value {v} at n={n}")
        return v

    def hp_window(self, lo, hi):
        out = []
        for n in range(lo, hi + 1):
            if n < self.ell:
                out.append(Decimal(0))
                continue
            v = self.f(self.ell, self.p, n)
            if not isinstance(v, (Decimal, ExtReal, Fraction, int)):
                v = self.value(n)
            d = _dec(v)
            if not d.is_finite():
                raise ValueError(f"generator returned non-finite value at n={n}")
            self.rel_err = max(self.rel_err, _rel_err_of(v))
            out.append(d)
        return out


def as_param(g, ell: int, p: float) -> ParamSeq:
    if isinstance(g, ParamSeq):
        if g.ell != ell or g.p != float(p):
            raise ValueError("parameter sequence built for a different (ell, p)")
        return g
    if g in ("sw", "optimal"):
        return OptimalParam(ell, p)
    if g in ("sw_tilde", "tilde"):
        return TildeParam(ell, p)
    if callable(g):
        return CallableParam(g, ell, p)
    raise TypeError(f"cannot use {g!r} as a parameter sequence")


# -- stencil chain -------------------------------------------------------------


def _grad(vals, errs):
    # backward difference; output index i covers input i (first entry dropped)
    out = [vals[i] - vals[i - 1] for i in range(1, len(vals))]
    oerr = [errs[i] + errs[i - 1] for i in range(1, len(vals))]
    return out, oerr


def _div(vals, errs):
    # forward difference; output index i covers input i (last entry dropped)
    out = [vals[i + 1] - vals[i] for i in range(len(vals) - 1)]
    oerr = [errs[i + 1] + errs[i] for i in range(len(vals) - 1)]
    return out, oerr


def _signed_pow_dec(x: Decimal, a: Decimal) -> Decimal:
    if x == 0:
        return Decimal(0)
    if x > 0:
        return x**a
    return -((-x) ** a)


@dataclass
class _Chain:
    lo: int
    hi: int
    grads: list  # grads[k][n - lo]
    grad_errs: list
    laps: dict  # m -> (-1)^m div^m (grad^ell g)^<p-1> on [lo, hi]
    lap_errs: dict
    g_lo: int = 0
    g: list = field(default_factory=list)


def _chain(param: ParamSeq, lo: int, hi: int, eps: float) -> _Chain:
    """All stencils needed by the audits on ``[lo, hi]``, with error bounds."""
    ell, p = param.ell, param.p
    base_lo = lo - ell
    g = param.hp_window(base_lo, hi + ell)
    eps_in = max(eps, param.rel_err)  # read after evaluation: callables set it
    gerr = [abs(v) * Decimal(eps_in) for v in g]
    grads = [None] * (ell + 1)
    gerrs = [None] * (ell + 1)
    cur, cerr = g, gerr
    # slice so that entry n - lo sits at index 0
    grads[0] = cur[ell:]
    gerrs[0] = cerr[ell:]
    for k in range(1, ell + 1):
        cur, cerr = _grad(cur, cerr)
        # cur[0] now sits at base_lo + k
        off = ell - k
        grads[k] = cur[off:]
        gerrs[k] = [e + abs(v) * Decimal(eps) for e, v in zip(cerr[off:], cur[off:])]
    pm1 = Decimal(p) - 1
    d = grads[ell]
    derr = gerrs[ell]
    F = [_signed_pow_dec(v, pm1) for v in d]
    ferr = []
    for v, e, fv in zip(d, derr, F):
        if v == 0:
            ferr.append(e ** pm1 if e > 0 else Decimal(0))
        else:
            ferr.append(abs(fv) * (pm1 * e / abs(v) + Decimal(eps)))
    laps, lerrs = {}, {}
    cur, cerr = F, ferr
    for m in range(1, ell + 1):
        cur, cerr = _div(cur, cerr)
        sign = -1 if m % 2 else 1
        laps[m] = [sign * v for v in cur]
        lerrs[m] = cerr
    return _Chain(lo, hi, grads, gerrs, laps, lerrs, base_lo, g)


# -- reports -------------------------------------------------------------------


@dataclass
class AssumptionReport:
    assumption: str
    passed: bool
    first_violation: tuple | None
    min_margin: float
    window: tuple
    note: str = ""

    def row(self, ell, p):
        fv = "" if self.first_violation is None else self.first_violation[-1]
        return (ell, p, self.assumption, self.window[0], self.window[1], self.passed, fv, self.min_margin)


def _envelope(vals, i, w):
    lo = max(0, i - w)
    return max(abs(v) for v in vals[lo : i + w + 1])


def _sign_scan(series, errs, strict: bool, w: int, lo: int, hi: int, k_label):
    """Scan values on [lo, hi]; returns (first_violation, min_margin)."""
    first = None
    min_margin = math.inf
    tol = Decimal(TOL)
    for i in range(hi - lo + 1):
        v = series[i]
        mag = _envelope(series, i, w)
        err = errs[i]
        margin = float(v / mag) if mag != 0 else 0.0
        min_margin = min(min_margin, margin)
        if strict:
            ok = v > tol * mag + err
        else:
            ok = v >= -(tol * mag + err)
        if not ok and first is None:
            first = (k_label, lo + i)
    return first, min_margin


def check_A1_A2_A3(g, ell: int, p: float, window: tuple, strict_A3: bool = False) -> list:
    """Audit positivity of ``grad^k g`` and the signs of the p-Laplacians.

    ``g`` is a :class:`ParamSeq`, one of the names ``'sw'``/``'sw_tilde'``, or
    a generator ``f(ell, p, n)``; values below ``ell`` are treated as zero.
    Non-strict checks allow ``-1e-10`` times the local magnitude (the largest
    value within ``ell + 1`` sites) plus the rounding bound; strict checks
    require the value to exceed that amount.
    """
    lo, hi = int(window[0]), int(window[1])
    if lo < ell:
        raise ValueError(f"window must start at n >= ell = {ell}")
    if hi < lo:
        raise ValueError("empty window")
    param = as_param(g, ell, p)
    digits = _digits_for(ell, hi + 2 * ell)
    with localcontext() as ctx:
        ctx.prec = digits
        eps = 10.0 ** (-(digits - 2))
        ch = _chain(param, lo, hi + ell, eps)
        w = ell + 1
        n = hi - lo
        reports = []
        first, mm = None, math.inf
        for k in range(ell + 1):
            f, m = _sign_scan(ch.grads[k][: n + w + 1], ch.grad_errs[k], True, w, lo, hi, k)
            mm = min(mm, m)
            if first is None and f is not None:
                first = f
        reports.append(AssumptionReport("A1", first is None, first, mm, (lo, hi)))
        first, mm = None, math.inf
        for k in range(1, ell):
            mdeg = ell - k
            f, m = _sign_scan(ch.laps[mdeg][: n + w + 1], ch.lap_errs[mdeg], False, w, lo, hi, k)
            mm = min(mm, m)
            if first is None and f is not None:
                first = f
        note = "void for ell=1" if ell == 1 else ""
        reports.append(AssumptionReport("A2", first is None, first, mm, (lo, hi), note))
        name = "A3_strict" if strict_A3 else "A3"
        f, m = _sign_scan(ch.laps[ell][: n + w + 1], ch.lap_errs[ell], strict_A3, w, lo, hi, 0)
        reports.append(AssumptionReport(name, f is None, f, m, (lo, hi)))
    return reports


# -- asymptotic fit --------------------------------------------------------------


@dataclass
class A4Fit:
    alpha: list
    residual_order: float
    alpha0_nonzero: bool
    passed: bool
    grid: tuple
    fit_errors: list = field(default_factory=list)
    note: str = "consistent with the expansion on a finite grid; not a verification"

    def report(self, ell, p) -> AssumptionReport:
        return AssumptionReport(
            "A4",
            self.passed,
            None if self.passed else ("fit", self.grid[-1]),
            -self.residual_order - (ell + 1 + 1 / p) if math.isfinite(self.residual_order) else math.inf,
            (self.grid[0], self.grid[-1]),
            self.note,
        )


def _neville_at_zero(xs, ys):
    """Value at 0 of the interpolating polynomial through ``(xs, ys)``."""
    p = list(ys)
    n = len(xs)
    for m in range(1, n):
        for i in range(n - m):
            p[i] = (xs[i + m] * p[i] - xs[i] * p[i + 1]) / (xs[i + m] - xs[i])
    return p[0]


FIT_SLACK = 0.25


def _default_grid(J: int, extra: int) -> list:
    count = max(14, J + extra + 2)
    ratio = 10 ** (3.7 / (count - 1))
    grid = sorted({int(round(8 * ratio**i)) for i in range(count)})
    return grid


def _fit_once(param, grid, J, T, digits, perturb=0.0):
    with localcontext() as ctx:
        ctx.prec = digits
        e = Decimal(param.ell) - 1 / Decimal(param.p)
        vals = [param.hp_value(n) for n in grid]
        if perturb:
            # alternating relative kick of the size of the input error
            vals = [v * (1 + Decimal(perturb) * (-1) ** i) for i, v in enumerate(vals)]
        xs = [1 / Decimal(n) for n in grid]
        resid = [v / Decimal(n) ** e for v, n in zip(vals, grid)]
        alpha, errs = [], []
        top_x = xs[-T:]
        for j in range(J):
            ys = [r / x**j for r, x in zip(resid[-T:], top_x)]
            a = _neville_at_zero(top_x, ys)
            b = _neville_at_zero(top_x[1:], ys[1:])
            alpha.append(a)
            errs.append(abs(a - b))
            resid = [r - a * x**j for r, x in zip(resid, xs)]
        # absolute remainder g_n - sum_j alpha_j n^(ell-j-1/p)
        tail = [abs(r) * Decimal(n) ** e for r, n in zip(resid, grid)]
    return alpha, errs, tail


def check_A4(g, ell: int, p: float, n_grid: Sequence[int] | None = None, extra: int = 6) -> A4Fit:
    """Fit ``g_n = sum_{j<=2 ell} alpha_j n^(ell-j-1/p) + O(n^(-ell-1-1/p))``.

    Coefficients are peeled off one at a time: each ``alpha_j`` is the value
    at ``1/n = 0`` of the polynomial interpolating the current residual
    times ``n^j`` on the ``2 ell + 1 + extra`` largest grid points. Raises
    :class:`ExtractionError` when two nested interpolants disagree. The
    remainder exponent is the least-squares slope of ``log |remainder|``
    against ``log n`` over the points where the remainder survives a repeat
    of the fit at higher precision (so pure rounding noise is not fitted).
    """
    param = as_param(g, ell, p)
    J = 2 * ell + 1
    grid = _default_grid(J, extra) if n_grid is None else sorted({int(n) for n in n_grid})
    if grid[0] < max(ell, 1) or grid[-1] < 1000 * grid[0]:
        raise ValueError("grid must start at n >= ell and span at least 3 decades")
    T = min(len(grid), J + extra)
    if T < J + 2:
        raise ValueError("grid too short for the requested fit")
    digits = 40 + int(math.ceil((J + extra + 2) * math.log10(grid[-1])))
    alpha, errs, tail = _fit_once(param, grid, J, T, digits)
    _, _, tail2 = _fit_once(param, grid, J, T, digits + 25)
    if param.rel_err > 0:
        kicked, _, _ = _fit_once(param, grid, J, T, digits, perturb=param.rel_err)
        errs = [max(e, abs(a - b)) for e, a, b in zip(errs, alpha, kicked)]
    for j, (a, err) in enumerate(zip(alpha, errs)):
        if err > Decimal("1e-6") * max(Decimal(1), abs(a)):
            raise ExtractionError(
                f"fit coefficient alpha_{j} is ill-conditioned",
                {"alpha": [float(x) for x in alpha], "errors": [float(x) for x in errs]},
            )
    pts = []
    for t1, t2, n in zip(tail, tail2, grid):
        if t2 > 0 and abs(t1 - t2) <= Decimal("1e-3") * t2:
            pts.append((math.log(n), float(t2.ln())))
    if len(pts) >= 3:
        mx = sum(x for x, _ in pts) / len(pts)
        my = sum(y for _, y in pts) / len(pts)
        slope = sum((x - mx) * (y - my) for x, y in pts) / sum((x - mx) ** 2 for x, _ in pts)
    else:
        slope = -math.inf  # nothing above rounding noise: the expansion terminates
    target = -(ell + 1 + 1 / param.p) + FIT_SLACK
    a0 = float(alpha[0])
    nonzero = abs(a0) > 1e-12
    return A4Fit(
        [float(a) for a in alpha],
        slope,
        nonzero,
        bool(nonzero and slope <= target),
        (grid[0], grid[-1]),
        [float(x) for x in errs],
    )


# -- window complete monotonicity ----------------------------------------------


@dataclass
class CMReport:
    order: int
    passed: bool
    first_violation: tuple | None
    min_margin: float
    window: tuple
    lam: float = 1.0
    note: str = "finite window proxy"


def _cm_scan(vals, errs, N: int, lo: int, hi: int):
    tol = Decimal(TOL)
    first = None
    mm = math.inf
    cur, cerr = list(vals), list(errs)
    for k in range(N + 1):
        if k:
            cur, cerr = _div(cur, cerr)
        sign = -1 if k % 2 else 1
        for i, (v, e) in enumerate(zip(cur, cerr)):
            sv = sign * v
            mag = _envelope(cur, i, N + 1)
            mm = min(mm, float(sv / mag) if mag else 0.0)
            if sv < -(tol * mag + e) and first is None:
                first = (k, lo + i)
    return first, mm


def _as_values(f, n_lo):
    if isinstance(f, LatticeSeq):
        if f.extended:
            return list(f.values), f.lo
        if f.values.imag.any():
            raise TypeError("complete monotonicity needs real values")
        return [float(v) for v in f.values.real], f.lo
    return list(f), n_lo


def cm_window_check(f, N: int, n_lo: int = 0, rel_err: float | None = None) -> CMReport:
    """Check ``(-1)^k div^k f >= -tol`` for ``k = 0..N`` on shrinking windows.

    ``f`` holds samples on ``[n_lo, n_lo + len(f) - 1]`` (a LatticeSeq is
    read on its support). ``rel_err`` overrides the assumed relative error of
    the samples (machine epsilon for floats, 1e-28 for ExtReal, 0 for
    decimals).
    """
    vals, lo = _as_values(f, n_lo)
    if N < 0:
        raise ValueError("order must be non-negative")
    if N >= len(vals):
        raise ValueError(f"order {N} needs a window longer than {len(vals)}")
    hi = lo + len(vals) - 1
    with localcontext() as ctx:
        ctx.prec = 60
        dv = [_dec(v) for v in vals]
        re = rel_err if rel_err is not None else max((_rel_err_of(v) for v in vals), default=0.0)
        errs = [abs(v) * Decimal(re) for v in dv]
        first, mm = _cm_scan(dv, errs, N, lo, hi)
    return CMReport(N, first is None, first, mm, (lo, hi))


def cm_power_class_check(f, lam: float, N: int, n_lo: int = 0) -> CMReport:
    """Window proxy for ``f^lam`` being order-``N`` completely monotone."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    vals, lo = _as_values(f, n_lo)
    if any(float(v) <= 0 for v in vals):
        raise ValueError("power class check needs f > 0 on the window")
    if lam == 1:
        rep = cm_window_check(vals, N, lo)
        rep.lam = 1.0
        return rep
    re = max((_rel_err_of(v) for v in vals), default=0.0)
    with localcontext() as ctx:
        ctx.prec = 60
        L = _dec(lam)
        powered = [_dec(v) ** L for v in vals]
    rep = cm_window_check(powered, N, lo, rel_err=lam * re + 1e-55)
    rep.lam = float(lam)
    return rep


# -- conjecture scan ---------------------------------------------------------------


def hp_rho(param: ParamSeq, lo: int, hi: int) -> list:
    """``-Delta_p^(ell) g / g^(p-1)`` on ``[lo, hi]`` at audit precision (floats)."""
    ell = param.ell
    digits = _digits_for(ell, hi + 2 * ell)
    with localcontext() as ctx:
        ctx.prec = digits
        ch = _chain(param, lo, hi + ell, 10.0 ** (-(digits - 2)))
        pm1 = Decimal(param.p) - 1
        return [float(l / g**pm1) for l, g in zip(ch.laps[ell], ch.grads[0][: hi - lo + 1])]


@dataclass
class ScanRow:
    ell: int
    p: float
    item: str
    window_lo: int | None
    window_hi: int | None
    passed: bool
    first_violation_n: int | None
    min_margin: float
    precision: str = "extended"

    def row(self):
        return (
            self.ell,
            self.p,
            self.item,
            "" if self.window_lo is None else self.window_lo,
            "" if self.window_hi is None else self.window_hi,
            self.passed,
            "" if self.first_violation_n is None else self.first_violation_n,
            self.min_margin,
        )


def _pointwise_rows(ell, p, n_max):
    birman = WeightSpec("classical_birman", ell, p)
    ns = range(ell, n_max + 1)
    ref = [float(birman(n, EXTENDED)) for n in ns]

    def scan(vals):
        first, mm = None, math.inf
        for n, r, b in zip(ns, vals, ref):
            m = float(r) / b - 1
            mm = min(mm, m)
            if not m > 0 and first is None:
                first = n
        return first, mm

    first, mm = scan(rho_tilde_window(ell, p, ell, n_max))
    prec = "extended"
    if first is not None:
        # evidence against at double-double: repeat at audit precision
        first, mm = scan(hp_rho(TildeParam(ell, p), ell, n_max))
        prec = "decimal"
    return ScanRow(ell, p, "ii_pointwise_vs_birman", ell, n_max, first is None, first, mm, prec)


def _scan_cell(args):
    ell, p, n_max, K = args
    rows = []
    reps = check_A1_A2_A3(TildeParam(ell, p), ell, p, (ell, n_max))
    for r in reps:
        fv = None if r.first_violation is None else r.first_violation[-1]
        rows.append(ScanRow(ell, p, "i_" + r.assumption, ell, n_max, r.passed, fv, r.min_margin, "decimal"))
    rows.append(_pointwise_rows(ell, p, n_max))
    _, coeffs = rho_tilde_series(ell, p, K)
    for k, a in enumerate(coeffs, start=1):
        rows.append(ScanRow(ell, p, f"iii_series_A{k}", None, None, a > -1e-12, None, a, "rational"))
    return rows


def conjecture_scan(ell_range, p_grid, n_max: int = 1000, K: int = 4, workers: int = 1) -> list:
    """Evidence table for the positivity conjecture on a grid of ``(ell, p)``.

    Per cell: window audits of the stencil parameter sequence, pointwise
    comparison against the classical Birman weight (re-run at audit precision
    if the double-double pass fails), and the signs of the first ``K``
    series coefficients. Rows come back in cell order regardless of
    ``workers``.
    """
    cells = [(int(ell), float(p), int(n_max), int(K)) for ell in ell_range for p in p_grid]
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(_scan_cell, cells))
    else:
        chunks = [_scan_cell(c) for c in cells]
    return [r for chunk in chunks for r in chunk]
