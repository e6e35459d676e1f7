"""The inequality functional, its remainder terms, and the scalar inequality probe.

Remainders follow the two-branch form: for a selector ``s`` in ``(1, 2]``

    |sqrt(g_n/g_{n+1}) u_{n+1} - sqrt(g_{n+1}/g_n) u_n|^p

and for ``s > 2`` the square of that difference times
``(|div u_n| + |u_n| div g_n / g_n)^(p-2)``, with ``0^(p-2) = 0``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .assumption_audit import OptimalParam, ParamSeq, TildeParam, _chain, _digits_for
from .precision import EXTENDED, STANDARD, ExtReal, PrecisionCtx, ext_log, ext_pow
from .seq_core import LatticeSeq, grad_k, lp_energy
from .special import gamma_ratio, pochhammer
from .weights import WeightSpec, grad_g_values, g_values, inv_q, normalized_weight

__all__ = [
    "RemainderReport",
    "CorpusRow",
    "ScalarProbeRecord",
    "NonAttainRecord",
    "CORPUS_COLUMNS",
    "functional_gap",
    "remainder_small",
    "remainder_terms",
    "remainder_R_k",
    "optimal_prefactors",
    "sandwich_check",
    "scalar_lemma_probe",
    "nonattain_probe",
    "LogProfileRecord",
    "log_profile_gap",
    "criticality_search",
    "random_sequence",
    "run_corpus",
]

CORPUS_COLUMNS = ("trial", "ell", "p", "family", "lhs", "rhs", "gap", "sum_Rq", "sum_Rp")
GAP_RECHECK = 1e-12


def _require_level(u: LatticeSeq, ell: int):
    if u.is_empty():
        return
    if u.level is not None and u.level >= ell:
        return
    if u.lo < ell and np.any(u.window(u.lo, min(u.hi, ell - 1)) != 0):
        raise ValueError(f"u must vanish below ell={ell}")


def _weight_at(weight, n: int, ctx: PrecisionCtx):
    if isinstance(weight, WeightSpec):
        return weight(n, ctx)
    try:
        return weight(n, ctx)
    except TypeError:
        return weight(n)


def _energy_ext(u: LatticeSeq, ell: int, p: float, weight=None) -> ExtReal:
    """Both sides of the inequality in double-double, complex u split by parts."""
    if u.is_empty():
        return ExtReal(0.0)
    pe = ExtReal.of(p)
    half_p = pe / 2
    if weight is None:
        d = grad_k(u, ell)
        lo = max(ell, d.lo)
        vals = d.window(lo, d.hi)
        ns = range(lo, d.hi + 1)
    else:
        lo = max(ell, u.lo)
        vals = u.window(lo, u.hi)
        ns = range(lo, u.hi + 1)
    acc = ExtReal(0.0)
    for n, z in zip(ns, vals):
        if isinstance(z, ExtReal):
            mag2 = z * z
        else:
            z = complex(z)
            re, im = ExtReal.of(z.real), ExtReal.of(z.imag)
            mag2 = re * re + im * im
        if mag2.hi == 0.0:
            continue
        term = ext_pow(mag2, half_p)
        if weight is not None:
            term = term * _weight_at(weight, n, EXTENDED)
        acc = acc + term
    return acc


def functional_gap(u: LatticeSeq, ell: int, p: float, weight, ctx: PrecisionCtx = STANDARD):
    """``sum_{n>=ell} |grad^ell u_n|^p - sum_{n>=ell} w_n |u_n|^p``.

    Computed in floats, then repeated in double-double when the gap is
    below ``1e-12`` of the left side (or when ``ctx`` asks for it).
    """
    _require_level(u, ell)
    if u.is_empty():
        return ExtReal(0.0) if ctx.extended else 0.0
    lhs = lp_energy(u, ell, p)
    rhs = lp_energy(u, ell, p, weight=weight)
    gap = lhs - rhs
    if ctx.extended or abs(gap) < GAP_RECHECK * abs(lhs):
        g = _energy_ext(u, ell, p) - _energy_ext(u, ell, p, weight)
        return g if ctx.extended else float(g)
    return gap


# -- remainders ------------------------------------------------------------------


def remainder_terms(s: float, g0, g1, u0, u1, p: float) -> np.ndarray:
    """Vectorised remainder at sites with ``g_n = g0``, ``g_{n+1} = g1``,
    ``u_n = u0``, ``u_{n+1} = u1``."""
    if not s > 1:
        raise ValueError("selector s must exceed 1")
    g0 = np.asarray(g0, dtype=float)
    g1 = np.asarray(g1, dtype=float)
    if np.any(g0 <= 0) or np.any(g1 <= 0):
        raise ValueError("remainder needs positive parameter values")
    u0 = np.asarray(u0, dtype=complex)
    u1 = np.asarray(u1, dtype=complex)
    # sqrt(g0/g1) u1 - sqrt(g1/g0) u0, over a common square root
    base = np.abs(g0 * u1 - g1 * u0) / np.sqrt(g0 * g1)
    if s <= 2:
        return base**p
    second = np.abs(u1 - u0) + np.abs(u0) / g0 * (g1 - g0)
    out = base**2
    if p == 2:
        return np.where(second > 0, out, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = np.where(second > 0, second ** (p - 2), 0.0)
    return np.where(out > 0, out * fac, 0.0)


def _seq_at(x, n):
    if isinstance(x, LatticeSeq):
        return x.at(n)
    if callable(x):
        return x(n)
    return x[n]


def remainder_small(s: float, g, u, n: int, p: float | None = None) -> float:
    """Single remainder term at ``n``; ``p`` defaults to ``s``."""
    p = s if p is None else p
    g0, g1 = float(np.real(_seq_at(g, n))), float(np.real(_seq_at(g, n + 1)))
    u0, u1 = complex(_seq_at(u, n)), complex(_seq_at(u, n + 1))
    return float(remainder_terms(s, [g0], [g1], [u0], [u1], p)[0])


_EXT_LIMIT = 4096
_FLOAT_STENCIL_TOL = 1e-9


@lru_cache(maxsize=64)
def _ext_prefactor_table(ell: int, p: float, k: int) -> np.ndarray:
    """Prefactors at ``j = ell+1 .. _EXT_LIMIT - (ell-k)`` for the gamma
    parameter sequence, in double-double.

    ``grad^ell g_i = (1/q)_ell r_{i-ell}`` and ``grad^k g_i = (ell-k+1/q)_k
    g^(ell-k)_{i-k}`` with ``r_i = Gamma(i+1/q)/Gamma(i+1)``, so only the
    outer divergence is a stencil.
    """
    m = ell - k
    top = _EXT_LIMIT
    js = range(ell + 1, top - m + 1)
    if m == 0:
        return np.ones(len(js))
    E = EXTENDED
    iq = inv_q(p, E)
    pm1 = ExtReal.of(p) - 1
    c_ell = pochhammer(iq, ell, E)
    c_k = pochhammer(iq + m, k, E)
    r = [gamma_ratio(iq, 1, E)]
    for i in range(top):
        r.append(r[-1] * (i + iq) / (i + 1))
    F = [ExtReal(0.0)] * (top + 1)
    for i in range(ell, top + 1):
        F[i] = ext_pow(c_ell * r[i - ell], pm1)
    coeffs = [(-1) ** (m - t) * math.comb(m, t) for t in range(m + 1)]
    sign = -1 if m % 2 else 1
    out = np.empty(len(js))
    for idx, j in enumerate(js):
        acc = ExtReal(0.0)
        for t, c in enumerate(coeffs):
            acc = acc + c * F[j + t]
        # grad^k g_j = c_k r_{j-k} (j-ell+1)_m
        den = c_k * r[j - k]
        for t in range(1, m + 1):
            den = den * (j - ell + t)
        out[idx] = float(sign * acc / ext_pow(den, pm1))
    return out


def optimal_prefactors(ell: int, p: float, k: int, js) -> np.ndarray:
    """Prefactors ``-Delta_p^(ell-k) grad^k g_j / (grad^k g_j)^(p-1)`` of the
    gamma parameter sequence at the indices ``js >= ell+1``."""
    js = np.asarray(js, dtype=np.int64)
    m = ell - k
    if m == 0:
        return np.ones(len(js))
    p = float(p)
    table = _ext_prefactor_table(ell, p, k)
    out = np.empty(len(js))
    small = js < ell + 1 + len(table)
    out[small] = table[js[small] - ell - 1]
    if small.all():
        return out
    rest = js[~small]
    # float stencil of the closed form: relative error about (2j)^m * 1e-16
    span_lo, span_hi = int(rest.min()), int(rest.max()) + m
    span = np.arange(span_lo, span_hi + 1)
    Ff = (float(pochhammer(inv_q(p), ell)) * g_values(0, p, span - ell)) ** (p - 1)
    acc = np.zeros(len(rest))
    for t in range(m + 1):
        acc += (-1) ** (m - t) * math.comb(m, t) * Ff[rest - span_lo + t]
    vals = (-1 if m % 2 else 1) * acc / grad_g_values(ell, p, k, rest) ** (p - 1)
    loose = (2.0 * rest) ** m * 1e-16 > _FLOAT_STENCIL_TOL
    if loose.any():
        vals[loose] = _prefactor_tail(ell, p, k, rest[loose])
    out[~small] = vals
    return out


_FIT_LO, _FIT_HI, _FIT_NODES, _FIT_DEG = 4096, 32768, 32, 6


def _dec_prefactor_at(ell: int, p: float, k: int, j: int) -> float:
    # Gamma(1/q) cancels between the stencil and the denominator, leaving
    # (1/q)_m^(p-1) sum_t c_t (r_{j+t-ell} / r_{j-k})^(p-1) / ((j-ell+1)_m)^(p-1)
    # with finite rational products; decimal precision covers the j^m cancellation.
    m = ell - k
    with localcontext() as dc:
        dc.prec = 40 + int(m * math.log10(j + 1)) + 5
        pd, iq = Decimal(p), 1 - 1 / Decimal(p)
        pm1 = pd - 1
        acc = Decimal(0)
        for t in range(m):
            ratio = Decimal(1)
            for i in range(j + t - ell, j - k):
                ratio = ratio * (i + 1) / (i + iq)
            acc += (-1) ** (m - t) * math.comb(m, t) * ratio**pm1
        acc += 1
        poch_q, poch_j = Decimal(1), Decimal(1)
        for t in range(m):
            poch_q *= iq + t
            poch_j *= j - ell + 1 + t
        return float((-1) ** m * acc * (poch_q / poch_j) ** pm1)


@lru_cache(maxsize=None)
def _prefactor_tail_fit(ell: int, p: float, k: int):
    # j^-beta times the prefactor is a smooth function of x = 1/j with an
    # asymptotic series in x: fit on moderate j, evaluate towards x = 0.
    m = ell - k
    iq = 1.0 - 1.0 / p
    beta = -(iq + m) - (p - 1) * (ell - 1 + iq - k)
    x_lo, x_hi = 1.0 / _FIT_HI, 1.0 / _FIT_LO
    t = np.cos(np.pi * (np.arange(_FIT_NODES) + 0.5) / _FIT_NODES)
    nodes = np.unique(np.rint(1.0 / (0.5 * (x_lo + x_hi) + 0.5 * (x_hi - x_lo) * t)).astype(np.int64))
    vals = np.array([_dec_prefactor_at(ell, p, k, int(j)) * float(j) ** -beta for j in nodes])
    return beta, np.polynomial.Chebyshev.fit(1.0 / nodes, vals, _FIT_DEG, domain=[x_lo, x_hi])


def _prefactor_tail(ell: int, p: float, k: int, js: np.ndarray) -> np.ndarray:
    beta, fit = _prefactor_tail_fit(ell, float(p), k)
    return fit(1.0 / js) * js.astype(float) ** beta


class _ArrayParam(ParamSeq):
    name = "array"

    def __init__(self, g: LatticeSeq, ell: int, p: float):
        super().__init__(ell, p)
        self.g = g

    def value(self, n):
        return float(np.real(self.g.at(n)))

    def hp_window(self, lo, hi):
        out = []
        for n in range(lo, hi + 1):
            v = self.g.at(n) if n >= self.ell else 0.0
            out.append(Decimal(v.hi) + Decimal(v.lo) if isinstance(v, ExtReal) else Decimal(float(np.real(v))))
        self.rel_err = 2.0**-52
        return out


def _as_param(g, ell, p) -> ParamSeq:
    if isinstance(g, ParamSeq):
        return g
    if isinstance(g, str):
        return OptimalParam(ell, p) if g == "sw" else TildeParam(ell, p)
    if isinstance(g, LatticeSeq):
        return _ArrayParam(g, ell, p)
    raise TypeError(f"unsupported parameter sequence {g!r}")


def _general_tables(param: ParamSeq, k: int, hi: int):
    """Prefactors at ``j = ell+1..hi`` and ``grad^(k-1) g`` at ``n = ell..hi``
    from the decimal stencil chain."""
    ell, p = param.ell, param.p
    digits = _digits_for(ell, hi + 2 * ell)
    with localcontext() as ctx:
        ctx.prec = digits
        ch = _chain(param, ell, hi + ell, 10.0 ** (-(digits - 2)))
        m = ell - k
        pm1 = Decimal(p) - 1
        pref = []
        for j in range(ell + 1, hi + 1):
            den = ch.grads[k][j - ell]
            if den <= 0:
                raise ValueError(f"grad^{k} g is not positive at n={j}")
            num = ch.laps[m][j - ell] if m else den**pm1
            pref.append(float(num / den**pm1))
        gk1 = [float(v) for v in ch.grads[k - 1][: hi - ell + 1]]
    return np.array(pref), np.array(gk1)


def _tables(g, ell, p, k, hi):
    param = _as_param(g, ell, p)
    if isinstance(param, OptimalParam):
        pref = optimal_prefactors(ell, p, k, np.arange(ell + 1, hi + 1))
        ns = np.arange(ell, hi + 1)
        gk1 = grad_g_values(ell, p, k - 1, ns)
        return pref, gk1
    return _general_tables(param, k, hi)


def remainder_R_k(ell: int, k: int, s: float, g, u: LatticeSeq, p: float | None = None,
                  per_n: bool = False):
    """``R_k(s; g, u)``: remainder terms of order ``k`` summed over ``n >= ell``.

    ``g`` is ``'sw'`` (gamma parameter sequence, closed-form differences),
    ``'sw_tilde'``, a :class:`ParamSeq`, or a LatticeSeq of values (the last
    three go through the decimal stencil chain). Negative prefactors are
    reported by raising, never clamped.
    """
    if not 1 <= k <= ell:
        raise ValueError("need 1 <= k <= ell")
    if p is None:
        if not isinstance(g, ParamSeq):
            raise ValueError("p is required unless g carries it")
        p = g.p
    if u.is_empty():
        return (0.0, np.zeros(0)) if per_n else 0.0
    du = grad_k(u, k - 1)
    hi = max(du.hi, ell)
    pref, gk1 = _tables(g, ell, p, k, hi + 1)
    ns = np.arange(ell, hi + 1)
    g0 = gk1[: len(ns)]
    g1 = gk1[1 : len(ns) + 1]
    uv = du.window(ell, hi + 1)
    terms = remainder_terms(s, g0, g1, uv[:-1], uv[1:], p)
    pf = pref[: len(ns)]
    if np.any(pf < -1e-12 * np.abs(pf).max(initial=0.0)):
        bad = int(ns[np.argmax(pf < 0)])
        raise ArithmeticError(f"prefactor of R_{k} is negative at n={bad}: assumptions fail")
    weighted = pf * terms
    total = math.fsum(weighted)
    return (total, weighted) if per_n else total


@dataclass
class RemainderReport:
    s: float
    per_k_totals: np.ndarray
    per_k_totals_q: np.ndarray
    gap: float
    lhs: float
    sum_Rp: float
    sum_Rq: float
    ratio_low: float
    ratio_high: float
    per_n_terms: list | None = None


def _ratio(a, b):
    return a / b if b > 0 else math.nan


def sandwich_check(ell: int, p: float, g, u: LatticeSeq, weight: WeightSpec | None = None,
                   per_n: bool = False) -> RemainderReport:
    """Gap of the inequality against both remainder sums.

    ``weight`` defaults to the weight generated by ``g`` (``sw`` or
    ``sw_tilde``). Ratios are diagnostics only.
    """
    if weight is None:
        if isinstance(g, str):
            weight = WeightSpec(g, ell, p)
        elif isinstance(g, OptimalParam):
            weight = WeightSpec("sw", ell, p)
        elif isinstance(g, TildeParam):
            weight = WeightSpec("sw_tilde", ell, p)
        else:
            raise ValueError("weight is required for a general parameter sequence")
    q = p / (p - 1)
    lhs = lp_energy(u, ell, p)
    gap = functional_gap(u, ell, p, weight)
    Rp, Rq, detail = [], [], []
    for k in range(1, ell + 1):
        rp = remainder_R_k(ell, k, p, g, u, p, per_n=per_n)
        rq = remainder_R_k(ell, k, q, g, u, p, per_n=per_n)
        if per_n:
            detail.append((rp[1], rq[1]))
            rp, rq = rp[0], rq[0]
        Rp.append(rp)
        Rq.append(rq)
    sp, sq = math.fsum(Rp), math.fsum(Rq)
    return RemainderReport(
        p, np.array(Rp), np.array(Rq), float(gap), float(lhs), sp, sq,
        _ratio(gap, sq), _ratio(gap, sp), detail if per_n else None,
    )


# -- scalar inequality --------------------------------------------------------------------


@dataclass
class ScalarProbeRecord:
    p: float
    points: int
    min_M: float
    violations: int
    lower_ratio_inf: float
    upper_ratio_sup: float
    lower_name: str
    upper_name: str
    identity_residual: float | None = None


def _lemma_parts(p, t, z):
    M = np.abs(z - t) ** p - (1 - t) ** (p - 1) * (np.abs(z) ** p - t)
    a = np.abs(z - t) + 1 - t
    with np.errstate(divide="ignore", invalid="ignore"):
        L = t * np.abs(z - 1) ** 2 * np.where(a > 0, a ** (p - 2), 0.0)
    L = np.where((np.abs(z - 1) == 0) & (t == 1), 0.0, L)  # stated convention at z = t = 1
    L = np.nan_to_num(L, nan=0.0, posinf=0.0)
    U = t ** (p / 2) * np.abs(z - 1) ** p
    return M, L, U


def default_lemma_grids(n_t: int = 100, n_z: int = 10):
    t_grid = np.linspace(0.0, 1.0, n_t)
    re = np.linspace(-2.0, 3.0, n_z)
    im = np.linspace(-2.0, 2.0, n_z)
    z_grid = (re[:, None] + 1j * im[None, :]).ravel()
    return t_grid, z_grid


def scalar_lemma_probe(p: float, t_grid=None, z_grid=None, tol: float = 1e-12,
                       floor: float = 1e-14) -> ScalarProbeRecord:
    """Evaluate the middle term ``M`` and both bounds ``L``, ``U`` on a grid.

    For ``p <= 2`` the bounds read ``L <~ M <~ U``: the record holds
    ``inf M/L`` and ``sup M/U``. For ``p > 2`` they swap, so the record holds
    ``inf M/U`` and ``sup M/L``. Ratios skip points whose denominator is
    below ``floor``. At ``p = 2`` the residual of ``M = t |z-1|^2`` is kept.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    if t_grid is None or z_grid is None:
        dt, dz = default_lemma_grids()
        t_grid = dt if t_grid is None else t_grid
        z_grid = dz if z_grid is None else z_grid
    t = np.asarray(t_grid, dtype=float)[:, None]
    z = np.asarray(z_grid, dtype=complex)[None, :]
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("t must lie in [0, 1]")
    M, L, U = _lemma_parts(p, t, z)
    lower, upper = (L, U) if p <= 2 else (U, L)
    ok_l = lower > floor
    ok_u = upper > floor
    lo_inf = float(np.min(M[ok_l] / lower[ok_l])) if ok_l.any() else math.nan
    up_sup = float(np.max(M[ok_u] / upper[ok_u])) if ok_u.any() else math.nan
    ident = None
    if p == 2:
        ident = float(np.max(np.abs(M - t * np.abs(z - 1) ** 2)))
    return ScalarProbeRecord(
        p, int(M.size), float(M.min()), int(np.sum(M < -tol)), lo_inf, up_sup,
        "M/L" if p <= 2 else "M/U", "M/U" if p <= 2 else "M/L", ident,
    )


# -- non-attainability -------------------------------------------------------------------


@dataclass
class NonAttainRecord:
    ell: int
    p: float
    M_cut: int
    gap: float
    lhs: float
    label: str = "finite-support cases only; density in H^ell is not tested"


def nonattain_probe(ell: int, p: float, M_cut: int) -> NonAttainRecord:
    """Gap of the optimal weight at ``u`` = gamma parameter sequence cut after ``M_cut``."""
    if M_cut <= 2 * ell:
        raise ValueError("M_cut must exceed 2 ell")
    ns = np.arange(ell, M_cut + 1)
    u = LatticeSeq(ell, g_values(ell, p, ns), level=ell)
    w = WeightSpec("sw", ell, p)
    gap = functional_gap(u, ell, p, w)
    return NonAttainRecord(ell, p, M_cut, float(gap), float(lp_energy(u, ell, p)))


# -- random corpus ---------------------------------------------------------------------


def random_sequence(ell: int, seed: int, trial: int, width: int = 50) -> LatticeSeq:
    """Complex entries uniform on ``[-1,1]^2`` on a random sub-window of
    ``[ell, ell + width]``; fully determined by ``(seed, trial)``."""
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(trial)])
    a, b = sorted(int(x) for x in rng.integers(0, width + 1, size=2))
    n = b - a + 1
    vals = rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n)
    return LatticeSeq(ell + a, vals, level=ell)


@dataclass
class CorpusRow:
    trial: int
    ell: int
    p: float
    family: str
    lhs: float
    rhs: float
    gap: float
    sum_Rq: float
    sum_Rp: float
    violation: bool = False

    def row(self):
        return (self.trial, self.ell, self.p, self.family, self.lhs, self.rhs, self.gap,
                self.sum_Rq, self.sum_Rp)


def _corpus_chunk(args):
    ell, p, family, lam, scale, seed, trials, width, remainders = args
    w = WeightSpec(family, ell, p, lam, scale)
    q = p / (p - 1)
    rows = []
    for trial in trials:
        u = random_sequence(ell, seed, trial, width)
        lhs = lp_energy(u, ell, p)
        gap = float(functional_gap(u, ell, p, w))
        rq = rp = math.nan
        if remainders:
            rp = math.fsum(remainder_R_k(ell, k, p, "sw", u, p) for k in range(1, ell + 1))
            rq = math.fsum(remainder_R_k(ell, k, q, "sw", u, p) for k in range(1, ell + 1))
        rows.append(CorpusRow(trial, ell, p, family, lhs, lhs - gap, gap, rq, rp,
                              gap < -1e-10 * lhs))
    return rows


def run_corpus(ell: int, p: float, family: str, trials: int, seed: int = 0,
               lam: float | None = None, scale: float = 1.0, width: int = 50,
               remainders: bool = True, workers: int = 1) -> list:
    """Inequality corpus for one ``(ell, p, family)`` cell.

    Remainder sums always use the gamma parameter sequence of ``(ell, p)``.
    Rows are returned in trial order for any ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ids = list(range(trials))
    if workers > 1:
        chunks = [ids[i::workers] for i in range(workers)]
        args = [(ell, p, family, lam, scale, seed, c, width, remainders) for c in chunks]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_corpus_chunk, args))
        rows = sorted((r for part in parts for r in part), key=lambda r: r.trial)
    else:
        rows = _corpus_chunk((ell, p, family, lam, scale, seed, ids, width, remainders))
    return rows


# -- log-scale profiles -----------------------------------------------------------------
#
# u_n = n^(ell - 1/p) psi(log(n/n0) / L) with psi(s) = s^2 (1-s)^2 spreads its
# mass evenly over log n, so the gap relative to the right side decays like
# L^-2 (p = 2). Supports reach n0 e^L, far beyond any array; the tail is the
# Euler-Maclaurin sum of a smooth extension whose differences come from the
# series (1 - e^-D)^ell applied to exact derivatives.

_PSI = np.polynomial.Polynomial([0.0, 0.0, 1.0, -2.0, 1.0])
_DENSE_X0 = 256
_SERIES_J = 16
_MAX_LOG_LENGTH = 700.0


@lru_cache(maxsize=16)
def _backward_series(ell: int, J: int):
    """``b_j`` with ``(1 - e^-y)^ell = y^ell sum_j b_j y^j``."""
    base = [Fraction((-1) ** k, math.factorial(k + 1)) for k in range(J + 1)]
    out = [Fraction(1)] + [Fraction(0)] * J
    for _ in range(ell):
        out = [sum(out[i] * base[k - i] for i in range(k + 1)) for k in range(J + 1)]
    return tuple(float(v) for v in out)


def _profile_polys(ell, p, L, count):
    # x^(a-m) Q_m(s) is the m-th derivative of x^a psi(s), s = log(x/n0)/L
    a = ell - 1.0 / p
    Q = [_PSI]
    for m in range(count):
        Q.append((a - m) * Q[-1] + Q[-1].deriv() / L)
    return Q


@dataclass
class LogProfileRecord:
    ell: int
    p: float
    family: str
    L: float
    scale: float
    lhs: float
    rhs: float
    gap: float
    err: float

    @property
    def violated(self) -> bool:
        return self.gap < -(1e-10 * self.lhs + self.err)


def _dense_profile(ell, p, L, n0, hi) -> LatticeSeq:
    a = ExtReal.of(ell) - 1 / ExtReal.of(p)
    vals = []
    for n in range(n0 + 1, hi + 1):
        s_ = ext_log(ExtReal.of(n) / n0) / L
        if float(s_) >= 1.0:
            vals.append(ExtReal(0.0))
            continue
        psi = s_ * s_ * (1 - s_) * (1 - s_)
        vals.append(ext_pow(ExtReal.of(n), a) * psi)
    arr = np.empty(len(vals), dtype=object)
    arr[:] = vals
    return LatticeSeq(n0 + 1, arr, level=ell)


def _gauss_integral(fn, lo, hi, panels, nodes=24):
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(lo, hi, panels + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    pts = (mids + half * xg[None, :]).ravel()
    vals = fn(pts).reshape(panels, nodes)
    return float(np.sum(vals * (half * wg[None, :])))


def log_profile_gap(ell: int, p: float, family: str, L: float, lam: float | None = None,
                    scale: float = 1.0) -> LogProfileRecord:
    """Gap of ``family`` (times ``scale``) at the log-scale profile of length ``L``.

    ``err`` bounds the quadrature and Euler-Maclaurin error; a record counts
    as a violation only when the gap is below ``-(1e-10 lhs + err)``.
    """
    if not 2.0 <= L <= _MAX_LOG_LENGTH:
        raise ValueError(f"L must lie in [2, {_MAX_LOG_LENGTH}]")
    n0 = max(ell - 1, 1)
    x_end = n0 * math.exp(L)
    w = WeightSpec(family, ell, p, lam, scale)
    if x_end <= 4 * _DENSE_X0:
        u = _dense_profile(ell, p, L, n0, int(math.floor(x_end)) + 1)
        lhs = float(lp_energy(u, ell, p))
        rhs = float(lp_energy(u, ell, p, weight=w))
        return LogProfileRecord(ell, p, family, L, scale, lhs, rhs, lhs - rhs, 1e-13 * lhs)
    X0 = _DENSE_X0
    u = _dense_profile(ell, p, L, n0, X0 - 1)
    # grad^ell u_n for n < X0 reads only u below X0
    dv = grad_k(u, ell).window(ell, X0 - 1)
    lhs_dense = math.fsum(float(ext_pow(abs(v), p)) for v in dv if v.hi)
    rhs_dense = float(lp_energy(u, ell, p, weight=w))
    Q = _profile_polys(ell, p, L, ell + _SERIES_J)
    b = _backward_series(ell, _SERIES_J)

    def S_of(x):
        # x^(ell - a) grad^ell f(x)
        s_ = np.log(x / n0) / L
        acc = np.zeros_like(x)
        inv = 1.0 / x
        pw = np.ones_like(x)
        for j in range(_SERIES_J + 1):
            acc = acc + b[j] * pw * Q[ell + j](s_)
            pw = pw * inv
        return acc

    def F_lhs(x):
        return np.abs(S_of(x)) ** p / x

    def F_rhs(x):
        s_ = np.log(x / n0) / L
        return scale * normalized_weight(family, ell, p, x, lam) * np.abs(_PSI(s_)) ** p / x

    # in s = log(x/n0)/L both integrands lose their powers of x
    def G_lhs(s_):
        return L * np.abs(S_of(n0 * np.exp(L * s_))) ** p

    def G_rhs(s_):
        x = n0 * np.exp(L * s_)
        return L * scale * normalized_weight(family, ell, p, x, lam) * np.abs(_PSI(s_)) ** p

    s0 = math.log(X0 / n0) / L
    xs = np.array([X0 - 2, X0 - 1, X0, X0 + 1, X0 + 2], dtype=float)
    tails = []
    err = 0.0
    for F, G in ((F_lhs, G_lhs), (F_rhs, G_rhs)):
        I1 = _gauss_integral(G, s0, 1.0, 128)
        I2 = _gauss_integral(G, s0, 1.0, 64)
        Fx = F(xs)
        d1 = (-Fx[4] + 8 * Fx[3] - 8 * Fx[1] + Fx[0]) / 12.0
        d3 = (Fx[4] - 2 * Fx[3] + 2 * Fx[1] - Fx[0]) / 2.0
        # Euler-Maclaurin from X0: integral + F/2 - F'/12 + F'''/720
        total = I1 + Fx[2] / 2 - d1 / 12 + d3 / 720
        tails.append(total)
        err += abs(I1 - I2) + abs(d3) / 720 + 1e-14 * abs(total)
    lhs = lhs_dense + tails[0]
    rhs = rhs_dense + tails[1]
    return LogProfileRecord(ell, p, family, L, scale, lhs, rhs, lhs - rhs, err)


def criticality_search(ell: int, p: float, family: str, lam: float | None = None,
                       scale: float = 1.0, lengths=(16, 32, 64, 128, 256)) -> list:
    """Log-scale profiles of growing length. An inflated critical weight shows
    up as a negative gap once the profile is long enough."""
    return [log_profile_gap(ell, p, family, L, lam, scale) for L in lengths]
