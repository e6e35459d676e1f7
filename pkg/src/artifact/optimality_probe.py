"""Cutoff regularisations of the gamma parameter sequence, decay sweeps and an
exact p = 2 Rayleigh infimum.

Sweeps never difference the product ``xi * g`` directly. The discrete Leibniz
rule ``grad^i (xi g)_n = sum_j C(i,j) grad^j xi_n grad^(i-j) g_(n-j)`` keeps
every factor well conditioned, and the closed form of ``grad^i g`` is exact.
Windows are streamed in chunks, so memory stays bounded for ``2 N^3`` sites.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .inequality_lab import optimal_prefactors
from .precision import EXTENDED, ExtReal
from .seq_core import LatticeSeq
from .weights import WeightSpec, asymptotic_values, g_values, grad_g_values

__all__ = [
    "CutoffSpec",
    "SweepRecord",
    "SWEEP_COLUMNS",
    "eta",
    "xi_profile",
    "build_uN",
    "profile_sums",
    "criticality_sweep",
    "optimality_sweep",
    "sweep_verdict",
    "p2_quotient_oracle",
]

SWEEP_COLUMNS = ("N", "remainder_total", "denominator", "rayleigh_quotient", "fitted_rate")
RATE_SLACK = 0.3
INCONCLUSIVE_BELOW_P = 1.3
CHUNK = 1 << 20
MAX_SITES = 10**9


def eta(x, eps: float = 0.25):
    """Smooth monotone step: 0 for ``x <= eps``, 1 for ``x >= 1 - eps``."""
    if not 0 < eps < 0.5:
        raise ValueError("epsilon must lie in (0, 1/2)")
    xa = np.asarray(x, dtype=float)
    s = np.clip((xa - eps) / (1 - 2 * eps), 0.0, 1.0)
    # f(s) / (f(s) + f(1-s)) with f(x) = exp(-1/x), written as a logistic
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        mid = 1.0 / (1.0 + np.exp(1.0 / s - 1.0 / (1.0 - s)))
    out = np.where(s <= 0, 0.0, np.where(s >= 1, 1.0, mid))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CutoffSpec:
    kind: str
    N: int
    epsilon: float = 0.25

    def __post_init__(self):
        if self.kind not in ("truncation", "bump"):
            raise ValueError(f"unknown cutoff kind {self.kind!r}")
        if int(self.N) != self.N or self.N < 2:
            raise ValueError("N must be an integer >= 2")
        if not 0 < self.epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 1/2)")

    @property
    def support_hi(self) -> int:
        return self.N**2 if self.kind == "truncation" else 2 * self.N**3

    @property
    def support_lo(self) -> int:
        return 1 if self.kind == "truncation" else self.N + 1


def xi_profile(spec: CutoffSpec, x):
    """Cutoff profile at ``x > 0`` (scalar or array)."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise ValueError("profile is defined for x > 0")
    N, eps = spec.N, spec.epsilon
    lN = math.log(N)
    lx = np.log(xa)
    out = np.zeros_like(xa)
    if spec.kind == "truncation":
        out = np.where(xa <= N, 1.0, out)
        mid = (xa > N) & (xa <= N * N)
        out = np.where(mid, eta((2 * lN - lx) / lN, eps), out)
    else:
        rise = (xa > N) & (xa <= N * N)
        flat = (xa > N * N) & (xa <= 2 * N * N)
        fall = (xa > 2 * N * N) & (xa <= 2 * N**3)
        out = np.where(rise, eta((lx - lN) / lN, eps), out)
        out = np.where(flat, 1.0, out)
        out = np.where(fall, eta((math.log(2 * N**3) - lx) / lN, eps), out)
    return float(out) if out.ndim == 0 else out


def build_uN(ell: int, p: float, spec: CutoffSpec) -> LatticeSeq:
    """``xi * g`` on its support; the level is ``ell`` for truncation, ``N`` for bumps."""
    lo = max(ell, spec.support_lo)
    hi = spec.support_hi
    if hi < lo:
        return LatticeSeq.empty(level=ell)
    if hi - lo > 5 * 10**7:
        raise MemoryError("window too large to materialise; use profile_sums")
    ns = np.arange(lo, hi + 1)
    vals = xi_profile(spec, ns.astype(float)) * g_values(ell, p, ns)
    level = ell if spec.kind == "truncation" else max(ell, spec.N)
    return LatticeSeq(lo, vals, level=level)


# -- streamed sums ---------------------------------------------------------------------


def _grad_table(xi: np.ndarray, order: int):
    """``grad^j xi`` for ``j = 0..order`` on the same index grid (leading entries unusable)."""
    out = [xi]
    for _ in range(order):
        d = np.empty_like(out[-1])
        d[1:] = out[-1][1:] - out[-1][:-1]
        d[0] = np.nan
        out.append(d)
    return out


def _chunk_sums(ell, p, spec, a, b, ws, weight_scale):
    """Sums over ``n in [a, b]`` of: lhs, rhs, R_k(p) for k = 1..ell.

    Pairwise summation inside a chunk, compensated summation across chunks.
    """
    pad = ell + 1
    idx = np.arange(a - pad, b + 2)  # grid covering n - ell - 1 .. n + 1
    xi = np.zeros(len(idx))
    pos = idx >= 1
    xi[pos] = xi_profile(spec, idx[pos].astype(float))
    dxi = _grad_table(xi, ell)
    G = {}

    def Gi(i):
        # grad^i g on the grid, zero below ell
        if i not in G:
            v = np.zeros(len(idx))
            ok = idx >= ell
            v[ok] = grad_g_values(ell, p, i, idx[ok]) if i else g_values(ell, p, idx[ok])
            G[i] = v
        return G[i]

    def shift(arr, j):
        # arr at n - j, aligned to the grid
        if j == 0:
            return arr
        out = np.full_like(arr, np.nan)
        out[j:] = arr[:-j]
        return out

    def grad_u(i):
        acc = np.zeros(len(idx))
        for j in range(i + 1):
            acc = acc + math.comb(i, j) * dxi[j] * shift(Gi(i - j), j)
        return acc

    sel = slice(pad, pad + (b - a + 1))  # grid positions of n = a..b
    sel1 = slice(pad + 1, pad + (b - a + 2))  # n + 1
    ns = idx[sel]
    lhs = float(np.sum(np.abs(grad_u(ell)[sel]) ** p))
    u = xi * Gi(0)
    w = ws.values(ns) if weight_scale is None else weight_scale * ws.values(ns)
    rhs = float(np.sum(w * np.abs(u[sel]) ** p))
    Rk = []
    for k in range(1, ell + 1):
        G0 = Gi(k - 1)[sel]
        G1 = Gi(k - 1)[sel1]
        # G0 U1 - G1 U0 without forming U: the j = 0 Leibniz term collapses
        D = G0 * G1 * (xi[sel1] - xi[sel])
        for j in range(1, k):
            c = math.comb(k - 1, j)
            D = D + c * (G0 * dxi[j][sel1] * shift(Gi(k - 1 - j), j)[sel1]
                         - G1 * dxi[j][sel] * shift(Gi(k - 1 - j), j)[sel])
        with np.errstate(invalid="ignore", divide="ignore"):
            base = np.where(G0 > 0, np.abs(D) / np.sqrt(G0 * G1), 0.0)
        if p <= 2:
            terms = base**p
        else:
            U0 = grad_u(k - 1)[sel]
            second = np.abs(grad_u(k)[sel1]) + np.where(G0 > 0, np.abs(U0) / np.where(G0 > 0, G0, 1.0), 0.0) * Gi(k)[sel1]
            with np.errstate(divide="ignore", invalid="ignore"):
                fac = np.where(second > 0, second ** (p - 2), 0.0)
            terms = np.where(base > 0, base**2 * fac, 0.0)
        pref = optimal_prefactors(ell, p, k, ns + 1)
        Rk.append(float(np.sum(pref * terms)))
    return lhs, rhs, Rk


def _profile_task(args):
    ell, p, spec, weight_scale, chunk = args
    lo = max(ell, spec.support_lo - ell - 1)
    hi = spec.support_hi + ell + 1
    if hi - lo > MAX_SITES:
        raise MemoryError("profile window exceeds the site budget")
    ws = WeightSpec("sw", ell, p)
    lhs, rhs, R = [], [], [[] for _ in range(ell)]
    a = lo
    while a <= hi:
        b = min(hi, a + chunk - 1)
        l_, r_, rk = _chunk_sums(ell, p, spec, a, b, ws, weight_scale)
        lhs.append(l_)
        rhs.append(r_)
        for k in range(ell):
            R[k].append(rk[k])
        a = b + 1
    return math.fsum(lhs), math.fsum(rhs), [math.fsum(r) for r in R]


def profile_sums(ell: int, p: float, spec: CutoffSpec, weight_scale: float | None = None,
                 chunk: int = CHUNK):
    """``(sum |grad^ell u|^p, sum rho |u|^p, [R_1(p), .., R_ell(p)])`` for
    ``u = xi * g``, with ``rho`` the weight generated by ``g``."""
    return _profile_task((ell, float(p), spec, weight_scale, chunk))


# -- sweeps ------------------------------------------------------------------------


@dataclass
class SweepRecord:
    N: int
    remainder_total: float
    denominator: float
    rayleigh_quotient: float
    fitted_rate: float
    quotient: float = math.nan

    def row(self):
        return (self.N, self.remainder_total, self.denominator, self.rayleigh_quotient,
                self.fitted_rate)


def _check_N_list(N_list):
    N_list = [int(N) for N in N_list]
    if not N_list or any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be non-empty and increasing")
    if N_list[0] < 2:
        raise ValueError("N must be >= 2")
    return N_list


def _fit_rate(N_list, totals):
    """Decay exponent ``a`` of ``total ~ C / log(N)^a`` over the last half."""
    h = max(2, (len(N_list) + 1) // 2)
    xs = np.log(np.log(np.asarray(N_list[-h:], dtype=float)))
    ys = np.log(np.asarray(totals[-h:], dtype=float))
    if len(xs) < 2 or not np.all(np.isfinite(ys)):
        return math.nan
    slope = np.polyfit(xs, ys, 1)[0]
    return float(-slope)


def _run(ell, p, specs, workers):
    args = [(ell, float(p), s, None, CHUNK) for s in specs]
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_profile_task, args))
    return [_profile_task(a) for a in args]


def criticality_sweep(ell: int, p: float, N_list, epsilon: float = 0.25,
                      workers: int = 1) -> list:
    """Remainder totals of the truncated sequences ``u^N``.

    ``fitted_rate`` is the decay exponent in ``log N`` fitted over the last
    half of ``N_list``; it is the same on every record.
    """
    N_list = _check_N_list(N_list)
    if max(N_list) > 10**4:
        raise MemoryError("N above 10^4 gives windows beyond the budget")
    specs = [CutoffSpec("truncation", N, epsilon) for N in N_list]
    res = _run(ell, p, specs, workers)
    totals = [math.fsum(r[2]) for r in res]
    rate = _fit_rate(N_list, totals)
    return [
        SweepRecord(N, t, rhs, lhs / rhs, rate, t / rhs)
        for N, t, (lhs, rhs, _) in zip(N_list, totals, res)
    ]


def optimality_sweep(ell: int, p: float, m: int, N_list, epsilon: float = 0.25,
                     workers: int = 1) -> list:
    """Bump sequences ``u^N``, supported right of ``N >= m``: remainder
    numerator, denominator ``sum rho |u|^p`` and the Rayleigh quotient."""
    if m < ell:
        raise ValueError("m must be >= ell")
    N_list = _check_N_list(N_list)
    if N_list[0] < m:
        raise ValueError("bump sequences need N >= m")
    specs = [CutoffSpec("bump", N, epsilon) for N in N_list]
    res = _run(ell, p, specs, workers)
    totals = [math.fsum(r[2]) for r in res]
    quots = [t / r[1] for t, r in zip(totals, res)]
    rate = _fit_rate(N_list, quots)
    return [
        SweepRecord(N, t, rhs, lhs / rhs, rate, qv)
        for N, t, qv, (lhs, rhs, _) in zip(N_list, totals, quots, res)
    ]


def sweep_verdict(records, p: float, kind: str = "criticality") -> str:
    """``pass``, ``fail`` or ``inconclusive`` for a finished sweep."""
    vals = [r.remainder_total if kind == "criticality" else r.quotient for r in records]
    decreasing = all(b < a for a, b in zip(vals, vals[1:]))
    need = min(p, 2.0) - 1.0 - RATE_SLACK
    rate = records[-1].fitted_rate if records else math.nan
    rq_ok = all(r.rayleigh_quotient >= 1 - 1e-9 for r in records)
    if p < INCONCLUSIVE_BELOW_P and rq_ok:
        # decay exponent p - 1 is too small to resolve at desk scale
        return "pass" if decreasing and rate >= need else "inconclusive"
    return "pass" if decreasing and rate >= need and rq_ok else "fail"


# -- p = 2 Rayleigh infimum ----------------------------------------------------------------


def _band_form(ell: int, m: int, M: int):
    """Banded matrix of ``sum_{n} |grad^ell u_n|^2`` for ``u`` on ``[m, M]``,
    as exact integer diagonals ``A[d][i] = A_{i, i+d}``."""
    c = [(-1) ** j * math.comb(ell, j) for j in range(ell + 1)]
    size = M - m + 1
    diags = [[0] * (size - d) for d in range(ell + 1)]
    # row n of the difference operator touches u_{n-j}, j = 0..ell
    for n in range(m, M + ell + 1):
        cols = [(n - j - m, c[j]) for j in range(ell + 1) if 0 <= n - j - m < size]
        for i1, a1 in cols:
            for i2, a2 in cols:
                if i2 >= i1:
                    diags[i2 - i1][i1] += a1 * a2
    return diags


def _ldl_band(diags, wsh):
    """LDL^T of a symmetric band matrix minus a diagonal, in double-double."""
    size = len(diags[0])
    bw = len(diags) - 1
    L = [[ExtReal(0.0)] * size for _ in range(bw + 1)]  # L[d][i] = L_{i+d, i}
    D = [ExtReal(0.0)] * size
    for i in range(size):
        s = ExtReal.of(diags[0][i]) - wsh[i]
        for d in range(1, bw + 1):
            j = i - d
            if j < 0:
                break
            s = s - L[d][j] * L[d][j] * D[j]
        if not s.hi > 0:
            return None, None
        D[i] = s
        for d in range(1, bw + 1):
            r = i + d
            if r >= size:
                break
            t = ExtReal.of(diags[d][i])
            for e in range(1, bw + 1 - d + 1):
                j = i - e
                if j < 0 or d + e > bw:
                    break
                t = t - L[d + e][j] * L[e][j] * D[j]
            L[d][i] = t / s
    return L, D


def _ldl_solve(L, D, b):
    size = len(D)
    bw = len(L) - 1
    y = list(b)
    for i in range(size):
        for d in range(1, bw + 1):
            j = i - d
            if j < 0:
                break
            y[i] = y[i] - L[d][j] * y[j]
    for i in range(size):
        y[i] = y[i] / D[i]
    for i in range(size - 1, -1, -1):
        for d in range(1, bw + 1):
            r = i + d
            if r >= size:
                break
            y[i] = y[i] - L[d][i] * y[r]
    return y


def _band_mul(diags, x):
    size = len(x)
    out = [ExtReal(0.0)] * size
    for d, diag in enumerate(diags):
        for i, a in enumerate(diag):
            if a == 0:
                continue
            out[i] = out[i] + a * x[i + d]
            if d:
                out[i + d] = out[i + d] + a * x[i]
    return out


def _dot(x, y):
    acc = ExtReal(0.0)
    for a, b in zip(x, y):
        acc = acc + a * b
    return acc


def p2_quotient_oracle(ell: int, weight: WeightSpec, m: int, M: int, shift: float = 1 - 1e-3,
                       max_iter: int = 100, tol: float = 1e-12) -> float:
    """Infimum of ``sum |grad^ell u|^2 / sum w |u|^2`` over ``u`` supported in ``[m, M]``.

    Inverse iteration with a fixed shift on the banded pencil, factorised by
    LDL^T in double-double; the weights decay like ``n^(-2 ell)`` and make the
    pencil too ill-conditioned for plain floats. A negative pivot means the
    infimum lies below the shift, and the shift is lowered.
    """
    if weight.p != 2:
        raise ValueError("the exact oracle needs p = 2")
    if m < ell:
        raise ValueError("m must be >= ell")
    if M - m < 10:
        raise ValueError("need M - m >= 10")
    diags = _band_form(ell, m, M)
    w = [weight(n, EXTENDED) for n in range(m, M + 1)]
    for _ in range(60):
        sh = ExtReal.of(shift)
        L, D = _ldl_band(diags, [sh * wi for wi in w])
        if L is not None:
            break
        shift = shift / 2 if shift > 0 else shift - 1.0
    else:
        raise ArithmeticError("banded factorisation failed for every shift")
    x = [ExtReal(1.0)] * len(w)
    lam_old = math.inf
    lam = math.inf
    for _ in range(max_iter):
        bx = [wi * xi for wi, xi in zip(w, x)]
        y = _ldl_solve(L, D, bx)
        nrm = _dot(y, [wi * yi for wi, yi in zip(w, y)])
        scale = 1 / ExtReal.of(math.sqrt(float(nrm)))
        x = [yi * scale for yi in y]
        num = _dot(x, _band_mul(diags, x))
        den = _dot(x, [wi * xi for wi, xi in zip(w, x)])
        lam = float(num / den)
        if abs(lam - lam_old) <= tol * abs(lam):
            break
        lam_old = lam
    return lam
