"""One test per acceptance criterion; each records a PASS/FAIL summary line."""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from artifact.assumption_audit import check_A1_A2_A3, check_A4
from artifact.inequality_lab import run_corpus, scalar_lemma_probe
from artifact.optimality_probe import (
    criticality_sweep, optimality_sweep, p2_quotient_oracle, sweep_verdict,
)
from artifact.precision import EXTENDED
from artifact.seq_core import LatticeSeq, div_k
from artifact.special import chu_vandermonde_check, gautschi_check, pochhammer
from artifact.weights import (
    WeightSpec, closed_form_report, closed_form_rho, g_seq, improvement_margins, inv_q,
    rho_sw_gamma, rho_sw_gamma_window, rho_sw_product, series_coeffs,
)

P_SIX = (1.2, 1.5, 2.0, 2.5, 3.0, 5.0)
CORPUS_ELLS = (1, 2, 3, 4)
CORPUS_PS = (1.5, 2.0, 3.0)
CORPUS_FAMILIES = ("sw", "sw_tilde", "classical_birman")
TRIALS = 1000


def rel(a, b):
    return abs(a - b) / abs(b)


def test_weight_values(criterion):
    t0 = time.perf_counter()
    cases = [((1, 2, 1), 0.5), ((1, 2, 2), 1 / 12), ((1, 2, 3), 1 / 30),
             ((2, 2, 2), 0.375), ((1, 3, 1), 5 / 9)]
    worst = max(max(rel(rho_sw_gamma(*a), v), rel(rho_sw_product(*a), v)) for a, v in cases)
    hardy = max(rel(rho_sw_product(1, 2, n), 1 / (4 * n * (n - 0.5))) for n in (1, 2, 3))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and hardy <= 1e-12 and dt < 1.0
    criterion(1, "weight values", ok, f"worst_rel={worst:.1e} t={dt:.2f}s")
    assert ok


def test_form_equivalence(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for ell in range(1, 6):
        for p in P_SIX:
            ns = range(ell, 1001)
            gam = rho_sw_gamma_window(ell, p, ell, 1000)
            for n, g in zip(ns, gam):
                prod = rho_sw_product(ell, p, n)
                worst = max(worst, rel(g, prod))
                if ell == 1:
                    worst = max(worst, rel(float(closed_form_rho(1, p, n, "hardy_1p")), prod))
                if p == 2.0:
                    worst = max(worst, rel(float(closed_form_rho(ell, 2, n, "birman_l2_product")), prod))
    report = closed_form_report(ell_max=5, n_max=1000)
    dt = time.perf_counter() - t0
    verdicts = {k: v["verdict"] for k, v in report.items() if isinstance(v, dict)}
    ok = worst <= 1e-12 and verdicts["birman_l2_product"] == "matches" and dt < 30
    detail = (f"worst_rel={worst:.1e} product_form={verdicts['birman_l2_product']}"
              f" pochhammer_form={verdicts['birman_l2_pochhammer']}"
              f" ({report['birman_l2_pochhammer']['mismatches']} mismatches) t={dt:.1f}s")
    criterion(2, "form equivalence", ok, detail)
    assert ok


def test_divergence_lowers_order(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    top = 1000
    for p in P_SIX:
        iq = inv_q(p, EXTENDED)
        tables = {}
        for ell in range(0, 7):
            vals = np.empty(top + 8, dtype=object)
            vals[:] = [g_seq(ell, p, n, EXTENDED) for n in range(0, top + 8)]
            tables[ell] = LatticeSeq(0, vals, level=None, trim=False)
        for ell in range(1, 7):
            g = tables[ell]
            for k in range(0, ell + 1):
                d = div_k(g, k)
                c = pochhammer(ell - k + iq, k, EXTENDED)
                lower = tables[ell - k]
                for n in range(0, top + 1):
                    mag = sum(math.comb(k, j) * abs(float(g.at(n + j))) for j in range(k + 1))
                    diff = abs(float(d.at(n) - c * lower.at(n)))
                    if mag:
                        worst = max(worst, diff / mag)
                    elif diff:
                        worst = math.inf
    dt = time.perf_counter() - t0
    ok = worst <= 1e-11 and dt < 60
    criterion(3, "divergence lowers the order", ok, f"worst={worst:.1e} t={dt:.1f}s")
    assert ok


def test_improvement_over_classical(criterion):
    t0 = time.perf_counter()
    bad, least = 0, math.inf
    for ell in range(1, 5):
        for p in P_SIX:
            _, margins, relm = improvement_margins(ell, p, ell, 10_000)
            bad += sum(1 for m in margins if not m.hi > 0)
            least = min(least, min(relm))
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 120
    criterion(4, "strict improvement over the classical weight", ok,
              f"nonpositive={bad} least_rel_margin={least:.2e} t={dt:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def corpus():
    t0 = time.perf_counter()
    rows = {}
    for family in CORPUS_FAMILIES:
        for ell in CORPUS_ELLS:
            for p in CORPUS_PS:
                rows[(family, ell, p)] = run_corpus(ell, p, family, TRIALS, seed=2024,
                                                    remainders=(family == "sw" and p == 2.0))
    return rows, time.perf_counter() - t0


def test_inequality_corpus(criterion, corpus):
    rows, dt = corpus
    violations = sum(r.violation for cell in rows.values() for r in cell)
    count = sum(len(cell) for cell in rows.values())
    worst = min(r.gap / r.lhs for cell in rows.values() for r in cell)
    ok = violations == 0 and count == TRIALS * 36 and dt < 600
    criterion(5, "random inequality corpus", ok,
              f"sequences={count} violations={violations} min_gap/lhs={worst:.2e} t={dt:.0f}s")
    assert ok


def test_quadratic_gap_identity(criterion, corpus):
    rows, _ = corpus
    worst = 0.0
    for ell in CORPUS_ELLS:
        for r in rows[("sw", ell, 2.0)]:
            worst = max(worst, abs(r.gap - r.sum_Rp) / r.gap)
    ok = worst <= 1e-11
    criterion(6, "gap equals the remainder sum at p=2", ok, f"worst_rel={worst:.1e}")
    assert ok


def test_series_coefficients(criterion):
    t0 = time.perf_counter()
    got = []
    for p in (1.5, 2.0, 3.0):
        got.append((f"A1(1,{p:g})", series_coeffs(1, p, 1).A[0], 0.5))
    got.append(("A2(1,2)", series_coeffs(1, 2.0, 2).A[1], 0.25))
    got.append(("A1(2,2)", series_coeffs(2, 2.0, 1).A[0], 3.0))
    worst = max(rel(a, b) for _, a, b in got)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-6 and dt < 60
    criterion(7, "series coefficients", ok, f"worst_rel={worst:.1e} t={dt:.1f}s")
    assert ok


def _audit(family, ell, p, strict):
    reps = check_A1_A2_A3(family, ell, p, (ell, 1000), strict_A3=strict)
    reps.append(check_A4(family, ell, p).report(ell, p))
    return [f"{family}({ell},{p:g}):{r.assumption}" for r in reps if not r.passed]


def test_assumption_audit(criterion):
    t0 = time.perf_counter()
    failed = []
    for ell in range(1, 6):
        for p in P_SIX:
            failed += _audit("sw", ell, p, True)
    tilde = [(ell, p) for p in (2.0, 3.0, 4.0) for ell in range(1, 8)]
    tilde += [(ell, p) for p in (2.5, 4.5) for ell in range(3, 8)]
    tilde += [(ell, p) for p in (1.5, 3.0) for ell in (1, 2)]
    for ell, p in sorted(set(tilde)):
        failed += _audit("sw_tilde", ell, p, True)
    dt = time.perf_counter() - t0
    ok = not failed and dt < 300
    criterion(8, "assumption audit", ok, f"failures={failed[:4]} t={dt:.0f}s")
    assert ok


def test_scalar_inequality(criterion):
    recs = [scalar_lemma_probe(p) for p in (1.1, 1.5, 2.0, 2.5, 4.0)]
    ok = all(r.points >= 10_000 and r.violations == 0 and r.min_M >= -1e-12 for r in recs)
    ident = recs[2].identity_residual
    ok = ok and ident is not None and ident <= 1e-12
    criterion(9, "scalar inequality", ok,
              f"min_M={min(r.min_M for r in recs):.1e} identity_residual={ident:.1e}")
    assert ok


def test_probes(criterion):
    t0 = time.perf_counter()
    Ns = [32, 64, 128, 256, 512]
    notes, ok = [], True
    for ell, p in ((1, 2.0), (2, 2.0), (1, 3.0)):
        recs = criticality_sweep(ell, p, Ns)
        v = sweep_verdict(recs, p, "criticality")
        notes.append(f"crit({ell},{p:g})={v}:{recs[-1].fitted_rate:.2f}")
        ok &= v == "pass"
    for ell, Ns_opt in ((1, Ns), (2, Ns[:4])):
        recs = optimality_sweep(ell, 2.0, ell, Ns_opt)
        v = sweep_verdict(recs, 2.0, "optimality")
        rq = [r.rayleigh_quotient for r in recs]
        notes.append(f"opt({ell},2)={v}:{rq[0]:.3f}->{rq[-1]:.3f}")
        ok &= v == "pass" and min(rq) >= 1 - 1e-9
    for ell in (1, 2):
        w = WeightSpec("sw", ell, 2.0)
        vals = [p2_quotient_oracle(ell, w, ell, M) for M in (100, 200, 400)]
        notes.append(f"oracle({ell})=" + ",".join(f"{v:.4f}" for v in vals))
        ok &= all(1 - 1e-8 <= v <= 2 for v in vals)
        ok &= all(b <= a for a, b in zip(vals, vals[1:]))
    dt = time.perf_counter() - t0
    ok &= dt < 600
    criterion(10, "criticality, optimality and oracle probes", ok, " ".join(notes) + f" t={dt:.0f}s")
    assert ok


def test_identity_validators(criterion):
    cv_bad, cv_worst = chu_vandermonde_check()
    ga_bad, ga_margin = gautschi_check()
    gx_bad, _ = gautschi_check(ctx=EXTENDED)
    ok = not cv_bad and not ga_bad and not gx_bad
    criterion(11, "Gautschi and Chu-Vandermonde validators", ok,
              f"chu_worst={cv_worst:.1e} gautschi_min_margin={ga_margin:.2e}")
    assert ok
