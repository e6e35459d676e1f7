import math

import numpy as np
import pytest

from artifact.assumption_audit import (
    OptimalParam, TildeParam, check_A1_A2_A3, check_A4, cm_power_class_check,
    cm_window_check, conjecture_scan, hp_rho,
)
from artifact.precision import EXTENDED
from artifact.seq_core import LatticeSeq, div_k
from artifact.special import gamma_ratio, pochhammer
from artifact.weights import g_tilde_values, rho_sw_window, rho_tilde_window


def verdicts(reports):
    return {r.assumption: r.passed for r in reports}


def test_optimal_sequence_passes_window_audit():
    v = verdicts(check_A1_A2_A3("sw", 2, 2.0, (2, 500), strict_A3=True))
    assert v == {"A1": True, "A2": True, "A3_strict": True}


def test_stencil_sequence_first_order():
    v = verdicts(check_A1_A2_A3("sw_tilde", 1, 3.0, (1, 500), strict_A3=True))
    assert v["A1"] and v["A3_strict"]


def test_constant_sequence_fails_strict_sign():
    reps = check_A1_A2_A3(lambda ell, p, n: 1.0, 1, 2.0, (1, 50), strict_A3=True)
    v = verdicts(reps)
    # the sequence itself is positive; the first failing difference order is 1
    assert reps[0].first_violation[0] == 1
    assert not v["A3_strict"]
    assert reps[-1].first_violation[-1] > 1


def test_generator_errors():
    with pytest.raises(ValueError):
        check_A1_A2_A3(lambda ell, p, n: math.inf, 1, 2.0, (1, 20))
    with pytest.raises(ValueError):
        check_A1_A2_A3("sw", 2, 2.0, (1, 20))


@pytest.mark.parametrize("g", ["sw", "sw_tilde"])
@pytest.mark.parametrize("ell,p", [(1, 2.0), (3, 2.5), (4, 1.5)])
def test_expansion_fit(g, ell, p):
    fit = check_A4(g, ell, p)
    assert fit.passed and fit.alpha0_nonzero
    assert "not a verification" in fit.note


def test_expansion_fit_leading_coefficient():
    # g_n ~ n^(ell - 1/p): the leading coefficient is 1 for both sequences
    assert check_A4("sw", 3, 2.5).alpha[0] == pytest.approx(1.0, abs=1e-12)
    assert check_A4("sw_tilde", 3, 2.5).alpha[0] == pytest.approx(1.0, abs=1e-12)


def test_expansion_fit_rejects_short_grid():
    with pytest.raises(ValueError):
        check_A4("sw", 1, 2.0, n_grid=[1, 2, 3, 4, 5])


def test_decimal_weight_matches_double_double():
    ref = rho_sw_window(3, 2.5, 3, 200)
    hp = hp_rho(OptimalParam(3, 2.5), 3, 200)
    assert np.allclose(hp, ref, rtol=1e-13, atol=0)
    ref = rho_tilde_window(2, 3.0, 2, 120)
    hp = hp_rho(TildeParam(2, 3.0), 2, 120)
    assert np.allclose(hp, ref, rtol=1e-13, atol=0)


def test_completely_monotone_examples():
    ell, p = 2, 3.0
    iq = 1 - 1 / p
    f = [float((pochhammer(iq, ell, EXTENDED) * gamma_ratio(n + iq, n + 1.0, EXTENDED)) ** (p - 1))
         for n in range(0, 201)]
    assert cm_window_check(f, 6).passed
    assert cm_window_check([1 / (n + 1) for n in range(40)], 8).passed
    rep = cm_window_check([(-1.0) ** n for n in range(10)], 1)
    assert not rep.passed and rep.first_violation[0] in (0, 1)
    with pytest.raises(ValueError):
        cm_window_check([1.0, 2.0], 2)


def stencil_divergence(ell, p, lo, hi):
    g = g_tilde_values(ell, p, 0, hi + ell, EXTENDED)
    d = div_k(g, ell)
    return [d.at(n) for n in range(lo, hi + 1)]


def test_power_class_examples():
    f = stencil_divergence(2, 2.5, 2, 120)
    assert cm_power_class_check(f, 1.5, 2, n_lo=2).passed
    f = stencil_divergence(5, 4.0, 5, 120)
    assert cm_power_class_check(f, 3.0, 5, n_lo=5).passed
    g = [1 / (n + 1) ** 0.5 for n in range(30)]
    assert cm_power_class_check(g, 1, 4).passed == cm_window_check(g, 4).passed
    with pytest.raises(ValueError):
        cm_power_class_check([1.0, -1.0, 2.0], 2.0, 1)


def test_scan_rows():
    rows = conjecture_scan([1, 2], [2.0], n_max=300, K=4)
    assert all(r.passed for r in rows)
    items = {(r.ell, r.item) for r in rows}
    assert (1, "ii_pointwise_vs_birman") in items and (2, "iii_series_A4") in items
    kpp = [r for r in rows if r.ell == 1 and r.item == "ii_pointwise_vs_birman"][0]
    assert kpp.min_margin > 0


def test_scan_is_worker_independent():
    a = [r.row() for r in conjecture_scan([3], [2.5, 3.0], n_max=200, K=2)]
    b = [r.row() for r in conjecture_scan([3], [2.5, 3.0], n_max=200, K=2, workers=2)]
    assert a == b
    assert all(r[5] for r in a if r[2] == "i_A3")
