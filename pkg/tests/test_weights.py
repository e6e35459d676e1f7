import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact.precision import EXTENDED
from artifact.special import gamma_ratio
from artifact.weights import (
    ExtractionError, WeightSpec, asymptotic_values, classical_weight, closed_form_report,
    closed_form_rho, g_seq, g_tilde_seq, g_values, improvement_margins, normalized_weight,
    rho_sw_gamma, rho_sw_product, rho_sw_window, rho_tilde, rho_tilde_window, series_coeffs,
)

# optimal weight at 60 digits, computed independently from the gamma form
# through the order-ell stencil
SW_REF = [
    (1, 2, 1, "0.5"), (1, 2, 2, "0.08333333333333333333333333333"),
    (1, 2, 3, "0.03333333333333333333333333333"),
    (1, 2, 10, "0.002631578947368421052631579"),
    (1, 2, 100, "0.0000251256281407035175879397"),
    (2, 2, 2, "0.375"), (2, 2, 5, "0.001785714285714285714285714"),
    (2, 2, 50, "9.563337987491153912361571e-8"),
    (1, 3, 1, "0.5555555555555555555555556"), (1, 3, 7, "0.0009297052154195011337868481"),
    (3, 1.5, 3, "0.2664230451626687124316036"), (3, 1.5, 20, "0.000002023496814915392482710578"),
    (3, 1.5, 400, "2.093878981517468281985749e-12"),
    (5, 2.5, 5, "0.2619164358536932520949414"), (5, 2.5, 60, "1.04307252035259924579657e-18"),
    (5, 2.5, 1000, "3.570459186373178889919335e-34"),
    (4, 5, 4, "0.3244196431527936"), (4, 5, 999, "8.89485339022809456165826e-55"),
    (2, 1.2, 2, "0.2297581783447335189840202"), (2, 1.2, 33, "0.0000340169276473482607081919"),
]
TILDE_REF = [
    (2, 3, 2, "0.5005099441467839078618126"), (2, 3, 10, "0.000002003087841103250796213701"),
    (2, 3, 200, "2.182361438925207179232653e-14"),
    (3, 2.5, 3, "0.3998469970257008717398599"), (3, 2.5, 50, "2.124724176365045849637265e-12"),
    (1, 1.5, 1, "0.4901754714660414019133865"), (1, 1.5, 9, "0.007153615881331064345565556"),
]
P_GRID = (1.2, 1.5, 2.0, 2.5, 3.0, 5.0)


def rel(a, b):
    a = a.to_fraction() if hasattr(a, "to_fraction") else Fraction(a)
    b = Fraction(b)
    return float(abs(a - b) / abs(b))


def test_parameter_sequence_examples():
    assert abs(g_seq(1, 2, 1) - 0.8862269255) < 1e-10
    assert g_seq(1, 2, 0) == 0
    assert abs(g_seq(2, 2, 2) - 1.3293403882) < 1e-10
    assert rel(g_seq(2, 3, 10, EXTENDED), "41.3154253071799403671751858819") < 1e-28
    assert abs(g_tilde_seq(2, 2, 3) - 3.4641016151) < 1e-10
    assert g_tilde_seq(3, 2.7, 2) == 0
    assert g_tilde_seq(1, 2, 4) == 2


@given(st.integers(1, 6), st.sampled_from(P_GRID), st.integers(0, 3000))
def test_parameter_sequence_product_and_stirling_forms_agree(ell, p, n):
    a = g_tilde_seq(ell, p, n)
    b = g_tilde_seq(ell, p, n, form="stirling")
    assert abs(a - b) <= 1e-9 * max(1.0, abs(a)) * n ** 0.0 or abs(a - b) <= 1e-12 * n ** (ell - 1 / p)


def test_vectorised_parameter_sequence():
    ns = np.arange(0, 3000)
    v = g_values(3, 2.5, ns)
    for n in (0, 2, 3, 7, 24, 25, 100, 2999):
        assert abs(v[n] - g_seq(3, 2.5, n)) <= 1e-14 * max(1.0, abs(v[n]))


@pytest.mark.parametrize("ell,p,n,ref", SW_REF)
def test_optimal_weight_reference(ell, p, n, ref):
    assert rel(rho_sw_product(ell, p, n), ref) < 1e-12
    assert rel(rho_sw_gamma(ell, p, n), ref) < 1e-12
    # references carry about 25 digits; both forms cancel about n**ell
    assert rel(rho_sw_product(ell, p, n, EXTENDED), ref) < 1e-16
    assert rel(rho_sw_window(ell, p, n, n, EXTENDED)[0], ref) < 1e-16


@pytest.mark.parametrize("ell,p,n,ref", TILDE_REF)
def test_stencil_weight_reference(ell, p, n, ref):
    assert rel(rho_tilde(ell, p, n), ref) < 1e-12


def test_hand_checkable_values():
    assert rho_sw_gamma(1, 2, 1) == pytest.approx(0.5, rel=1e-14)
    assert rho_sw_product(1, 3, 2) == pytest.approx(44 / 900, rel=1e-12)
    assert rho_tilde(1, 2, 1) == pytest.approx(2 - math.sqrt(2), rel=1e-14)
    assert rho_tilde(1, 2, 2) == pytest.approx(2 - math.sqrt(0.5) - math.sqrt(1.5), rel=1e-13)
    assert rho_tilde(1, 3, 1) == pytest.approx(1 - (2 ** (2 / 3) - 1) ** 2, rel=1e-13)
    with pytest.raises(ValueError):
        rho_sw_gamma(2, 2, 1)
    with pytest.raises(ValueError):
        rho_tilde(2, 2, 1)


def test_named_families():
    assert classical_weight(WeightSpec("classical_hardy_p", 1, 3), 1) == pytest.approx(8 / 27, rel=1e-14)
    assert classical_weight(WeightSpec("lambda_family", 1, 2, lam=-0.5), 2) == pytest.approx(1 / 12, rel=1e-14)
    assert classical_weight(WeightSpec("classical_birman", 2, 2), 2) == pytest.approx(0.03515625, rel=1e-14)
    assert classical_weight(WeightSpec("kpp"), 1) == pytest.approx(2 - math.sqrt(2), rel=1e-14)
    assert classical_weight(WeightSpec("fkp", 1, 3), 1) == pytest.approx(1 - (2 ** (2 / 3) - 1) ** 2, rel=1e-13)
    with pytest.raises(ValueError):
        WeightSpec("kpp", 2, 2)
    with pytest.raises(ValueError):
        WeightSpec("lambda_family", 1, 2, lam=-1.0)
    with pytest.raises(ValueError):
        WeightSpec("nope")


def test_closed_forms():
    assert closed_form_rho(1, 2, 2, "hardy_1p") == pytest.approx(1 / 12, rel=1e-14)
    assert closed_form_rho(1, 2, 1, "birman_l2_product") == pytest.approx(0.5, rel=1e-14)
    assert closed_form_rho(2, 2, 2, "birman_l2_product") == pytest.approx(0.375, rel=1e-14)
    with pytest.raises(ValueError):
        closed_form_rho(2, 3, 2, "hardy_1p")
    with pytest.raises(ValueError):
        closed_form_rho(2, 3, 2, "birman_l2_product")


def test_closed_form_report_verdicts():
    rep = closed_form_report(ell_max=3, n_max=200)
    assert rep["birman_l2_product"]["verdict"] == "matches"
    assert rep["birman_l2_pochhammer"]["verdict"] == "differs"
    assert rep["gamma_vs_product_worst_rel"] < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.sampled_from(P_GRID), st.integers(0, 300))
def test_gamma_and_product_routes_agree(ell, p, off):
    n = ell + off
    a, b = rho_sw_gamma(ell, p, n), rho_sw_product(ell, p, n)
    assert abs(a - b) <= 1e-12 * abs(b)


def test_window_matches_pointwise():
    w = rho_sw_window(3, 2.5, 3, 80)
    for n in (3, 4, 40, 80):
        assert w[n - 3] == pytest.approx(rho_sw_product(3, 2.5, n), rel=1e-14)
    t = rho_tilde_window(2, 3.0, 2, 60)
    for n in (2, 30, 60):
        assert t[n - 2] == pytest.approx(rho_tilde(2, 3.0, n), rel=1e-13)


def test_improvement_is_strict():
    ns, margins, relm = improvement_margins(2, 2.5, 2, 400)
    assert all(m > 0 for m in margins) and min(relm) > 0


def test_series_coefficients():
    s = series_coeffs(1, 2, 2)
    assert s.A[0] == pytest.approx(0.5, rel=1e-6) and s.A[1] == pytest.approx(0.25, rel=1e-6)
    assert series_coeffs(2, 2, 1).A[0] == pytest.approx(3, rel=1e-6)
    assert series_coeffs(1, 3, 1).A[0] == pytest.approx(0.5, rel=1e-6)
    with pytest.raises(ValueError):
        series_coeffs(1, 2, 9)


def test_series_extraction_error_carries_diagnostics():
    with pytest.raises(ExtractionError) as info:
        series_coeffs(1, 2, 8, tol=1e-30)
    assert "A" in info.value.diagnostics


@pytest.mark.parametrize("family,ell,p", [("sw", 1, 2.0), ("sw", 3, 1.5), ("sw_tilde", 2, 3.0)])
def test_large_index_values_join_the_table(family, ell, p):
    spec = WeightSpec(family, ell, p)
    ns = np.array([400, 512, 1024, 5000])
    exact = [float(classical_weight(spec, int(n))) for n in ns]
    assert np.allclose(spec.values(ns), exact, rtol=1e-13, atol=0)
    assert np.allclose(asymptotic_values(family, ell, p, ns), exact, rtol=1e-13, atol=0)
    assert np.allclose(normalized_weight(family, ell, p, ns) * ns ** (-ell * p), exact, rtol=1e-13, atol=0)


def test_scaled_weight():
    a = WeightSpec("classical_birman", 2, 2)
    b = WeightSpec("classical_birman", 2, 2, scale=1.01)
    assert b(7) == pytest.approx(1.01 * a(7), rel=1e-15)
