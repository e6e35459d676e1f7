import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from artifact.inequality_lab import sandwich_check
from artifact.optimality_probe import (
    CutoffSpec, build_uN, criticality_sweep, eta, optimality_sweep, p2_quotient_oracle,
    profile_sums, sweep_verdict, xi_profile,
)
from artifact.seq_core import lp_energy
from artifact.weights import WeightSpec

# infima computed independently by a dense 40-digit symmetric eigensolve
ORACLE_REF = [
    (1, 1, 100, 1.27850498546549727867416016611),
    (2, 2, 100, 1.52293825179499963050998934196),
    (1, 5, 60, 6.08207054689049754015641163804),
]


def test_eta_plateaus_and_midpoint():
    assert eta(0.5) == pytest.approx(0.5, abs=1e-15)
    assert eta(0.1) == 0 and eta(0.25) == 0
    assert eta(0.75) == 1 and eta(0.9) == 1
    with pytest.raises(ValueError):
        eta(0.5, 0.5)


@given(st.floats(0.0, 1.0), st.floats(0.05, 0.45))
def test_eta_symmetry(x, eps):
    assert eta(x, eps) + eta(1 - x, eps) == pytest.approx(1.0, abs=1e-12)


def test_eta_is_monotone():
    v = eta(np.linspace(0, 1, 2001))
    assert np.all(np.diff(v) >= 0)


def test_profiles():
    t = CutoffSpec("truncation", 10)
    assert xi_profile(t, 5) == 1 and xi_profile(t, 200) == 0
    b = CutoffSpec("bump", 10)
    assert xi_profile(b, 150) == 1 and xi_profile(b, 5) == 0 and xi_profile(b, 2001) == 0
    with pytest.raises(ValueError):
        CutoffSpec("box", 10)


def test_cut_sequence_support():
    u = build_uN(2, 2.0, CutoffSpec("truncation", 8))
    assert u.lo >= 2 and u.hi <= 64
    ub = build_uN(1, 2.0, CutoffSpec("bump", 8))
    assert ub.lo > 8 and ub.hi <= 2 * 8**3


@pytest.mark.parametrize("ell,p,kind", [(1, 2.0, "truncation"), (2, 3.0, "truncation"),
                                        (1, 1.5, "bump"), (2, 2.5, "bump")])
def test_streamed_sums_match_direct(ell, p, kind):
    spec = CutoffSpec(kind, 8)
    u = build_uN(ell, p, spec)
    lhs, rhs, R = profile_sums(ell, p, spec, chunk=97)
    assert lhs == pytest.approx(float(lp_energy(u, ell, p)), rel=1e-12)
    assert rhs == pytest.approx(float(lp_energy(u, ell, p, weight=WeightSpec("sw", ell, p))), rel=1e-12)
    rep = sandwich_check(ell, p, "sw", u)
    assert np.allclose(R, rep.per_k_totals, rtol=1e-11, atol=0)


@pytest.mark.parametrize("ell,p", [(1, 2.0), (2, 2.0), (1, 3.0)])
def test_criticality_sweep_decays(ell, p):
    recs = criticality_sweep(ell, p, [16, 32, 64, 128])
    totals = [r.remainder_total for r in recs]
    assert all(b < a for a, b in zip(totals, totals[1:]))
    assert sweep_verdict(recs, p) == "pass"


def test_low_exponent_sweep_may_be_inconclusive():
    recs = criticality_sweep(1, 1.2, [16, 32, 64])
    assert sweep_verdict(recs, 1.2) in ("pass", "inconclusive")


def test_optimality_sweep_quotient_falls_toward_one():
    recs = optimality_sweep(1, 2.0, 1, [16, 32, 64, 128])
    rq = [r.rayleigh_quotient for r in recs]
    assert all(x >= 1 - 1e-9 for x in rq)
    assert all(b < a for a, b in zip(rq, rq[1:]))
    assert sweep_verdict(recs, 2.0, "optimality") == "pass"


def test_sweep_input_checks():
    with pytest.raises(ValueError):
        criticality_sweep(1, 2.0, [64, 32])
    with pytest.raises(ValueError):
        optimality_sweep(2, 2.0, 1, [16, 32])


@pytest.mark.parametrize("ell,m,M,ref", ORACLE_REF)
def test_oracle_reference(ell, m, M, ref):
    val = p2_quotient_oracle(ell, WeightSpec("sw", ell, 2.0), m, M)
    assert val == pytest.approx(ref, rel=1e-12)


def test_oracle_monotone_in_window():
    w = WeightSpec("sw", 1, 2.0)
    a, b = p2_quotient_oracle(1, w, 1, 100), p2_quotient_oracle(1, w, 1, 200)
    assert 1 < b <= a < 1.6


def test_oracle_scaling():
    a = p2_quotient_oracle(1, WeightSpec("sw", 1, 2.0), 1, 100)
    b = p2_quotient_oracle(1, WeightSpec("sw", 1, 2.0, scale=1.1), 1, 100)
    assert b == pytest.approx(a / 1.1, rel=1e-12)


def test_oracle_needs_quadratic_case():
    with pytest.raises(ValueError):
        p2_quotient_oracle(1, WeightSpec("sw", 1, 3.0), 1, 100)
    with pytest.raises(ValueError):
        p2_quotient_oracle(2, WeightSpec("sw", 2, 2.0), 1, 100)
