import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from artifact.precision import EXTENDED
from artifact.seq_core import (
    LatticeSeq, div_k, grad_k, lp_energy, p_laplacian, shift_middle, signed_pow,
)
from artifact.weights import g_seq

ints = st.lists(st.integers(-50, 50), min_size=1, max_size=12)


def dense(u, lo, hi):
    return [complex(x) for x in u.window(lo, hi)]


def test_grad_of_delta():
    d = grad_k(LatticeSeq.delta(1), 2)
    assert dense(d, 1, 3) == [1, -2, 1]


def test_grad_of_constant_block_telescopes():
    d = grad_k(LatticeSeq(0, np.ones(11), level=0), 1)
    vals = dense(d, 0, 11)
    assert vals[0] == 1 and vals[-1] == -1 and all(v == 0 for v in vals[1:-1])


def test_grad_of_ramp():
    d = grad_k(LatticeSeq(1, [1, 2, 3, 4, 5], level=1), 1)
    assert dense(d, 1, 6) == [1, 1, 1, 1, 1, -5]


def test_div_of_delta():
    d = div_k(LatticeSeq.delta(1), 1)
    assert dense(d, 0, 1) == [1, -1]


def test_div_of_square_is_constant_inside():
    u = LatticeSeq(0, [n * n for n in range(7)], level=None, trim=False)
    d = div_k(u, 2)
    assert dense(d, 0, 4) == [2] * 5


def test_shift_and_middle():
    s = shift_middle(LatticeSeq.delta(0), 2, "shift")
    assert s.lo == s.hi == -2 and s.at(-2) == 1
    m = shift_middle(LatticeSeq(0, [1, 3], level=None), 1, "middle")
    assert dense(m, -1, 1) == [0.5, 2, 1.5]


def test_signed_pow():
    assert signed_pow(0, 0.7) == 0
    assert signed_pow(-2.0, 2) == -4
    assert signed_pow(3 - 4j, 2) == 15 - 20j
    with pytest.raises(ValueError):
        signed_pow(1.0, 0.0)


def test_p_laplacian_examples():
    r = p_laplacian(LatticeSeq.delta(1), 1, 2)
    assert dense(r, 0, 2) == [-1, 2, -1]
    r = p_laplacian(LatticeSeq.delta(1), 0, 3)
    assert dense(r, 0, 2) == [0, 1, 0]


def test_p_laplacian_against_three_point_stencil():
    g = [float(g_seq(1, 2, n)) for n in range(0, 52)]
    u = LatticeSeq(1, g[1:51], level=1)
    r = p_laplacian(u, 1, 2).at(25).real
    want = -(g[26] - 2 * g[25] + g[24])
    assert abs(r - want) <= 1e-13 * abs(want)


def test_energy_examples():
    assert lp_energy(LatticeSeq.delta(1), 1, 2) == 2
    assert lp_energy(LatticeSeq.delta(2), 2, 2) == 6
    assert lp_energy(LatticeSeq.empty(), 1, 2) == 0


def test_extended_sequences_carry_precision():
    u = LatticeSeq(2, [g_seq(2, 3, n, EXTENDED) for n in range(2, 30)], level=2)
    assert u.extended
    d = div_k(u, 1)
    assert d.extended


@given(ints, st.integers(0, 5), st.integers(-5, 5))
def test_grad_matches_binomial_expansion(vals, k, lo):
    u = LatticeSeq(lo, vals, level=None)
    d = grad_k(u, k)
    for n in range(lo - 1, lo + len(vals) + k + 1):
        want = sum((-1) ** j * math.comb(k, j) * (vals[n - j - lo] if 0 <= n - j - lo < len(vals) else 0)
                   for j in range(k + 1))
        assert d.at(n) == want


@given(ints, st.integers(0, 5), st.integers(-5, 5))
def test_div_is_shifted_grad(vals, k, lo):
    u = LatticeSeq(lo, vals, level=None)
    d, g = div_k(u, k), grad_k(u, k)
    for n in range(lo - k - 1, lo + len(vals) + 1):
        assert d.at(n) == g.at(n + k)


@given(ints, ints, st.integers(0, 4))
def test_summation_by_parts(a, b, k):
    # <grad^k u, v> = <u, (-1)^k div^k v> for finitely supported sequences
    u, v = LatticeSeq(0, a, level=None), LatticeSeq(-3, b, level=None)
    gu, dv = grad_k(u, k), div_k(v, k)
    lo, hi = -20, 40
    lhs = sum(gu.at(n) * v.at(n) for n in range(lo, hi))
    rhs = sum(u.at(n) * (-1) ** k * dv.at(n) for n in range(lo, hi))
    assert lhs == rhs


def test_level_guard():
    with pytest.raises(ValueError):
        LatticeSeq(0, [1.0, 2.0], level=1)
