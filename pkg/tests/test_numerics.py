import math
import warnings
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from boxlab.boxes import compositions
from boxlab.numerics import (ONE_MINUS_W, W, ConcavityWarning, DomainError, FrequencyVector,
                             QSqrt2, SupportError, beta_identity, binomial, exact_exp_neg_nD,
                             incomplete_beta_qsqrt2, integral_sandwich_check, multinomial,
                             multinomial_sandwich, pinsker_pair_check, quad_mp, rel_entropy, to_mpf)

from conftest import open_unit, rationals

small = rationals(-5, 5, 40)
q2 = st.builds(QSqrt2, small, small)


# --- QSqrt2 ---------------------------------------------------------------------

@given(small, small)
def test_sign_matches_high_precision(a, b):
    x = QSqrt2(a, b)
    with mpmath.workprec(200):
        ref = mpmath.mpf(a.numerator) / a.denominator + mpmath.mpf(b.numerator) / b.denominator * mpmath.sqrt(2)
    expected = (ref > 0) - (ref < 0)
    assert x.sign() == expected
    assert (x > 0) == (expected > 0) and (x == 0) == (expected == 0)


@given(q2, q2)
def test_order_matches_real_embedding(x, y):
    assert (x < y) == (to_mpf(x) < to_mpf(y))


@given(q2, q2, q2)
def test_field_operations(x, y, z):
    assert (x + y) * z == x * z + y * z
    assert x - x == 0
    if y != 0:
        assert (x / y) * y == x
        assert y * y.inverse() == 1


def test_qsqrt2_interoperates_with_rationals():
    assert W + ONE_MINUS_W == 1
    assert W == QSqrt2(Fraction(1, 2), Fraction(1, 4))
    assert 2 * W - 1 == QSqrt2(0, Fraction(1, 2))
    assert QSqrt2(3, 0) == Fraction(3)
    assert float(to_mpf(W)) == pytest.approx((2 + math.sqrt(2)) / 4, rel=1e-15)


# --- relative entropy --------------------------------------------------------------

def test_rel_entropy_examples():
    h = Fraction(1, 2)
    assert rel_entropy((h, h), (h, h)) == 0
    assert rel_entropy((1, 0), (h, h)) == pytest.approx(math.log(2), rel=1e-15)
    with mpmath.workprec(200):
        oracle = mpmath.mpf(3) / 4 * mpmath.log(mpmath.mpf(3) / 2) + mpmath.mpf(1) / 4 * mpmath.log(mpmath.mpf(1) / 2)
    got = rel_entropy((Fraction(3, 4), Fraction(1, 4)), (h, h))
    assert got == pytest.approx(float(oracle), rel=1e-12)
    assert float(oracle) == pytest.approx(0.1308120, abs=1e-6)


def test_rel_entropy_support_error():
    with pytest.raises(SupportError):
        rel_entropy((Fraction(1, 2), Fraction(1, 2)), (1, 0))


def test_rel_entropy_high_precision_path():
    f, g = (Fraction(1, 3), Fraction(2, 3)), (Fraction(1, 2), Fraction(1, 2))
    assert float(rel_entropy(f, g, bits=200)) == pytest.approx(rel_entropy(f, g), rel=1e-14)


def test_exact_exp_examples():
    assert exact_exp_neg_nD((2, 0), (Fraction(3, 4), Fraction(1, 4))) == Fraction(9, 16)
    assert exact_exp_neg_nD((3, 5), (Fraction(3, 8), Fraction(5, 8))) == 1
    assert exact_exp_neg_nD((1, 1), (Fraction(1, 2), Fraction(1, 2))) == 1
    assert exact_exp_neg_nD((4, 0), (W, ONE_MINUS_W)) == W**4
    with pytest.raises(SupportError):
        exact_exp_neg_nD((1, 1), (1, 0))


@given(st.lists(st.integers(0, 12), min_size=2, max_size=4).filter(lambda c: sum(c) > 0),
       st.data())
def test_exact_exp_matches_float(counts, data):
    d = len(counts)
    raw = [data.draw(st.integers(1, 20)) for _ in range(d)]
    g = [Fraction(v, sum(raw)) for v in raw]
    n = sum(counts)
    f = [Fraction(k, n) for k in counts]
    exact = exact_exp_neg_nD(counts, g)
    assert float(exact) == pytest.approx(math.exp(-n * rel_entropy(f, g)), rel=1e-9)


# --- combinatorics -------------------------------------------------------------------

def test_binomial_examples():
    assert binomial(2, 1) == 2
    assert binomial(7, 0) == 1
    assert multinomial(4, (2, 1, 1)) == 12
    with pytest.raises(DomainError):
        binomial(2, 3)
    with pytest.raises(DomainError):
        multinomial(4, (2, 1))
    with pytest.raises(DomainError):
        FrequencyVector((1, -1))


def test_sandwich_examples():
    assert multinomial_sandwich(2, (1, 1)) == (Fraction(4, 3), 2, 4)
    # the lower bound keeps the (n+1)^-(d-1) factor even for a degenerate composition
    assert multinomial_sandwich(3, (3, 0)) == (Fraction(1, 4), 1, 1)
    assert multinomial_sandwich(3, (3,)) == (1, 1, 1)
    assert multinomial_sandwich(4, (2, 1, 1)) == (Fraction(64, 25), 12, 64)


@given(st.integers(1, 20), st.integers(1, 4), st.data())
def test_sandwich_property(n, d, data):
    cuts = sorted(data.draw(st.lists(st.integers(0, n), min_size=d - 1, max_size=d - 1)))
    counts = [b - a for a, b in zip([0] + cuts, cuts + [n])]
    lo, v, hi = multinomial_sandwich(n, counts)
    assert lo <= v <= hi
    assert v == math.factorial(n) // math.prod(math.factorial(k) for k in counts)


def test_sandwich_exhaustive_small():
    for n in range(0, 9):
        for d in (1, 2, 3):
            for c in compositions(n, d):
                lo, v, hi = multinomial_sandwich(n, c)
                assert lo <= v <= hi


# --- Beta integrals --------------------------------------------------------------

def test_beta_examples():
    assert beta_identity(2, 1) == Fraction(1, 6)
    assert beta_identity(0, 0) == 1
    assert beta_identity(5, 0) == Fraction(1, 6)


def test_beta_identity_all_small():
    for n in range(31):
        for k in range(n + 1):
            assert beta_identity(n, k) == Fraction(1, (n + 1) * math.comb(n, k))


def test_incomplete_beta_examples():
    assert incomplete_beta_qsqrt2(1, 1) == QSqrt2(0, Fraction(1, 4))
    assert incomplete_beta_qsqrt2(0, 0) == QSqrt2(0, Fraction(1, 2))
    got = incomplete_beta_qsqrt2(2, 1)
    ref = quad_mp(lambda p: p * (1 - p), ONE_MINUS_W, W)
    assert abs(to_mpf(got) - ref) < 1e-12


@given(st.integers(1, 14), st.data())
def test_incomplete_beta_matches_quadrature(n, data):
    k = data.draw(st.integers(0, n))
    got = incomplete_beta_qsqrt2(n, k)
    ref = quad_mp(lambda p: p**k * (1 - p) ** (n - k), ONE_MINUS_W, W)
    assert abs(to_mpf(got) - ref) <= 1e-30 * max(1, abs(ref)) + 1e-40


# --- integral sandwich and Pinsker ---------------------------------------------------

def test_integral_sandwich_examples():
    r = integral_sandwich_check(lambda x: 1.0, 0, 1, 3)
    assert r.holds and r.lower == pytest.approx(0.25) and r.integral == pytest.approx(1.0)
    r = integral_sandwich_check(lambda x: x, 0, 1, 1)
    assert r.holds and r.integral == pytest.approx(0.5) and r.lower == pytest.approx(0.5)
    assert r.upper == pytest.approx(1.0)
    w, v = float(to_mpf(W)), float(to_mpf(ONE_MINUS_W))
    r = integral_sandwich_check(lambda p: 0.5 * math.sqrt(p * (1 - p)), v, w, 4)
    assert r.holds and r.concave and abs(r.x_star - 0.5) < 1e-6


def test_integral_sandwich_warns_on_convex():
    with pytest.warns(ConcavityWarning):
        r = integral_sandwich_check(lambda x: x * x, 0, 1, 2)
    assert not r.concave


@given(st.integers(1, 30), st.floats(0.1, 0.9), st.floats(0.0, 0.3), st.floats(0.7, 1.0))
def test_integral_sandwich_property(n, s, a, b):
    # weighted geometric mean of x and 1 - x: smooth and concave inside (0, 1)
    f = lambda x: x**s * (1 - x) ** (1 - s)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConcavityWarning)
        r = integral_sandwich_check(f, max(a, 1e-3), b, n, quadrature_points=400)
    assert r.holds
    assert r.lower <= r.upper


def test_pinsker_examples():
    h = Fraction(1, 2)
    r = pinsker_pair_check(h, h)
    assert r.l1 == 0 and r.divergence == 0 and r.pinsker and r.reverse
    for p, q in ((Fraction(9, 10), h), (Fraction(3, 5), Fraction(2, 5))):
        r = pinsker_pair_check(p, q)
        assert r.pinsker and r.reverse_weak


@given(open_unit(), open_unit())
def test_pinsker_property(p, q):
    r = pinsker_pair_check(p, q)
    assert r.pinsker and r.reverse_weak
