import itertools
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boxlab import config
from boxlab.boxes import (CHSH, Alphabets, Box, BoxError, ClassBox, InputDist,
                          NegativeEntryError, NormalizationError, Predicate, SizeCapError, SymBox,
                          SymmetryError, box_distance, box_new, chsh_predicate, chsh_wins,
                          class_masses, compositions, dense_from_sym, freq_distribution, freq_w,
                          is_chsh_symmetric, is_nonsignaling, is_round_nonsignaling,
                          is_w_symmetric, iid_power, lump, marginal_first_k, marginal_rounds, mix,
                          pr_box, q_box, sym_from_dense, symbox_distance, symbox_iid, symbox_mix,
                          uniform_box, win_distribution)
from boxlab.numerics import W, QSqrt2, binomial

from conftest import random_box, rationals

h = Fraction(1, 2)


def sym_strategy(n_max=4):
    return st.integers(1, n_max).flatmap(
        lambda n: st.lists(st.integers(0, 9), min_size=n + 1, max_size=n + 1)
        .filter(lambda w: sum(w) > 0)
        .map(lambda w: SymBox(n, tuple(Fraction(v, sum(w)) for v in w))))


# --- construction -------------------------------------------------------------

def test_box_new_validates():
    u = uniform_box(1, CHSH)
    assert all(v == Fraction(1, 4) for v in u.entries())
    assert box_new(1, CHSH, u.entries()) == u
    bad = u.entries()
    bad[0] = bad[0] - Fraction(1, 10)
    with pytest.raises(NormalizationError) as e:
        box_new(1, CHSH, bad)
    assert e.value.input_tuple == (0, 0)
    neg = u.entries()
    neg[0], neg[1] = Fraction(-1, 4), Fraction(3, 4)
    with pytest.raises(NegativeEntryError):
        box_new(1, CHSH, neg)
    with pytest.raises(BoxError):
        box_new(1, CHSH, u.entries()[:-1])
    with pytest.raises(TypeError):
        box_new(1, CHSH, [0.25] * 16)


def test_pr_box_valid_and_nonsignaling():
    pr = pr_box()
    for x, y, a, b in itertools.product(range(2), repeat=4):
        assert pr.table[x, y, a, b] == (h if (a ^ b) == (x & y) else 0)
    assert is_nonsignaling(pr) == (True, None)


def test_signaling_box_detected():
    T = np.full((2, 2, 2, 2), Fraction(0), dtype=object)
    for x, y, a in itertools.product(range(2), repeat=3):
        T[x, y, a, x] = h  # Bob's output copies Alice's input
    ok, wit = is_nonsignaling(Box(1, CHSH, T))
    assert not ok
    assert wit.unit == "party 0" and wit.x == (1,) and wit.x_ref == (0,)


def test_q_box_examples():
    assert q_box(h) == uniform_box(1, CHSH)
    assert q_box(1) == pr_box()
    qw = q_box(W)
    assert qw.table[0, 0, 0, 0] == QSqrt2(Fraction(1, 4), Fraction(1, 8))
    for n in (1, 2, 3):
        assert is_nonsignaling(iid_power(q_box(Fraction(3, 4)), n))[0]
    with pytest.raises(BoxError):
        q_box(Fraction(3, 2))


def test_iid_power_and_mix_examples():
    assert iid_power(uniform_box(1, CHSH), 2) == uniform_box(2, CHSH)
    B = q_box(Fraction(3, 4))
    assert mix([B], [1]) == B
    two = iid_power(B, 2)
    # x = y = (0, 0), a = b = (0, 0) wins both rounds
    assert two.table[0, 0, 0, 0, 0, 0, 0, 0] == Fraction(3, 8) ** 2
    # round order: x = (1, 0), y = (1, 0), a = (0, 0), b = (1, 0) wins both
    assert two.table[1, 0, 1, 0, 0, 0, 1, 0] == Fraction(3, 8) ** 2
    m = mix([q_box(0), q_box(1)], [h, h])
    assert m == uniform_box(1, CHSH)
    with pytest.raises(BoxError):
        mix([B, B], [h, Fraction(1, 3)])


def test_size_cap_refuses_large_boxes():
    with pytest.raises(SizeCapError):
        uniform_box(7, CHSH)
    old = config.settings
    try:
        config.configure(dense_cap=16)
        with pytest.raises(SizeCapError):
            iid_power(q_box(h), 2)
    finally:
        config.settings = old


def test_iid_power_preserves_signaling_status():
    rng = random.Random(3)
    T = np.full((2, 2, 2, 2), Fraction(0), dtype=object)
    for x, y, a in itertools.product(range(2), repeat=3):
        T[x, y, a, x] = h
    sig = Box(1, CHSH, T)
    for B in (pr_box(), q_box(Fraction(2, 3)), sig, random_box(rng, 1, CHSH)):
        base = is_nonsignaling(B)[0]
        for n in (2, 3):
            assert is_nonsignaling(iid_power(B, n))[0] == base


def test_round_nonsignaling():
    assert is_round_nonsignaling(iid_power(q_box(Fraction(3, 4)), 2))[0]
    # Alice's second output copies her first input: non-signaling across
    # parties but signaling across rounds
    T = np.full(CHSH.x_shape(2) + CHSH.a_shape(2), Fraction(0), dtype=object)
    for x1, x2, y1, y2, a1 in itertools.product(range(2), repeat=5):
        T[x1, x2, y1, y2, a1, x1, 0, 0] = h
    box = Box(2, CHSH, T)
    assert is_nonsignaling(box)[0]
    ok, wit = is_round_nonsignaling(box)
    assert not ok and wit.unit == "party 0 round 0"


# --- CHSH symmetry -------------------------------------------------------------------

def test_sym_examples():
    for n, p in ((1, h), (2, Fraction(3, 4)), (3, Fraction(1, 5))):
        sym = sym_from_dense(iid_power(q_box(p), n))
        assert sym.p == tuple(binomial(n, k) * p**k * (1 - p) ** (n - k) for k in range(n + 1))
    d = dense_from_sym(SymBox(1, (h, h)))
    assert all(v == Fraction(1, 4) for v in d.entries())
    assert sym_from_dense(iid_power(pr_box(), 3)).p == (0, 0, 0, 1)


def test_sym_from_dense_names_violation():
    T = np.full((2, 2, 2, 2), Fraction(1, 4), dtype=object)
    T[0, 0, 0, 0], T[0, 0, 1, 1] = Fraction(3, 8), Fraction(1, 8)  # both winning
    box = Box(1, CHSH, T)
    assert not is_chsh_symmetric(box)
    with pytest.raises(SymmetryError) as e:
        sym_from_dense(box)
    assert e.value.pair == (0, 3)


@given(sym_strategy(3))
def test_sym_round_trip(sym):
    dense = dense_from_sym(sym)
    assert is_chsh_symmetric(dense)
    assert sym_from_dense(dense) == sym
    assert dense_from_sym(sym_from_dense(dense)) == dense


@pytest.mark.parametrize("n", [4, 5])
def test_sym_round_trip_larger(n):
    sym = symbox_mix([symbox_iid(Fraction(2, 7), n), SymBox(n, (0,) * n + (1,))], [h, h])
    dense = dense_from_sym(sym)
    assert sym_from_dense(dense) == sym


@settings(max_examples=25)
@given(sym_strategy(3), sym_strategy(3))
def test_symbox_distance_matches_dense(P, Q):
    if P.n != Q.n:
        Q = SymBox(P.n, (1,) + (0,) * P.n)
    assert symbox_distance(P, Q) == box_distance(dense_from_sym(P), dense_from_sym(Q))


def test_distance_examples():
    B = q_box(Fraction(1, 3))
    assert box_distance(B, B) == 0
    assert box_distance(q_box(1), q_box(0)) == 2
    assert symbox_distance(SymBox(1, (1, 0)), SymBox(1, (0, 1))) == 2


# --- statistics --------------------------------------------------------------------

def test_win_distribution_examples():
    u = InputDist.uniform(3, 4)
    assert win_distribution(iid_power(pr_box(), 3), u) == (0, 0, 0, 1)
    assert win_distribution(uniform_box(3, CHSH), u) == symbox_iid(h, 3).p
    biased = InputDist(2, (Fraction(1, 10), Fraction(2, 10), Fraction(3, 10), Fraction(4, 10)))
    assert win_distribution(iid_power(q_box(Fraction(2, 3)), 2), biased) == \
        symbox_iid(Fraction(2, 3), 2).p


@settings(max_examples=10)
@given(rationals(0, 1, 20), st.integers(1, 4))
def test_win_distribution_is_binomial(p, n):
    assert win_distribution(iid_power(q_box(p), n), InputDist.uniform(n, 4)) == symbox_iid(p, n).p


def test_marginal_first_k_examples():
    sym = symbox_iid(Fraction(2, 5), 4)
    assert marginal_first_k(sym, 4) == sym
    assert marginal_first_k(SymBox(3, (0, 0, 0, 1)), 2).p == (0, 0, 1)
    assert marginal_first_k(SymBox(2, (0, 1, 0)), 1).p == (h, h)
    assert marginal_first_k(sym, 2) == symbox_iid(Fraction(2, 5), 2)


@settings(max_examples=15)
@given(sym_strategy(4), st.data())
def test_marginal_first_k_matches_dense(sym, data):
    k = data.draw(st.integers(1, sym.n))
    dense = marginal_rounds(dense_from_sym(sym), k)
    assert sym_from_dense(dense) == marginal_first_k(sym, k)


# --- predicates ----------------------------------------------------------------------

def test_freq_w_examples():
    pred = chsh_predicate()
    # lumped symbols: x * 2 + y and a * 2 + b; all zeros wins every round
    assert freq_w((0, 0, 0), (0, 0, 0), pred).counts == (3, 0)
    assert freq_w((1, 0), (3, 3), pred).counts == (1, 1)


def test_chsh_predicate_matches_win_table():
    pred = chsh_predicate()
    wins = chsh_wins(1)
    for x, y, a, b in itertools.product(range(2), repeat=4):
        assert pred(a * 2 + b, x * 2 + y) == (1 if wins[x, y, a, b] else 2)


def test_is_w_symmetric_constant_predicate():
    const = Predicate(1, ((1, 1, 1, 1),) * 4)
    assert is_w_symmetric(uniform_box(2, CHSH), const)
    assert not is_w_symmetric(q_box(Fraction(3, 4)), const)
    pred = chsh_predicate()
    assert is_w_symmetric(iid_power(q_box(Fraction(3, 4)), 2), pred)
    assert is_w_symmetric(iid_power(q_box(Fraction(3, 4)), 2), pred) == \
        is_chsh_symmetric(iid_power(q_box(Fraction(3, 4)), 2))


def test_predicate_validation():
    with pytest.raises(BoxError):
        Predicate(2, ((1, 2), (3, 1)))
    with pytest.raises(BoxError):
        Predicate(2, ((1, 2), (1,)))


def test_class_box_frequencies_match_enumeration():
    pred = chsh_predicate()
    mu = (Fraction(1, 10), Fraction(2, 10), Fraction(3, 10), Fraction(4, 10))
    sym = symbox_mix([symbox_iid(Fraction(3, 4), 3), symbox_iid(Fraction(1, 3), 3)], [h, h])
    dense = dense_from_sym(sym)
    fast = ClassBox.from_symbox(sym).freq_distribution(mu)
    slow = freq_distribution(dense, pred, mu)
    assert {k: v for k, v in fast.items() if v} == slow
    # under the CHSH predicate the frequency law is the win-count law for any mu
    assert all(slow[(k, 3 - k)] == sym.p[k] for k in range(4) if sym.p[k])
    # two winning and two losing outputs per input
    assert class_masses(pred, mu) == (2, 2)


def test_compositions():
    assert sorted(compositions(2, 2)) == [(0, 2), (1, 1), (2, 0)]
    assert len(list(compositions(5, 3))) == 21


def test_lump_keeps_entries():
    B = iid_power(q_box(Fraction(3, 4)), 2)
    L = lump(B)
    assert L.alphabets == Alphabets((4,), (4,))
    # lumped input (x*2+y) per round, output (a*2+b) per round
    assert L.table[3, 0, 2, 0] == B.table[1, 0, 1, 0, 1, 0, 0, 0]
