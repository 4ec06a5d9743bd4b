"""Channels acting on boxes, their distinguishability, and two constructions.

A channel draws the inputs x from P_X, feeds them to the box, and maps
(a, x) to a result r with a kernel P(r|a, x).  Eve may hold a further
interface (z, e) of the same box.  The distinguishability of two channels
is

    sum_r max_z sum_e | sum_{x,a} P(a e|x z) M_r(x, a) |,
    M_r(x, a) = P^E_X(x) P^E(r|a x) - P^F_X(x) P^F(r|a x).

For a fixed choice of z per r and sign per (e, r) the expression is linear
in the box, so its maximum over a polytope is the best of one LP per
choice.

The two constructions are the extension that moves a bound from arbitrary
extensions of a box to extensions of the de Finetti box, and a pair of
channels that no round-wise non-signaling box can tell apart but a
signaling-across-rounds box can.
"""

from __future__ import annotations

import itertools
import math
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import flint
import numpy as np

from . import config
from .boxes import (CHSH, Alphabets, Box, BoxError, dense_from_sym, exact, is_nonsignaling,
                    sym_from_dense)
from .definetti import certify_first_definetti, tau_chsh
from .linprog import Polytope, box_from_point, lp_solve, round_ns_polytope
from .numerics import PreconditionError, binomial
from .symmetrize import TwirlElement, eve_slice, group_order

ALICE = Alphabets((2,), (2,))


class PatternCapError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Channel:
    """Input distribution ``px[x]`` and kernel ``kernel[x, a, r]`` over flat
    n-round input and output indices of the interfaces the channel uses."""

    px: tuple
    kernel: np.ndarray

    def __post_init__(self):
        px = tuple(exact(v) for v in self.px)
        K = np.asarray(self.kernel, dtype=object)
        object.__setattr__(self, "px", px)
        object.__setattr__(self, "kernel", K)
        if K.ndim != 3 or K.shape[0] != len(px):
            raise BoxError("kernel must be shaped (inputs, outputs, results)")
        if any(v < 0 for v in px) or sum(px, Fraction(0)) != 1:
            raise BoxError("P_X must be a probability vector")
        for x in range(K.shape[0]):
            for a in range(K.shape[1]):
                row = K[x, a]
                if any(v < 0 for v in row) or sum(row, Fraction(0)) != 1:
                    raise BoxError(f"kernel row (x={x}, a={a}) is not a distribution")

    @property
    def x_count(self) -> int:
        return self.kernel.shape[0]

    @property
    def a_count(self) -> int:
        return self.kernel.shape[1]

    @property
    def r_count(self) -> int:
        return self.kernel.shape[2]

    def weighted(self) -> np.ndarray:
        """P_X(x) P(r|a x) as an (x, a, r) array."""
        return self.kernel * np.array(self.px, dtype=object).reshape(-1, 1, 1)


def _layout(box: Box) -> np.ndarray:
    """Box entries as an (x, z, a, e) array; z = e = 0 without Eve."""
    k = box.alphabets.parties * box.n
    X = math.prod(box.table.shape[:k])
    if box.alphabets.eve is None:
        return box.table.reshape(X, 1, -1, 1)
    zin, eout = box.alphabets.eve
    return box.table.reshape(X, zin, -1, eout)


def apply(channel: Channel, box: Box) -> tuple:
    """Distribution of the result r."""
    if box.alphabets.eve is not None:
        raise BoxError("apply acts on boxes without a side interface")
    M = box.matrix()
    if M.shape != (channel.x_count, channel.a_count):
        raise BoxError("channel and box disagree on alphabets")
    W = channel.weighted()
    return tuple(sum((W[x, a, r] * M[x, a] for x in range(M.shape[0]) for a in range(M.shape[1])
                      if M[x, a] != 0), Fraction(0)) for r in range(channel.r_count))


def _difference(E: Channel, F: Channel) -> np.ndarray:
    if E.kernel.shape != F.kernel.shape:
        raise BoxError("channels must share alphabets")
    return E.weighted() - F.weighted()


@dataclass(frozen=True)
class DistinguishReport:
    value: object
    z_choice: tuple  # best z per r
    signs: tuple  # per r, the sign per e
    witness: Box | None = None
    patterns: int = 1


def distinguishability(E: Channel, F: Channel, box: Box) -> DistinguishReport:
    """The channel distinguishability using ``box`` (Eve optional)."""
    M = _difference(E, F)
    T = _layout(box)
    X, Z, A, Ev = T.shape
    if (X, A) != (E.x_count, E.a_count):
        raise BoxError("channel and box disagree on alphabets")
    nz = [(x, a) for x in range(X) for a in range(A)]
    total = Fraction(0)
    zs, signs = [], []
    for r in range(E.r_count):
        Mr = M[:, :, r]
        live = [(x, a) for x, a in nz if Mr[x, a] != 0]
        best, best_z, best_s = None, 0, ()
        for z in range(Z):
            s_tot, s_signs = Fraction(0), []
            for e in range(Ev):
                v = Fraction(0)
                for x, a in live:
                    t = T[x, z, a, e]
                    if t != 0:
                        v = v + t * Mr[x, a]
                s_signs.append(1 if v >= 0 else -1)
                s_tot = s_tot + abs(v)
            if best is None or s_tot > best:
                best, best_z, best_s = s_tot, z, tuple(s_signs)
        total = total + best
        zs.append(best_z)
        signs.append(best_s)
    return DistinguishReport(total, tuple(zs), tuple(signs), box)


def l1_distance(E: Channel, F: Channel, box: Box):
    """||E(P) - F(P)||_1 for a box without Eve."""
    pe, pf = apply(E, box), apply(F, box)
    return sum((abs(a - b) for a, b in zip(pe, pf)), Fraction(0))


def pattern_count(r: int, z: int, e: int) -> int:
    return z**r * 2 ** (e * r)


def _all_patterns(R: int, Z: int, Ev: int):
    for zs in itertools.product(range(Z), repeat=R):
        for flat in itertools.product((1, -1), repeat=R * Ev):
            yield zs, tuple(flat[r * Ev:(r + 1) * Ev] for r in range(R))


def _z_choices(R: int, Z: int):
    """z per r up to renaming Eve's inputs: each new value is the next unused one."""
    def rec(prefix, top):
        if len(prefix) == R:
            yield tuple(prefix)
            return
        for z in range(min(top + 2, Z)):
            yield from rec(prefix + [z], max(top, z))
    yield from rec([], -1)


def _orbit_patterns(R: int, Z: int, Ev: int):
    """One pattern per orbit of Eve relabelings.

    Outputs may be permuted separately for each input, which permutes the
    sign columns of all r sharing that input; so per input only the
    multiset of columns matters.
    """
    for zs in _z_choices(R, Z):
        groups = [[r for r in range(R) if zs[r] == z] for z in sorted(set(zs))]
        per_group = []
        for rs in groups:
            cols = list(itertools.product((1, -1), repeat=len(rs)))
            per_group.append([(rs, combo) for combo in itertools.combinations_with_replacement(cols, Ev)])
        for choice in itertools.product(*per_group):
            signs = [None] * R
            for rs, combo in choice:
                for i, r in enumerate(rs):
                    signs[r] = tuple(col[i] for col in combo)
            yield zs, tuple(signs)


def orbit_pattern_count(r: int, z: int, e: int) -> int:
    return sum(1 for _ in _orbit_patterns(r, z, e))


def diamond_over_polytope(E: Channel, F: Channel, polytope: Polytope,
                          method: str = "auto") -> DistinguishReport:
    """Maximum distinguishability over the boxes of ``polytope``.

    When the polytope is invariant under relabeling Eve, one sign pattern
    per orbit suffices: relabeling a box maps the optimum of one pattern
    onto the optimum of the relabeled pattern.
    """
    if polytope.shape is None:
        raise BoxError("polytope variables must be box entries")
    n, alph = polytope.shape
    Z, Ev = alph.eve if alph.eve is not None else (1, 1)
    M = _difference(E, F)
    X, A, R = M.shape
    if X * Z * A * Ev != polytope.n_vars:
        raise BoxError("channel and polytope disagree on alphabets")
    if polytope.eve_symmetric:
        count, patterns = orbit_pattern_count(R, Z, Ev), _orbit_patterns(R, Z, Ev)
    else:
        count, patterns = pattern_count(R, Z, Ev), _all_patterns(R, Z, Ev)
    cap = config.settings.pattern_cap
    if count > cap:
        raise PatternCapError(f"{count} patterns exceed the cap {cap}; reduce |R|, |Z| or |E|")
    live = [[(x, a, M[x, a, r]) for x in range(X) for a in range(A) if M[x, a, r] != 0]
            for r in range(R)]
    best = None
    for zs, signs in patterns:
        obj: dict[int, Fraction] = {}
        for r in range(R):
            z = zs[r]
            for e in range(Ev):
                s = signs[r][e]
                for x, a, v in live[r]:
                    j = ((x * Z + z) * A + a) * Ev + e
                    obj[j] = obj.get(j, Fraction(0)) + s * v
        sol = lp_solve(polytope, obj, "max", method=method)
        if sol.status == "infeasible":
            raise PreconditionError("polytope is empty")
        if not sol.optimal:
            raise AssertionError(f"LP status {sol.status} on a bounded polytope")
        if best is None or sol.value > best[0]:
            best = (sol.value, zs, signs, sol.x)
    value, zs, signs, x = best
    witness = box_from_point(polytope, x)
    # the pattern optimum is a lower bound of the norm at the witness, and
    # the norm is the max over patterns, so the two must coincide
    check = distinguishability(E, F, witness).value
    if check != value:
        raise AssertionError("witness re-evaluation disagrees with the LP optimum")
    return DistinguishReport(value, zs, signs, witness, count)


# --- extension of the de Finetti box ----------------------------------------------------------

def ab_marginal(box: Box) -> Box:
    """Sum out Eve's output at z = 0."""
    if box.alphabets.eve is None:
        return box
    T = _layout(box)
    X, Z, A, Ev = T.shape
    flat = np.empty((X, A), dtype=object)
    for x in range(X):
        for a in range(A):
            flat[x, a] = sum(T[x, 0, a, :], Fraction(0))
    alph = box.alphabets.without_eve()
    return Box(box.n, alph, flat.reshape(alph.x_shape(box.n) + alph.a_shape(box.n)))


def build_extension(P_ABE: Box, tau_AB: Box | None = None,
                         channel_pairs: Sequence[tuple[Channel, Channel]] = ()) -> Box:
    """Extension of tau with Eve's alphabet enlarged by one outcome e*.

    With weight (n+1)^-2 the extension behaves like P_ABE; otherwise Eve
    sees e* and the AB part is the remainder R of tau after removing P.
    The new outcome is the last Eve output.
    """
    n = P_ABE.n
    if P_ABE.alphabets.eve is None or P_ABE.alphabets.without_eve() != CHSH:
        raise BoxError("need a CHSH box with a side interface")
    P_AB = ab_marginal(P_ABE)
    certify_first_definetti(P_AB)  # raises on a symmetry or threshold failure
    if tau_AB is None:
        tau_AB = dense_from_sym(tau_chsh(n))
    s = (n + 1) ** 2
    R = (s * tau_AB.table - P_AB.table) * Fraction(1, s - 1)
    for idx, v in np.ndenumerate(R):
        if v < 0:
            raise PreconditionError(f"remainder entry {idx} is negative", idx)
    zin, eout = P_ABE.alphabets.eve
    T = _layout(P_ABE)
    X, Z, A, Ev = T.shape
    Rm = R.reshape(X, A)
    out = np.empty((X, Z, A, Ev + 1), dtype=object)
    out[:, :, :, :Ev] = T * Fraction(1, s)
    for z in range(Z):
        out[:, z, :, Ev] = Rm * Fraction(s - 1, s)
    alph = CHSH.with_eve(zin, eout + 1)
    ext = Box(n, alph, out.reshape(alph.x_shape(n) + alph.a_shape(n)))
    if ab_marginal(ext) != tau_AB:
        raise AssertionError("extension does not reproduce tau")
    ok, wit = is_nonsignaling(ext)
    if not ok:
        raise AssertionError(f"extension signals: {wit}")
    for E, F in channel_pairs:
        lhs = distinguishability(E, F, P_ABE).value
        rhs = s * distinguishability(E, F, ext).value
        if lhs > rhs:
            raise AssertionError("distinguishability chain fails on the extension")
    return ext


# --- channels no round-wise non-signaling box can separate ------------------------------------

def _stats(n: int, m: int):
    """t(x) over the first m inputs and w(a) over the last n - m outputs, per flat index."""
    bits = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)
    return bits[:, :m].sum(axis=1), bits[:, m:].sum(axis=1)


def wt_distribution(box: Box, m: int) -> np.ndarray:
    """P(w, t) under uniform inputs, as a (n-m+1, m+1) array."""
    n = box.n
    if box.alphabets.without_eve() != ALICE:
        raise BoxError("need a one-party binary box")
    t_of, w_of = _stats(n, m)
    M = box.matrix() if box.alphabets.eve is None else ab_marginal(box).matrix()
    out = np.full((n - m + 1, m + 1), Fraction(0), dtype=object)
    u = Fraction(1, 2**n)
    for x in range(M.shape[0]):
        for a in range(M.shape[1]):
            if M[x, a] != 0:
                out[w_of[a], t_of[x]] += u * M[x, a]
    return out


def _nullspace(rows: list[list[Fraction]], ncols: int) -> list[list[Fraction]]:
    mat = flint.fmpq_mat(len(rows), ncols, [flint.fmpq(v.numerator, v.denominator)
                                           for row in rows for v in row])
    rref, rank = mat.rref()
    pivots = []
    for i in range(rank):
        j = next(j for j in range(ncols) if rref[i, j] != 0)
        pivots.append(j)
    free = [j for j in range(ncols) if j not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for i, p in enumerate(pivots):
            c = rref[i, f]
            v[p] = -Fraction(int(c.p), int(c.q))
        basis.append(v)
    return basis


def majority_box(n: int) -> Box:
    """All-ones output when more than half the inputs are 1, all-zeros otherwise."""
    X = 2**n
    table = np.full((X, X), Fraction(0), dtype=object)
    for x, bits in enumerate(itertools.product((0, 1), repeat=n)):
        table[x, X - 1 if 2 * sum(bits) > n else 0] = Fraction(1)
    return Box(n, ALICE, table.reshape(ALICE.x_shape(n) + ALICE.a_shape(n)))


@dataclass(frozen=True)
class Counterexample:
    n: int
    m: int
    E: Channel
    F: Channel
    delta: tuple  # delta[w][t]
    subspace: tuple  # basis of the indistinguishable (w, t) distributions
    complement: tuple  # basis of vectors orthogonal to it


def _check_nm(n: int, m: int):
    if not (n > 1 and 2 * m > n and m <= n - 1):
        raise PreconditionError(f"need n > 1 and n/2 < m <= n - 1, got n={n}, m={m}")


def counterexample_channels(n: int, m: int) -> Counterexample:
    _check_nm(n, m)
    W_, T_ = n - m + 1, m + 1
    weights = [Fraction(binomial(m, t), 2**m) for t in range(T_)]
    # subspace: P(w, t) = c_w 2^-m binom(m, t); one basis vector per w
    subspace = []
    for w in range(W_):
        v = [Fraction(0)] * (W_ * T_)
        for t in range(T_):
            v[w * T_ + t] = weights[t]
        subspace.append(tuple(v))
    # orthogonal complement: vectors with sum_t delta[w][t] binom(m, t) = 0 for every w
    comp = _nullspace([list(v) for v in subspace], W_ * T_)
    scaled = []
    for v in comp:
        top = max(abs(c) for c in v)
        scaled.append(tuple(c / top for c in v))
    Q = wt_distribution(majority_box(n), m).ravel()
    score = [abs(sum((c * q for c, q in zip(v, Q)), Fraction(0))) for v in scaled]
    delta = scaled[max(range(len(scaled)), key=lambda i: score[i])]
    if all(s == 0 for s in score):
        raise AssertionError("no complement vector separates the distinguisher box")
    t_of, w_of = _stats(n, m)
    X = 2**n
    K_e = np.empty((X, X, 2), dtype=object)
    K_f = np.empty((X, X, 2), dtype=object)
    for x in range(X):
        for a in range(X):
            d = delta[w_of[a] * T_ + t_of[x]]
            K_e[x, a, 0], K_e[x, a, 1] = (1 + d) / 2, (1 - d) / 2
            K_f[x, a, 0], K_f[x, a, 1] = (1 - d) / 2, (1 + d) / 2
    px = (Fraction(1, X),) * X
    grid = tuple(tuple(delta[w * T_ + t] for t in range(T_)) for w in range(W_))
    return Counterexample(n, m, Channel(px, K_e), Channel(px, K_f), grid,
                          tuple(subspace), tuple(scaled))


def lift_channel(ch: Channel, n: int) -> Channel:
    """Act on Alice's interface of a CHSH box; Bob's input is fixed to 0 and
    his output ignored."""
    X = 2**n
    px = [Fraction(0)] * (X * X)
    for x in range(X):
        px[x * X] = ch.px[x]
    K = np.empty((X * X, X * X, ch.r_count), dtype=object)
    for x in range(X):
        for y in range(X):
            for a in range(X):
                row = ch.kernel[x, a]
                for b in range(X):
                    K[x * X + y, a * X + b] = row
    return Channel(tuple(px), K)


def lift_box(box: Box) -> Box:
    """Alice's box with Bob always answering 0."""
    n = box.n
    X = 2**n
    M = box.matrix()
    T = np.full((X, X, X, X), Fraction(0), dtype=object)
    for x in range(X):
        for a in range(X):
            if M[x, a] != 0:
                T[x, :, a, 0] = M[x, a]
    return Box(n, CHSH, T.reshape(CHSH.x_shape(n) + CHSH.a_shape(n)))


@dataclass(frozen=True)
class CounterexampleReport:
    n: int
    m: int
    roundns_value: Fraction
    q_value: Fraction
    twirled_value: Fraction
    pr_estar: Fraction
    delta: tuple
    runtime: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.roundns_value == 0 and self.q_value > 0 and self.twirled_value > 0


def verify_counterexample(n: int, m: int, method: str = "auto") -> CounterexampleReport:
    """Run the three checks of the counterexample.

    1. Over round-wise non-signaling boxes with a two-outcome Eve the
       channels are indistinguishable (LP optimum 0).
    2. The distinguisher box separates them.
    3. After the symmetrizing twirl, Eve's identity outcome e* keeps the
       distinguisher intact; the reported value is the e*-branch term
       Pr[e*] times the value of the lifted box, a lower bound of the full
       norm of the twirled extension.
    """
    start = time.perf_counter()
    cx = counterexample_channels(n, m)
    poly = round_ns_polytope(n, ALICE.with_eve(1, 2))
    rns = diamond_over_polytope(cx.E, cx.F, poly, method=method)
    Q = majority_box(n)
    q_val = distinguishability(cx.E, cx.F, Q).value
    QAB = lift_box(Q)
    E2, F2 = lift_channel(cx.E, n), lift_channel(cx.F, n)
    lifted = distinguishability(E2, F2, QAB).value
    if lifted != q_val:
        raise AssertionError("lifting to two parties changed the distinguishability")
    weight, gQ = eve_slice(QAB, TwirlElement.identity(n), include_permutations=True)
    if gQ != QAB:
        raise AssertionError("identity element moved the box")
    twirled = weight * distinguishability(E2, F2, gQ).value
    if weight != Fraction(1, group_order(n, include_permutations=True)):
        raise AssertionError("unexpected weight of e*")
    return CounterexampleReport(n, m, rns.value, q_val, twirled, weight, cx.delta,
                                time.perf_counter() - start, {"patterns": rns.patterns})


# --- random channels -----------------------------------------------------------------

def _rand_dist(rng: random.Random, size: int, den: int = 12) -> list[Fraction]:
    w = [rng.randint(0, den) for _ in range(size)]
    if sum(w) == 0:
        w[rng.randrange(size)] = 1
    s = sum(w)
    return [Fraction(v, s) for v in w]


def random_channel_pair(x_count: int, a_count: int, r_count: int,
                        rng: random.Random) -> tuple[Channel, Channel]:
    out = []
    for _ in range(2):
        px = _rand_dist(rng, x_count)
        K = np.empty((x_count, a_count, r_count), dtype=object)
        for x in range(x_count):
            for a in range(a_count):
                K[x, a] = _rand_dist(rng, r_count)
        out.append(Channel(tuple(px), K))
    return out[0], out[1]
