"""Twirls that enforce permutation and CHSH symmetry.

Per round, the relabeling group has eight elements indexed by bits
(r1, r2, r3): a joint output flip, an Alice input flip with a correction
on Bob's output, and a Bob input flip with a correction on Alice's
output.  Acting on a single-round tuple,

    x -> x ^ r2,  y -> y ^ r3,
    a -> a ^ r1 ^ (r3 & x) ^ (r2 & r3),
    b -> b ^ r1 ^ (r2 & y),

which preserves a ^ b ^ (x & y).  A box transforms as (g.P)(v) = P(g(v)).
"""

from __future__ import annotations

import itertools
import math
import random
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .boxes import CHSH, Box, BoxError, check_size

EXHAUSTIVE_MAX_N = 6


class ApproximateTwirlWarning(UserWarning):
    pass


def round_map(bits: tuple[int, int, int], x: int, y: int, a: int, b: int):
    r1, r2, r3 = bits
    return (x ^ r2, y ^ r3, a ^ r1 ^ (r3 & x) ^ (r2 & r3), b ^ r1 ^ (r2 & y))


ROUND_ELEMENTS = tuple(itertools.product(range(2), repeat=3))  # identity first


@dataclass(frozen=True)
class TwirlElement:
    perm: tuple[int, ...]  # output round i reads input round perm[i]
    bits: tuple[tuple[int, int, int], ...]

    @classmethod
    def identity(cls, n: int) -> TwirlElement:
        return cls(tuple(range(n)), ((0, 0, 0),) * n)

    def is_identity(self) -> bool:
        return self.perm == tuple(range(len(self.perm))) and all(b == (0, 0, 0) for b in self.bits)


def _require_chsh(box: Box):
    if box.alphabets != CHSH:
        raise BoxError("CHSH twirls need two binary parties and no side interface")


def permute_rounds(box: Box, perm) -> Box:
    """Relabel rounds jointly for every party: round i of the result is
    round perm[i] of ``box``."""
    n, P = box.n, box.alphabets.parties
    axes = [box.in_axis(p, perm[r]) for p in range(P) for r in range(n)]
    axes += [box.out_axis(p, perm[r]) for p in range(P) for r in range(n)]
    return Box(n, box.alphabets, np.transpose(box.table, axes), validate=False)


def permutation_twirl(box: Box, seed: int = 0) -> Box:
    """Uniform average over round permutations (sampled when n > 6)."""
    if box.alphabets.eve is not None:
        raise BoxError("permutation_twirl needs a box without a side interface")
    n = box.n
    if n <= EXHAUSTIVE_MAX_N:
        perms = list(itertools.permutations(range(n)))
    else:
        rng = random.Random(seed)
        perms = []
        for _ in range(10 * n * n):
            p = list(range(n))
            rng.shuffle(p)
            perms.append(tuple(p))
        warnings.warn(f"sampled {len(perms)} of {math.factorial(n)} permutations; "
                      "result is only approximately permutation invariant",
                      ApproximateTwirlWarning, stacklevel=2)
    acc = np.zeros_like(box.table)
    for p in perms:
        acc = acc + permute_rounds(box, p).table
    return Box(n, box.alphabets, acc * Fraction(1, len(perms)), validate=False)


def _round_front(box: Box, r: int):
    n = box.n
    src = [r, n + r, 2 * n + r, 3 * n + r]
    return np.moveaxis(box.table, src, [0, 1, 2, 3]), src


def apply_round_element(box: Box, r: int, bits) -> Box:
    """g.P for the relabeling ``bits`` acting on round r only."""
    t, src = _round_front(box, r)
    out = np.empty_like(t)
    for x, y, a, b in itertools.product(range(2), repeat=4):
        out[x, y, a, b] = t[round_map(bits, x, y, a, b)]
    return Box(box.n, box.alphabets, np.moveaxis(out, [0, 1, 2, 3], src), validate=False)


def apply_element(box: Box, element: TwirlElement) -> Box:
    _require_chsh(box)
    out = permute_rounds(box, element.perm)
    for r, bits in enumerate(element.bits):
        if bits != (0, 0, 0):
            out = apply_round_element(out, r, bits)
    return out


def chsh_depolarize(box: Box) -> Box:
    """Average over all 8^n per-round relabelings, one round at a time."""
    _require_chsh(box)
    check_size(box.n, box.alphabets)
    eighth = Fraction(1, 8)
    out = box
    for r in range(box.n):
        t, src = _round_front(out, r)
        avg = np.empty_like(t)
        for x, y, a, b in itertools.product(range(2), repeat=4):
            acc = t[round_map(ROUND_ELEMENTS[0], x, y, a, b)]
            for bits in ROUND_ELEMENTS[1:]:
                acc = acc + t[round_map(bits, x, y, a, b)]
            avg[x, y, a, b] = acc * eighth
        out = Box(out.n, out.alphabets, np.moveaxis(avg, [0, 1, 2, 3], src), validate=False)
    return out


def group_elements(n: int, include_permutations: bool = False):
    """Twirl group elements, identity first."""
    perms = list(itertools.permutations(range(n))) if include_permutations else [tuple(range(n))]
    for perm in perms:
        for bits in itertools.product(ROUND_ELEMENTS, repeat=n):
            yield TwirlElement(perm, bits)


def group_order(n: int, include_permutations: bool = False) -> int:
    return 8**n * (math.factorial(n) if include_permutations else 1)


def eve_slice(box: Box, element: TwirlElement, include_permutations: bool = False):
    """Q~(ab e|xy) for one Eve outcome e = element: weight times g.P."""
    weight = Fraction(1, group_order(box.n, include_permutations))
    return weight, apply_element(box, element)


def depolarize_with_eve(box: Box, include_permutations: bool = False) -> Box:
    """Extension whose Eve output names the applied group element.

    Eve has a trivial input; outcome 0 is the identity e*.  The AB marginal
    is the twirled box and the e*-conditional box is ``box`` itself.
    """
    _require_chsh(box)
    n = box.n
    order = group_order(n, include_permutations)
    alph = CHSH.with_eve(1, order)
    check_size(n, alph)
    weight = Fraction(1, order)
    slices = [apply_element(box, el).table * weight
              for el in group_elements(n, include_permutations)]
    stacked = np.stack(slices, axis=-1)  # Eve output last
    k = 2 * n  # number of AB input axes
    table = np.expand_dims(stacked, axis=k)  # trivial Eve input after AB inputs
    return Box(n, alph, table, validate=False)
