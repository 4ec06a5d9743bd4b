"""Seeded test boxes: quantum-generated mixtures and small Eve extensions."""

from __future__ import annotations

import random
from fractions import Fraction

import numpy as np

from .boxes import (CHSH, Box, SymBox, chsh_wins, dense_from_sym, iid_power, q_box,
                    symbox_iid, symbox_mix)

P_LO, P_HI = Fraction(15, 100), Fraction(85, 100)


def random_p(rng: random.Random, den: int = 100) -> Fraction:
    return Fraction(rng.randint(int(P_LO * den), int(P_HI * den)), den)


def random_weights(rng: random.Random, k: int, den: int = 10) -> list[Fraction]:
    w = [rng.randint(1, den) for _ in range(k)]
    s = sum(w)
    return [Fraction(v, s) for v in w]


def random_mixture(rng: random.Random, n: int, max_parts: int = 3) -> SymBox:
    """Mixture of Q(p)^{(x)n} with rational p in [0.15, 0.85]."""
    k = rng.randint(1, max_parts)
    ps = [random_p(rng) for _ in range(k)]
    return symbox_mix([symbox_iid(p, n) for p in ps], random_weights(rng, k))


def mixture_corpus(seed: int = 0, count: int = 1000, n_max: int = 12) -> list[SymBox]:
    rng = random.Random(seed)
    return [random_mixture(rng, rng.randint(1, n_max)) for _ in range(count)]


def _ns_extension(n: int, ps, weights, kernels) -> Box:
    """Eve learns a noisy label of the mixture component.

    kernels[z][j] is the distribution of Eve's output given input z and
    component j.  Every slice is a non-negative combination of iid boxes,
    so the result is non-signaling.
    """
    Z, E = len(kernels), len(kernels[0][0])
    comps = [iid_power(q_box(p), n).matrix() for p in ps]
    X, A = comps[0].shape
    T = np.full((X, Z, A, E), Fraction(0), dtype=object)
    for z in range(Z):
        for e in range(E):
            acc = np.full((X, A), Fraction(0), dtype=object)
            for j, c in enumerate(comps):
                acc = acc + weights[j] * kernels[z][j][e] * c
            T[:, z, :, e] = acc
    alph = CHSH.with_eve(Z, E)
    return Box(n, alph, T.reshape(alph.x_shape(n) + alph.a_shape(n)))


def random_extension(rng: random.Random, n: int, z_max: int = 2, e_max: int = 2) -> Box:
    """A box with a quantum-generated AB marginal and a small Eve interface."""
    k = rng.randint(1, 3)
    ps = [random_p(rng) for _ in range(k)]
    weights = random_weights(rng, k)
    Z, E = rng.randint(1, z_max), rng.randint(1, e_max)
    kernels = [[random_weights(rng, E) for _ in range(k)] for _ in range(Z)]
    return _ns_extension(n, ps, weights, kernels)


def win_copy_extension(p: Fraction = Fraction(3, 4), n: int = 2) -> Box:
    """Q(p)^{(x)n} where Eve's single output copies whether round 1 was won."""
    base = iid_power(q_box(p), n)
    wins = chsh_wins(1)  # x, y, a, b
    T = np.full(base.table.shape + (2,), Fraction(0), dtype=object)
    for idx, v in np.ndenumerate(base.table):
        x1, y1, a1, b1 = idx[0], idx[n], idx[2 * n], idx[3 * n]
        T[idx + (int(wins[x1, y1, a1, b1]),)] = v
    T = np.expand_dims(T, axis=2 * n)  # trivial Eve input
    alph = CHSH.with_eve(1, 2)
    return Box(n, alph, T)


def extension_corpus(seed: int = 0, count: int = 20, n_max: int = 2) -> list[Box]:
    rng = random.Random(seed)
    out = [win_copy_extension()]
    while len(out) < count:
        out.append(random_extension(rng, rng.randint(1, n_max)))
    return out


def dense_tau(n: int) -> Box:
    from .definetti import tau_chsh

    return dense_from_sym(tau_chsh(n))


def channel_cases(seed: int = 0, count: int = 20, n_max: int = 2, r_max: int = 2):
    """(extension, E, F) triples: corpus extensions with random channel pairs."""
    from .channels import random_channel_pair

    rng = random.Random(seed + 1)
    out = []
    for P in extension_corpus(seed, count, n_max):
        X = 4**P.n
        E, F = random_channel_pair(X, X, rng.randint(1, r_max), rng)
        out.append((P, E, F))
    return out
