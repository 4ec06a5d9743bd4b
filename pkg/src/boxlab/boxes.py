"""Dense n-round boxes, the compressed CHSH-symmetric form, and predicates.

A dense box stores P(a|x) in a numpy object array whose axes are all input
axes followed by all output axes.  Within each group the axes run
interface-major, then round; an optional side interface (Eve) is used once
and comes last in each group.  Flattening in C order therefore gives the
documented serialization: rows indexed by the input tuple, outputs varying
fastest.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import config
from .numerics import FrequencyVector, QSqrt2, binomial, multinomial

# --- errors -------------------------------------------------------------------


class BoxError(ValueError):
    pass


class NegativeEntryError(BoxError):
    pass


class NormalizationError(BoxError):
    def __init__(self, input_tuple, total):
        super().__init__(f"outputs for input {input_tuple} sum to {total}, not 1")
        self.input_tuple = input_tuple
        self.total = total


class SizeCapError(BoxError):
    pass


class SymmetryError(BoxError):
    def __init__(self, msg, pair=None):
        super().__init__(msg)
        self.pair = pair


# --- scalars ------------------------------------------------------------------

def exact(x):
    """Coerce to an exact scalar (Fraction or QSqrt2); floats are refused."""
    if isinstance(x, (Fraction, QSqrt2)):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"box entries must be exact, got {type(x).__name__}")


def _exact_array(values, shape=None) -> np.ndarray:
    flat = np.asarray(values, dtype=object).ravel()
    out = np.empty(flat.shape, dtype=object)
    for i, v in enumerate(flat):
        out[i] = exact(v)
    return out if shape is None else out.reshape(shape)


def _zero_like_sum(arr: np.ndarray, axis) -> np.ndarray:
    return np.sum(arr, axis=axis, initial=Fraction(0))


# --- alphabets ----------------------------------------------------------------

@dataclass(frozen=True)
class Alphabets:
    """Single-round input/output sizes per interface, plus an optional side
    interface ``eve = (inputs, outputs)`` that is used once, not per round."""

    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    eve: tuple[int, int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(int(v) for v in self.inputs))
        object.__setattr__(self, "outputs", tuple(int(v) for v in self.outputs))
        if self.eve is not None:
            object.__setattr__(self, "eve", (int(self.eve[0]), int(self.eve[1])))
        if len(self.inputs) != len(self.outputs) or not self.inputs:
            raise BoxError("inputs and outputs must list the same interfaces")
        sizes = self.inputs + self.outputs + (self.eve or ())
        if any(s < 1 for s in sizes):
            raise BoxError("all alphabet sizes must be >= 1")

    @property
    def parties(self) -> int:
        return len(self.inputs)

    def with_eve(self, inputs: int, outputs: int) -> Alphabets:
        return Alphabets(self.inputs, self.outputs, (inputs, outputs))

    def without_eve(self) -> Alphabets:
        return Alphabets(self.inputs, self.outputs)

    def x_shape(self, n: int) -> tuple[int, ...]:
        shape = tuple(s for s in self.inputs for _ in range(n))
        return shape + ((self.eve[0],) if self.eve else ())

    def a_shape(self, n: int) -> tuple[int, ...]:
        shape = tuple(s for s in self.outputs for _ in range(n))
        return shape + ((self.eve[1],) if self.eve else ())

    def size(self, n: int) -> int:
        return math.prod(self.x_shape(n)) * math.prod(self.a_shape(n))


CHSH = Alphabets((2, 2), (2, 2))


def check_size(n: int, alphabets: Alphabets) -> None:
    size = alphabets.size(n)
    if size > config.settings.dense_cap:
        raise SizeCapError(
            f"dense box would have {size} entries (cap {config.settings.dense_cap}); "
            "use the compressed SymBox path")


# --- dense boxes --------------------------------------------------------------

class Box:
    """n-round conditional distribution with exact entries."""

    __slots__ = ("n", "alphabets", "table")

    def __init__(self, n: int, alphabets: Alphabets, table: np.ndarray, validate: bool = True):
        self.n = int(n)
        self.alphabets = alphabets
        shape = alphabets.x_shape(self.n) + alphabets.a_shape(self.n)
        if table.shape != shape:
            table = np.asarray(table, dtype=object).reshape(shape)
        self.table = table
        self.table.flags.writeable = False
        if validate:
            self._validate()

    # layout helpers
    @property
    def n_in_axes(self) -> int:
        return len(self.alphabets.x_shape(self.n))

    @property
    def x_count(self) -> int:
        return math.prod(self.alphabets.x_shape(self.n))

    @property
    def a_count(self) -> int:
        return math.prod(self.alphabets.a_shape(self.n))

    def in_axis(self, party: int, rnd: int) -> int:
        return party * self.n + rnd

    def out_axis(self, party: int, rnd: int) -> int:
        return self.n_in_axes + party * self.n + rnd

    @property
    def eve_axes(self) -> tuple[int, int] | None:
        if self.alphabets.eve is None:
            return None
        k = self.alphabets.parties * self.n
        return k, self.n_in_axes + k

    def matrix(self) -> np.ndarray:
        """(inputs, outputs) view in serialization order."""
        return self.table.reshape(self.x_count, self.a_count)

    def entries(self) -> list:
        return list(self.table.ravel())

    def _validate(self):
        for idx, v in enumerate(self.table.ravel()):
            if not isinstance(v, (Fraction, QSqrt2)):
                raise TypeError(f"entry {idx} is not exact: {v!r}")
            if v < 0:
                raise NegativeEntryError(f"entry {idx} is negative: {v}")
        sums = _zero_like_sum(self.matrix(), axis=1)
        for row, total in enumerate(sums):
            if total != 1:
                x = np.unravel_index(row, self.alphabets.x_shape(self.n))
                raise NormalizationError(tuple(int(i) for i in x), total)

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return (self.n == other.n and self.alphabets == other.alphabets
                and all(p == q for p, q in zip(self.table.ravel(), other.table.ravel())))

    def __hash__(self):
        return hash((self.n, self.alphabets))

    def __repr__(self):
        return f"Box(n={self.n}, alphabets={self.alphabets})"

    def is_rational(self) -> bool:
        return all(not isinstance(v, QSqrt2) or v.is_rational() for v in self.table.ravel())

    def __call__(self, a: Sequence[int], x: Sequence[int]):
        return self.table[tuple(x) + tuple(a)]


def box_new(n: int, alphabets: Alphabets, entries) -> Box:
    """Validated box from entries in serialization order (or a shaped array)."""
    check_size(n, alphabets)
    shape = alphabets.x_shape(n) + alphabets.a_shape(n)
    arr = _exact_array(entries)
    if arr.size != math.prod(shape):
        raise BoxError(f"expected {math.prod(shape)} entries, got {arr.size}")
    return Box(n, alphabets, arr.reshape(shape))


def uniform_box(n: int, alphabets: Alphabets) -> Box:
    check_size(n, alphabets)
    shape = alphabets.x_shape(n) + alphabets.a_shape(n)
    val = Fraction(1, math.prod(alphabets.a_shape(n)))
    return Box(n, alphabets, np.full(shape, val, dtype=object))


def _chsh_wins_single() -> np.ndarray:
    """wins[x, y, a, b] = 1 if a xor b == x*y."""
    w = np.zeros((2, 2, 2, 2), dtype=np.int8)
    for x, y, a, b in itertools.product(range(2), repeat=4):
        w[x, y, a, b] = int((a ^ b) == (x & y))
    return w


def q_box(p) -> Box:
    """Single-round CHSH box winning with probability p, uniformly spread."""
    p = exact(p)
    if p < 0 or p > 1:
        raise BoxError("p must lie in [0, 1]")
    win, lose = p / 2, (1 - p) / 2
    wins = _chsh_wins_single()
    table = np.empty((2, 2, 2, 2), dtype=object)
    for idx in itertools.product(range(2), repeat=4):
        table[idx] = win if wins[idx] else lose
    return Box(1, CHSH, table)


def pr_box() -> Box:
    return q_box(Fraction(1))


def iid_power(box: Box, n: int) -> Box:
    """Independent repetition of ``box`` over n blocks of its rounds."""
    if box.alphabets.eve is not None:
        raise BoxError("iid_power needs a box without a side interface")
    if n < 1:
        raise BoxError("n must be >= 1")
    m = box.n
    total = m * n
    check_size(total, box.alphabets)
    out = box.table
    for _ in range(n - 1):
        out = np.multiply.outer(out, box.table)
    # axes are now [copy][x_{party, round}] [copy][a_{party, round}] interleaved per copy
    P = box.alphabets.parties
    k = P * m  # axes per group per copy
    perm = []
    for group in (0, 1):
        for party in range(P):
            for c in range(n):
                for r in range(m):
                    perm.append(c * 2 * k + group * k + party * m + r)
    return Box(total, box.alphabets, np.transpose(out, perm), validate=False)


def mix(boxes: Sequence[Box], weights: Sequence) -> Box:
    if len(boxes) != len(weights) or not boxes:
        raise BoxError("need matching, non-empty boxes and weights")
    ws = [exact(w) for w in weights]
    if any(w < 0 for w in ws) or sum(ws) != 1:
        raise BoxError("weights must be non-negative and sum to 1")
    first = boxes[0]
    for b in boxes[1:]:
        if b.n != first.n or b.alphabets != first.alphabets:
            raise BoxError("boxes must share shape")
    table = sum((w * b.table for w, b in zip(ws, boxes)), np.zeros_like(first.table))
    return Box(first.n, first.alphabets, table, validate=False)


# --- signalling ---------------------------------------------------------------

@dataclass(frozen=True)
class SignalingWitness:
    unit: str  # e.g. "party 1", "party 0 round 2", "eve"
    x: tuple[int, ...]  # unit input that differs from the all-zero input
    x_ref: tuple[int, ...]
    fixed: tuple[int, ...]  # remaining inputs followed by remaining outputs


def _units(box: Box, per_round: bool):
    P, n = box.alphabets.parties, box.n
    for party in range(P):
        if per_round:
            for r in range(n):
                yield f"party {party} round {r}", [box.in_axis(party, r)], [box.out_axis(party, r)]
        else:
            yield (f"party {party}", [box.in_axis(party, r) for r in range(n)],
                   [box.out_axis(party, r) for r in range(n)])
    if box.eve_axes is not None:
        xi, ai = box.eve_axes
        yield "eve", [xi], [ai]


def _check_units(box: Box, per_round: bool):
    for name, in_axes, out_axes in _units(box, per_round):
        marg = _zero_like_sum(box.table, axis=tuple(out_axes))
        # output axes removed; input axes keep their positions
        moved = np.moveaxis(marg, in_axes, list(range(len(in_axes))))
        unit_shape = moved.shape[: len(in_axes)]
        rest_shape = moved.shape[len(in_axes):]
        flat = moved.reshape(math.prod(unit_shape), -1)
        ref = flat[0]
        for u in range(1, flat.shape[0]):
            row = flat[u]
            for j in range(flat.shape[1]):
                if row[j] != ref[j]:
                    return False, SignalingWitness(
                        unit=name,
                        x=tuple(int(i) for i in np.unravel_index(u, unit_shape)),
                        x_ref=(0,) * len(in_axes),
                        fixed=tuple(int(i) for i in np.unravel_index(j, rest_shape)),
                    )
    return True, None


def is_nonsignaling(box: Box) -> tuple[bool, SignalingWitness | None]:
    """Every party's (and Eve's) output marginal is blind to its own input."""
    if box.alphabets.parties + (box.alphabets.eve is not None) < 2:
        raise BoxError("non-signaling needs at least two interfaces")
    return _check_units(box, per_round=False)


def is_round_nonsignaling(box: Box) -> tuple[bool, SignalingWitness | None]:
    """Non-signaling between parties and also between the rounds of a party."""
    return _check_units(box, per_round=True)


# --- CHSH symmetry ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SymBox:
    """CHSH-symmetric n-round box stored as win-count probabilities p_0..p_n."""

    n: int
    p: tuple

    def __post_init__(self):
        ps = tuple(exact(v) for v in self.p)
        object.__setattr__(self, "p", ps)
        if len(ps) != self.n + 1:
            raise BoxError(f"need {self.n + 1} win-count probabilities, got {len(ps)}")
        if any(v < 0 for v in ps):
            raise NegativeEntryError("win-count probabilities must be >= 0")
        if sum(ps, Fraction(0)) != 1:
            raise NormalizationError((), sum(ps, Fraction(0)))

    def __eq__(self, other):
        if not isinstance(other, SymBox):
            return NotImplemented
        return self.n == other.n and all(a == b for a, b in zip(self.p, other.p))

    def __hash__(self):
        return hash((self.n, tuple(self.p)))

    def entry(self, k: int):
        """P(ab|xy) for any transcript winning exactly k rounds."""
        return self.p[k] / (binomial(self.n, k) * 2**self.n)

    def mirrored(self) -> SymBox:
        return SymBox(self.n, tuple(reversed(self.p)))


def symbox_iid(p, n: int) -> SymBox:
    """Compressed form of q_box(p)^{(x)n}: the Binomial(n, p) pmf."""
    p = exact(p)
    return SymBox(n, tuple(binomial(n, k) * p**k * (1 - p) ** (n - k) for k in range(n + 1)))


def symbox_mix(boxes: Sequence[SymBox], weights: Sequence) -> SymBox:
    ws = [exact(w) for w in weights]
    if any(w < 0 for w in ws) or sum(ws) != 1:
        raise BoxError("weights must be non-negative and sum to 1")
    n = boxes[0].n
    if any(b.n != n for b in boxes):
        raise BoxError("SymBoxes must share n")
    return SymBox(n, tuple(sum((w * b.p[k] for w, b in zip(ws, boxes)), Fraction(0))
                           for k in range(n + 1)))


def _require_chsh(box: Box):
    if box.alphabets != CHSH:
        raise BoxError("CHSH operations need two binary parties and no side interface")


def chsh_wins(n: int) -> np.ndarray:
    """Integer array of won rounds, shaped like an n-round CHSH table."""
    shape = CHSH.x_shape(n) + CHSH.a_shape(n)
    wins = np.zeros(shape, dtype=np.int8)
    single = _chsh_wins_single()
    for r in range(n):
        axes = (r, n + r, 2 * n + r, 3 * n + r)
        view = [1] * (4 * n)
        for ax in axes:
            view[ax] = 2
        # broadcast single-round indicator onto (x_r, y_r, a_r, b_r)
        wins = wins + single.reshape(view)
    return wins


def _groups(box: Box):
    _require_chsh(box)
    wins = chsh_wins(box.n).ravel()
    flat = box.table.ravel()
    return wins, flat


def chsh_violation(box: Box):
    """First pair of flat indices with equal win count and unequal entries."""
    wins, flat = _groups(box)
    first = {}
    for i, (k, v) in enumerate(zip(wins, flat)):
        k = int(k)
        if k not in first:
            first[k] = i
        elif flat[first[k]] != v:
            return first[k], i
    return None


def is_chsh_symmetric(box: Box) -> bool:
    return chsh_violation(box) is None


def sym_from_dense(box: Box) -> SymBox:
    bad = chsh_violation(box)
    if bad is not None:
        raise SymmetryError(f"entries {bad[0]} and {bad[1]} win equally often but differ", bad)
    wins, flat = _groups(box)
    n = box.n
    rep = {}
    for i, k in enumerate(wins):
        rep.setdefault(int(k), flat[i])
    return SymBox(n, tuple(binomial(n, k) * 2**n * rep[k] for k in range(n + 1)))


def dense_from_sym(symbox: SymBox) -> Box:
    n = symbox.n
    check_size(n, CHSH)
    vals = [symbox.entry(k) for k in range(n + 1)]
    wins = chsh_wins(n)
    table = np.empty(wins.shape, dtype=object)
    flat_w = wins.ravel()
    flat_t = table.reshape(-1)
    for i, k in enumerate(flat_w):
        flat_t[i] = vals[k]
    return Box(n, CHSH, table, validate=False)


# --- predicates and frequencies -------------------------------------------------

@dataclass(frozen=True)
class Predicate:
    """w(a, x) in {1..d} on single-round (lumped) symbols; ``table[x][a]``."""

    d: int
    table: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        tab = tuple(tuple(int(v) for v in row) for row in self.table)
        object.__setattr__(self, "table", tab)
        if self.d < 1 or not tab or not tab[0]:
            raise BoxError("predicate needs d >= 1 and a non-empty table")
        width = len(tab[0])
        for row in tab:
            if len(row) != width:
                raise BoxError("predicate table must be rectangular")
            if any(not (1 <= v <= self.d) for v in row):
                raise BoxError(f"predicate values must lie in 1..{self.d}")

    @property
    def inputs(self) -> int:
        return len(self.table)

    @property
    def outputs(self) -> int:
        return len(self.table[0])

    def __call__(self, a: int, x: int) -> int:
        return self.table[x][a]

    def array(self) -> np.ndarray:
        return np.array(self.table, dtype=np.int64)


def chsh_predicate() -> Predicate:
    """Class 1 = won round, class 2 = lost, on lumped symbols x*2+y, a*2+b."""
    rows = []
    for x, y in itertools.product(range(2), repeat=2):
        rows.append(tuple(1 if (a ^ b) == (x & y) else 2
                          for a, b in itertools.product(range(2), repeat=2)))
    return Predicate(2, tuple(rows))


def lump(box: Box) -> Box:
    """Merge the parties of every round into one single-interface symbol."""
    if box.alphabets.eve is not None:
        raise BoxError("lump needs a box without a side interface")
    P, n = box.alphabets.parties, box.n
    if P == 1:
        return box
    perm = [box.in_axis(p, r) for r in range(n) for p in range(P)]
    perm += [box.out_axis(p, r) for r in range(n) for p in range(P)]
    xin = math.prod(box.alphabets.inputs)
    aout = math.prod(box.alphabets.outputs)
    alph = Alphabets((xin,), (aout,))
    table = np.transpose(box.table, perm).reshape(alph.x_shape(n) + alph.a_shape(n))
    return Box(n, alph, table, validate=False)


def freq_w(a: Sequence[int], x: Sequence[int], pred: Predicate) -> FrequencyVector:
    if len(a) != len(x):
        raise BoxError("output and input tuples must have the same length")
    counts = [0] * pred.d
    for ai, xi in zip(a, x):
        counts[pred(ai, xi) - 1] += 1
    return FrequencyVector(tuple(counts))


def class_keys(n: int, pred: Predicate) -> np.ndarray:
    """Integer key of freq^w for every entry of a lumped n-round table.

    key = sum_r k_r (n+1)^(r-1); decode with :func:`decode_key`.
    """
    shape = (pred.inputs,) * n + (pred.outputs,) * n
    base = np.array([(n + 1) ** (c - 1) for c in range(1, pred.d + 1)], dtype=np.int64)
    single = base[pred.array() - 1]  # [x, a] -> (n+1)^(class-1)
    keys = np.zeros(shape, dtype=np.int64)
    for r in range(n):
        view = [1] * (2 * n)
        view[r] = pred.inputs
        view[n + r] = pred.outputs
        keys = keys + single.reshape(view)
    return keys


def decode_key(key: int, n: int, d: int) -> tuple[int, ...]:
    out = []
    for _ in range(d):
        out.append(int(key % (n + 1)))
        key //= n + 1
    return tuple(out)


def _lumped_for(box: Box, pred: Predicate) -> Box:
    lb = lump(box)
    if lb.alphabets.inputs[0] != pred.inputs or lb.alphabets.outputs[0] != pred.outputs:
        raise BoxError("predicate alphabet does not match the box")
    return lb


def is_w_symmetric(box: Box, pred: Predicate) -> bool:
    """Entries agree whenever their predicate frequencies agree."""
    lb = _lumped_for(box, pred)
    keys = class_keys(lb.n, pred).ravel()
    seen = {}
    for k, v in zip(keys, lb.table.ravel()):
        k = int(k)
        if k in seen:
            if seen[k] != v:
                return False
        else:
            seen[k] = v
    return True


def class_values(box: Box, pred: Predicate) -> dict[tuple[int, ...], object]:
    """Entry value per realized class-count vector of a w-symmetric box."""
    lb = _lumped_for(box, pred)
    keys = class_keys(lb.n, pred).ravel()
    out = {}
    for k, v in zip(keys, lb.table.ravel()):
        counts = decode_key(int(k), lb.n, pred.d)
        if counts in out and out[counts] != v:
            raise SymmetryError(f"box is not w-symmetric at counts {counts}")
        out[counts] = v
    return out


# --- input distributions and statistics ---------------------------------------------

@dataclass(frozen=True)
class InputDist:
    """iid product of a single-round input distribution (lumped symbols)."""

    n: int
    mu: tuple

    def __post_init__(self):
        mu = tuple(exact(v) for v in self.mu)
        object.__setattr__(self, "mu", mu)
        if any(v < 0 for v in mu) or sum(mu, Fraction(0)) != 1:
            raise BoxError("mu must be a probability vector")

    @classmethod
    def uniform(cls, n: int, size: int) -> InputDist:
        return cls(n, (Fraction(1, size),) * size)


def _input_weights(n: int, parties_shape: tuple[int, ...], mu: Sequence) -> np.ndarray:
    """mu^{(x)n} laid out over per-party per-round input axes (interface-major)."""
    P = len(parties_shape)
    mu_arr = np.array(list(mu), dtype=object).reshape(parties_shape)
    out = np.array(Fraction(1), dtype=object)
    for r in range(n):
        view = [1] * (P * n)
        for p in range(P):
            view[p * n + r] = parties_shape[p]
        out = out * mu_arr.reshape(view)
    return out


def win_distribution(box: Box, mu: InputDist) -> tuple:
    """Pr[K = k] for k = 0..n under inputs drawn from mu^{(x)n}."""
    _require_chsh(box)
    n = box.n
    if mu.n != n or len(mu.mu) != 4:
        raise BoxError("mu must be a distribution over the four (x, y) pairs")
    weight = _input_weights(n, (2, 2), mu.mu)
    weight = weight.reshape(weight.shape + (1,) * (2 * n))
    joint = (box.table * weight).ravel()
    wins = chsh_wins(n).ravel()
    dist = [Fraction(0)] * (n + 1)
    for k, v in zip(wins, joint):
        dist[k] = dist[k] + v
    dist = tuple(dist)
    if is_chsh_symmetric(box):
        sym = sym_from_dense(box).p
        if dist != sym:
            raise AssertionError("win distribution of a CHSH-symmetric box depends on mu")
    return dist


def marginal_first_k(symbox: SymBox, k: int) -> SymBox:
    """Win-count distribution of the first k rounds (hypergeometric mixing)."""
    n = symbox.n
    if not (1 <= k <= n):
        raise BoxError("need 1 <= k <= n")
    total = binomial(n, k)
    q = []
    for j in range(k + 1):
        acc = Fraction(0)
        for N, pN in enumerate(symbox.p):
            if pN == 0 or j > N or k - j > n - N:
                continue
            acc = acc + pN * Fraction(math.comb(N, j) * math.comb(n - N, k - j), total)
        q.append(acc)
    return SymBox(k, tuple(q))


def marginal_rounds(box: Box, k: int) -> Box:
    """Keep the first k rounds of every party; dropped inputs are fixed to 0."""
    if box.alphabets.eve is not None:
        raise BoxError("marginal_rounds needs a box without a side interface")
    n, P = box.n, box.alphabets.parties
    if not (1 <= k <= n):
        raise BoxError("need 1 <= k <= n")
    drop_out = tuple(box.out_axis(p, r) for p in range(P) for r in range(k, n))
    summed = _zero_like_sum(box.table, axis=drop_out)
    # output axes are gone, so input axes are still at their original positions
    index = tuple(0 if (ax % n) >= k else slice(None) for ax in range(P * n))
    table = summed[index]
    return Box(k, box.alphabets, table, validate=False)


# --- distances ------------------------------------------------------------------

def box_distance(P: Box, Q: Box):
    """max over inputs of the l1 distance between output distributions."""
    if P.n != Q.n or P.alphabets != Q.alphabets:
        raise BoxError("boxes must share shape")
    diff = P.matrix() - Q.matrix()
    best = Fraction(0)
    for row in diff:
        s = sum((abs(v) for v in row), Fraction(0))
        if s > best:
            best = s
    return best


def symbox_distance(P: SymBox, Q: SymBox):
    if P.n != Q.n:
        raise BoxError("SymBoxes must share n")
    return sum((abs(a - b) for a, b in zip(P.p, Q.p)), Fraction(0))


# --- predicate-symmetric boxes in compressed form -----------------------------------

def class_masses(pred: Predicate, mu: Sequence) -> tuple:
    """m_r = sum over (a, x) with w(a, x) = r of mu(x)."""
    if len(mu) != pred.inputs:
        raise BoxError("mu must cover the predicate's inputs")
    m = [Fraction(0)] * pred.d
    for x, row in enumerate(pred.table):
        for c in row:
            m[c - 1] = m[c - 1] + exact(mu[x])
    return tuple(m)


def compositions(n: int, d: int):
    """All count vectors of length d summing to n."""
    if d == 1:
        yield (n,)
        return
    for k in range(n + 1):
        for rest in compositions(n - k, d - 1):
            yield (k,) + rest


@dataclass(frozen=True, eq=False)
class ClassBox:
    """w-symmetric n-round box stored as one entry per class-count vector.

    ``values[counts]`` is P(a|x) for any transcript with those counts.  Only
    non-negativity is validated here; normalization is the caller's
    responsibility (it holds for boxes built from a validated dense box or
    SymBox).
    """

    n: int
    pred: Predicate
    values: dict

    def __post_init__(self):
        vals = {tuple(int(c) for c in k): exact(v) for k, v in self.values.items()}
        for k, v in vals.items():
            if len(k) != self.pred.d or sum(k) != self.n:
                raise BoxError(f"bad class counts {k}")
            if v < 0:
                raise NegativeEntryError(f"negative entry at counts {k}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_symbox(cls, symbox: SymBox) -> ClassBox:
        n = symbox.n
        return cls(n, chsh_predicate(), {(k, n - k): symbox.entry(k) for k in range(n + 1)})

    @classmethod
    def from_box(cls, box: Box, pred: Predicate) -> ClassBox:
        return cls(box.n, pred, class_values(box, pred))

    def entry(self, counts) -> object:
        return self.values.get(tuple(counts), Fraction(0))

    def freq_prob(self, counts, mu: Sequence):
        """Pr[freq^w = counts/n] under inputs drawn from mu^{(x)n}."""
        counts = tuple(counts)
        v = self.entry(counts)
        if v == 0:
            return Fraction(0)
        m = class_masses(self.pred, mu)
        out = v * multinomial(self.n, counts)
        for k, mr in zip(counts, m):
            out = out * mr**k
        return out

    def freq_distribution(self, mu: Sequence) -> dict:
        return {k: self.freq_prob(k, mu) for k in self.values}


def freq_distribution(box: Box, pred: Predicate, mu: Sequence) -> dict:
    """Pr[freq^w = k/n] for every realized count vector k, by enumeration."""
    lb = _lumped_for(box, pred)
    n = lb.n
    weight = _input_weights(n, (pred.inputs,), [exact(v) for v in mu])
    weight = weight.reshape(weight.shape + (1,) * n)
    joint = (lb.table * weight).ravel()
    keys = class_keys(n, pred).ravel()
    acc: dict = {}
    for k, v in zip(keys, joint):
        if v != 0:
            k = int(k)
            acc[k] = acc.get(k, Fraction(0)) + v
    return {decode_key(k, n, pred.d): v for k, v in acc.items()}


def as_class_box(obj, pred: Predicate | None = None) -> ClassBox:
    if isinstance(obj, ClassBox):
        return obj
    if isinstance(obj, SymBox):
        return ClassBox.from_symbox(obj)
    if isinstance(obj, Box):
        return ClassBox.from_box(obj, pred or chsh_predicate())
    raise TypeError(f"cannot compress {type(obj).__name__}")
