"""Exact scalars, entropy functionals and combinatorial identities.

Rationals are :class:`fractions.Fraction`.  Elements of Q(sqrt 2) are
:class:`QSqrt2`, which interoperates with ``int`` and ``Fraction`` and
compares exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from typing import Callable, Sequence, Union

import mpmath
import numpy as np
from scipy.optimize import minimize_scalar

from . import config

Rational = Fraction


class DomainError(ValueError):
    """Arguments outside the domain of a combinatorial function."""


class SupportError(ValueError):
    """Relative entropy with f_r > 0 where g_r = 0."""


class ConcavityWarning(UserWarning):
    pass


class PreconditionError(ValueError):
    """An input falls outside the hypotheses of the bound being checked."""

    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


@total_ordering
class QSqrt2:
    """The number a + b*sqrt(2) with rational a, b."""

    __slots__ = ("a", "b")

    def __init__(self, a=0, b=0):
        self.a = _frac(a)
        self.b = _frac(b)

    @classmethod
    def coerce(cls, x) -> QSqrt2:
        if isinstance(x, QSqrt2):
            return x
        return cls(x, 0)

    def __repr__(self):
        return f"QSqrt2({self.a}, {self.b})"

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        return f"{self.a}{'+' if self.b > 0 else '-'}{abs(self.b)}*sqrt(2)"

    def sign(self) -> int:
        a, b = self.a, self.b
        if a >= 0 and b >= 0:
            return 0 if (a == 0 and b == 0) else 1
        if a <= 0 and b <= 0:
            return -1
        # mixed signs: compare a^2 with 2 b^2
        d = a * a - 2 * b * b
        if a > 0:
            return 1 if d > 0 else -1
        return 1 if d < 0 else -1

    def is_rational(self) -> bool:
        return self.b == 0

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.b == 0 and self.a == other
        if isinstance(other, QSqrt2):
            return self.a == other.a and self.b == other.b
        return NotImplemented

    def __hash__(self):
        return hash(self.a) if self.b == 0 else hash((self.a, self.b))

    def __lt__(self, other):
        if isinstance(other, (int, Fraction, QSqrt2)):
            return (self - other).sign() < 0
        return NotImplemented

    def __add__(self, other):
        if isinstance(other, QSqrt2):
            return QSqrt2(self.a + other.a, self.b + other.b)
        if isinstance(other, (int, Fraction)):
            return QSqrt2(self.a + other, self.b)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return QSqrt2(-self.a, -self.b)

    def __pos__(self):
        return self

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __sub__(self, other):
        if isinstance(other, (int, Fraction, QSqrt2)):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, QSqrt2):
            return QSqrt2(self.a * other.a + 2 * self.b * other.b,
                          self.a * other.b + self.b * other.a)
        if isinstance(other, (int, Fraction)):
            return QSqrt2(self.a * other, self.b * other)
        return NotImplemented

    __rmul__ = __mul__

    def conjugate(self) -> QSqrt2:
        return QSqrt2(self.a, -self.b)

    def norm(self) -> Fraction:
        return self.a * self.a - 2 * self.b * self.b

    def inverse(self) -> QSqrt2:
        nrm = self.norm()
        if nrm == 0:
            raise ZeroDivisionError("QSqrt2 division by zero")
        return QSqrt2(self.a / nrm, -self.b / nrm)

    def __truediv__(self, other):
        if isinstance(other, QSqrt2):
            return self * other.inverse()
        if isinstance(other, (int, Fraction)):
            return QSqrt2(self.a / other, self.b / other)
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.inverse() * other
        return NotImplemented

    def __pow__(self, e: int):
        if not isinstance(e, int):
            return NotImplemented
        if e < 0:
            return self.inverse() ** (-e)
        result, base = QSqrt2(1), self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def __float__(self):
        return float(self.to_mpf(80))

    def to_mpf(self, bits: int | None = None):
        bits = bits or config.settings.mp_bits
        with mpmath.workprec(bits):
            a = mpmath.mpf(self.a.numerator) / self.a.denominator
            b = mpmath.mpf(self.b.numerator) / self.b.denominator
            return +(a + b * mpmath.sqrt(2))


Scalar = Union[int, Fraction, QSqrt2]

SQRT2 = QSqrt2(0, 1)
#: quantum value of the CHSH game, (2 + sqrt 2)/4
W = QSqrt2(Fraction(1, 2), Fraction(1, 4))
ONE_MINUS_W = 1 - W
#: prefactor of the marginal de Finetti bound, 2/sqrt(2 - sqrt 2); not in Q(sqrt 2)
C_MARGINAL = 2.0 / math.sqrt(2.0 - math.sqrt(2.0))


def to_mpf(x, bits: int | None = None):
    """High-precision float of an exact scalar."""
    bits = bits or config.settings.mp_bits
    if isinstance(x, QSqrt2):
        return x.to_mpf(bits)
    with mpmath.workprec(bits):
        if isinstance(x, Fraction):
            return mpmath.mpf(x.numerator) / x.denominator
        return mpmath.mpf(x)


def exact_sign(x) -> int:
    if isinstance(x, QSqrt2):
        return x.sign()
    return (x > 0) - (x < 0)


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction, QSqrt2))


@dataclass(frozen=True)
class FrequencyVector:
    """Class counts (k_1, ..., k_d) of an n-round transcript."""

    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(k) for k in self.counts))
        if not self.counts:
            raise DomainError("frequency vector needs d >= 1 classes")
        if any(k < 0 for k in self.counts):
            raise DomainError(f"negative count in {self.counts}")

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def d(self) -> int:
        return len(self.counts)

    def frequencies(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(k, self.n) for k in self.counts)


def _as_counts(counts) -> tuple[int, ...]:
    if isinstance(counts, FrequencyVector):
        return counts.counts
    return FrequencyVector(tuple(counts)).counts


# --- entropy ---------------------------------------------------------------

def rel_entropy(f: Sequence, g: Sequence, bits: int | None = None):
    """Relative entropy sum_r f_r ln(f_r/g_r) in nats, with 0 ln(0/g) = 0.

    Returns a float, or an mpmath value when ``bits`` is given.
    """
    if len(f) != len(g):
        raise DomainError("f and g must have equal length")
    for fr, gr in zip(f, g):
        if fr < 0 or gr < 0:
            raise DomainError("negative probability")
        if fr > 0 and gr == 0:
            raise SupportError(f"f_r = {fr} > 0 where g_r = 0")
    if bits is None:
        total = 0.0
        for fr, gr in zip(f, g):
            if fr > 0:
                fr, gr = float(fr), float(gr)
                total += fr * math.log(fr / gr)
        return total
    with mpmath.workprec(bits):
        total = mpmath.mpf(0)
        for fr, gr in zip(f, g):
            if fr > 0:
                a, b = to_mpf(fr, bits), to_mpf(gr, bits)
                total += a * mpmath.log(a / b)
        return total


def exact_exp_neg_nD(counts, g: Sequence):
    """exp(-n D(k/n || g)) = prod_r (n g_r / k_r)^{k_r}, exactly.

    ``g`` may hold Fractions or QSqrt2 values.
    """
    ks = _as_counts(counts)
    if len(ks) != len(g):
        raise DomainError("counts and g must have equal length")
    n = sum(ks)
    out = Fraction(1)
    for k, gr in zip(ks, g):
        if k == 0:
            continue
        if gr == 0:
            raise SupportError(f"count {k} > 0 where g_r = 0")
        out = out * (gr * Fraction(n, k)) ** k
    return out


# --- combinatorics ----------------------------------------------------------

def binomial(n: int, k: int) -> int:
    if not (0 <= k <= n):
        raise DomainError(f"binomial({n}, {k}) undefined")
    return math.comb(n, k)


def multinomial(n: int, counts) -> int:
    ks = _as_counts(counts)
    if sum(ks) != n:
        raise DomainError(f"counts {ks} do not sum to {n}")
    out, rest = 1, n
    for k in ks:
        out *= math.comb(rest, k)
        rest -= k
    return out


def multinomial_sandwich(n: int, counts) -> tuple[Fraction, int, Fraction]:
    """(lower, multinomial, upper) with the polynomial sandwich bounds.

    upper = prod (n/k_r)^{k_r}, lower = upper / (n+1)^{d-1}.
    """
    ks = _as_counts(counts)
    value = multinomial(n, ks)
    upper = Fraction(1)
    for k in ks:
        if k:
            upper *= Fraction(n, k) ** k
    lower = upper / Fraction(n + 1) ** (len(ks) - 1)
    if not (lower <= value <= upper):
        raise AssertionError(f"sandwich violated for n={n}, counts={ks}")
    return lower, value, upper


def _antiderivative(n: int, k: int) -> list[tuple[int, Fraction]]:
    """Monomials (power, coeff) of an antiderivative of t^k (1-t)^(n-k)."""
    m = n - k
    return [(k + j + 1, Fraction((-1) ** j * math.comb(m, j), k + j + 1))
            for j in range(m + 1)]


def _eval_poly(terms, t):
    total = 0
    for power, coeff in terms:
        total = total + coeff * t**power
    return total


def beta_identity(n: int, k: int) -> Fraction:
    """int_0^1 t^k (1-t)^(n-k) dt, by closed form and by expansion."""
    closed = Fraction(1, (n + 1) * binomial(n, k))
    expanded = _eval_poly(_antiderivative(n, k), Fraction(1))
    if closed != expanded:
        raise AssertionError(f"Beta identity mismatch at n={n}, k={k}")
    return closed


def incomplete_beta_qsqrt2(n: int, k: int) -> QSqrt2:
    """int_{1-w}^{w} p^k (1-p)^(n-k) dp as an exact element of Q(sqrt 2)."""
    binomial(n, k)
    terms = _antiderivative(n, k)
    return QSqrt2.coerce(_eval_poly(terms, W) - _eval_poly(terms, ONE_MINUS_W))


def quad_mp(fn: Callable, a, b, bits: int | None = None):
    """Arbitrary-precision quadrature; used as an independent oracle."""
    bits = bits or config.settings.mp_bits
    with mpmath.workprec(bits):
        return mpmath.quad(fn, [to_mpf(a, bits), to_mpf(b, bits)])


# --- integral sandwich --------------------------------------------------------

@dataclass(frozen=True)
class SandwichReport:
    lower: float
    integral: float
    upper: float
    x_star: float
    holds: bool
    concave: bool


def _argmax(f: Callable[[float], float], a: float, b: float) -> float:
    grid = np.linspace(a, b, 1024)
    vals = np.array([f(x) for x in grid])
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    best = grid[i]
    if hi > lo:
        res = minimize_scalar(lambda x: -f(x), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        if f(res.x) >= vals[i]:
            best = res.x
    return float(best)


def integral_sandwich_check(f: Callable[[float], float], a: float, b: float, n: int,
                            quadrature_points: int = 200, tol: float | None = None
                            ) -> SandwichReport:
    """Check (b-a) f(x*)^n / (n+1) <= int_a^b f^n <= (b-a) f(x*)^n.

    ``f`` is assumed concave and non-negative on [a, b]; sampled second
    differences that are clearly positive raise a ConcavityWarning.
    """
    a, b = float(a), float(b)
    if not a < b:
        raise DomainError("need a < b")
    if n < 1:
        raise DomainError("need n >= 1")
    tol = config.settings.tol if tol is None else tol

    xs = np.linspace(a, b, 257)
    ys = np.array([f(x) for x in xs])
    second = ys[:-2] - 2 * ys[1:-1] + ys[2:]
    scale = max(1.0, float(np.max(np.abs(ys))))
    concave = bool(np.all(second <= tol * scale))
    if not concave:
        warnings.warn("sampled function is not concave", ConcavityWarning, stacklevel=2)

    nodes, weights = np.polynomial.legendre.leggauss(quadrature_points)
    half = (b - a) / 2
    pts = half * nodes + (a + b) / 2
    integral = float(half * np.sum(weights * np.array([f(x) ** n for x in pts])))

    x_star = _argmax(f, a, b)
    peak = f(x_star) ** n
    upper = (b - a) * peak
    lower = upper / (n + 1)
    slack = tol * max(1.0, upper)
    holds = lower - slack <= integral <= upper + slack
    return SandwichReport(lower, integral, upper, x_star, holds, concave)


# --- Pinsker ------------------------------------------------------------------

@dataclass(frozen=True)
class PinskerReport:
    l1: float
    divergence: float
    pinsker: bool  # l1 <= sqrt(2 D)
    reverse: bool  # 2 D <= l1^2 / min(q, 1-q)
    reverse_weak: bool  # D <= l1^2 / min(q, 1-q)


def pinsker_pair_check(p, q) -> PinskerReport:
    """Pinsker and reverse Pinsker for Bernoulli(p) against Bernoulli(q)."""
    if not (0 < p < 1 and 0 < q < 1):
        raise DomainError("p, q must lie in (0, 1)")
    tol = config.settings.tol
    l1 = 2 * abs(float(p) - float(q))
    D = rel_entropy((p, 1 - p), (q, 1 - q))
    m = min(float(q), 1 - float(q))
    return PinskerReport(
        l1=l1,
        divergence=D,
        pinsker=l1 <= math.sqrt(2 * D) * (1 + tol) + tol,
        reverse=2 * D <= l1 * l1 / m * (1 + tol) + tol,
        reverse_weak=D <= l1 * l1 / m * (1 + tol) + tol,
    )
