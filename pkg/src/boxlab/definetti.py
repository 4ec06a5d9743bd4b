"""De Finetti boxes and certificates that a box is bounded by them.

The CHSH box tau is the uniform mixture of Q(p)^{(x)n} over p in
[1 - w, w].  Its win-count weights are incomplete Beta integrals, which are
exact elements of Q(sqrt 2), so the entrywise bound P <= (n+1)^2 tau is
decided without rounding.  The marginal bound compares the first k rounds
of a box with a mixture of clamped iid boxes.  The general path replaces
the interval by a polytope of single-round boxes and the integral by a
midpoint grid.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import flint
import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import config
from .boxes import (Box, BoxError, ClassBox, Predicate, SymBox, SymmetryError, as_class_box,
                    chsh_predicate, class_masses, compositions, freq_distribution,
                    is_w_symmetric, marginal_first_k, sym_from_dense, symbox_distance,
                    symbox_iid, symbox_mix)
from .numerics import (C_MARGINAL, ONE_MINUS_W, W, DomainError, PreconditionError, QSqrt2,
                       binomial, incomplete_beta_qsqrt2, multinomial, to_mpf)
from .threshold import FrequencySet, check_chsh_threshold, premise_slack

TWO_W_MINUS_ONE = 2 * W - 1


@dataclass(frozen=True)
class Certificate:
    name: str
    prefactor: object
    worst_ratio: object  # max of lhs / (prefactor * rhs); pass iff <= 1
    witness: object  # where the worst ratio occurs
    passed: bool
    rows: tuple = ()  # (location, lhs, prefactor * rhs)
    notes: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"


def _certify(name: str, prefactor, pairs) -> Certificate:
    """pairs: (location, lhs, rhs) with the bound lhs <= prefactor * rhs."""
    rows, worst, witness = [], None, None
    for loc, lhs, rhs in pairs:
        bound = prefactor * rhs
        rows.append((loc, lhs, bound))
        if lhs == 0:
            ratio = Fraction(0)
        elif bound == 0:
            return Certificate(name, prefactor, math.inf, loc, False, tuple(rows))
        else:
            ratio = lhs / bound
        if worst is None or ratio > worst:
            worst, witness = ratio, loc
    worst = Fraction(0) if worst is None else worst
    return Certificate(name, prefactor, worst, witness, worst <= 1, tuple(rows))


# --- the CHSH de Finetti box -------------------------------------------------------------

@lru_cache(maxsize=None)
def tau_chsh(n: int) -> SymBox:
    """Win-count weights of the uniform mixture of Q(p)^{(x)n}, p in [1-w, w]."""
    if n < 1:
        raise DomainError("need n >= 1")
    inv = TWO_W_MINUS_ONE.inverse()
    return SymBox(n, tuple(binomial(n, k) * incomplete_beta_qsqrt2(n, k) * inv
                           for k in range(n + 1)))


def clamp_w(p):
    """Clamp into [1 - w, w], exactly."""
    if p < ONE_MINUS_W:
        return ONE_MINUS_W
    if p > W:
        return W
    return p


def score_sup(n: int, k: int):
    """sup over p in [1-w, w] of 2^-n p^k (1-p)^(n-k)."""
    if not (0 <= k <= n) or n < 1:
        raise DomainError("need 0 <= k <= n, n >= 1")
    p = clamp_w(Fraction(k, n))
    return Fraction(1, 2**n) * p**k * (1 - p) ** (n - k)


def _as_symbox(P) -> SymBox:
    if isinstance(P, SymBox):
        return P
    if isinstance(P, Box):
        try:
            return sym_from_dense(P)
        except SymmetryError as e:
            raise PreconditionError(f"box is not CHSH symmetric: {e}", e.pair) from e
    raise TypeError(f"expected SymBox or Box, got {type(P).__name__}")


def certify_first_definetti(P, check_threshold: bool = True) -> Certificate:
    """P(ab|xy) <= (n+1)^2 tau(ab|xy) for every entry.

    Entries sharing a win count share the multiplicity binom(n,k) 2^n on
    both sides, so the check runs on win-count weights.  The threshold
    premise is checked first; a box that fails it is rejected, not passed.
    """
    sym = _as_symbox(P)
    n = sym.n
    if check_threshold:
        rep = check_chsh_threshold(sym)
        if not rep.passed:
            raise PreconditionError(f"threshold premise fails at k={rep.worst.k}", rep.worst)
    tau = tau_chsh(n)
    return _certify("first", (n + 1) ** 2,
                    ((k, sym.p[k], tau.p[k]) for k in range(n + 1)))


# --- the marginal (second) de Finetti bound ---------------------------------------------------

def tau_second(P: SymBox, k: int) -> SymBox:
    """sum_N p_N Q(clamp(N/n))^{(x)k} in win-count form."""
    n = P.n
    if not (1 <= k <= n):
        raise DomainError("need 1 <= k <= n")
    parts, weights = [], []
    for N, pN in enumerate(P.p):
        if pN != 0:
            parts.append(symbox_iid(clamp_w(Fraction(N, n)), k))
            weights.append(pN)
    return symbox_mix(parts, weights)


def second_rhs(n: int, k: int) -> float:
    """(C sqrt(ln(n/k)) + 4) sqrt(k/n) + 4k/n."""
    return (C_MARGINAL * math.sqrt(math.log(n / k)) + 4) * math.sqrt(k / n) + 4 * k / n


@dataclass(frozen=True)
class BoundReport:
    lhs: object
    rhs: object
    passed: bool

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"


def certify_second_definetti(P: SymBox, k: int, tol: float | None = None) -> BoundReport:
    tol = config.settings.tol if tol is None else tol
    lhs = symbox_distance(marginal_first_k(P, k), tau_second(P, k))
    rhs = second_rhs(P.n, k)
    return BoundReport(lhs, rhs, float(to_mpf(lhs)) <= rhs * (1 + tol))


def binomial_pmf(k: int, p) -> tuple:
    return tuple(binomial(k, j) * p**j * (1 - p) ** (k - j) for j in range(k + 1))


def diaconis_freedman_check(P: SymBox, k: int) -> BoundReport:
    """Sampling k of n without replacement vs with replacement: l1 <= 4k/n."""
    n = P.n
    hyp = marginal_first_k(P, k).p
    mixed = [Fraction(0)] * (k + 1)
    for N, pN in enumerate(P.p):
        if pN != 0:
            for j, v in enumerate(binomial_pmf(k, Fraction(N, n))):
                mixed[j] += pN * v
    lhs = sum((abs(a - b) for a, b in zip(hyp, mixed)), Fraction(0))
    rhs = Fraction(4 * k, n)
    return BoundReport(lhs, rhs, lhs <= rhs)


def binom_l1_bound_check(k: int, p, q) -> BoundReport:
    """||Binom(k,p) - Binom(k,q)||_1 <= 2 sqrt(k / min(q, 1-q)) |p - q|.

    Both sides are compared through their squares, so the check is exact.
    The reported rhs is a float.
    """
    p, q = Fraction(p), Fraction(q)
    if not (0 < p < 1 and 0 < q < 1) or k < 1:
        raise DomainError("need k >= 1 and p, q in (0, 1)")
    lhs = sum((abs(a - b) for a, b in zip(binomial_pmf(k, p), binomial_pmf(k, q))), Fraction(0))
    m = min(q, 1 - q)
    rhs_sq = 4 * k * (p - q) ** 2 / m
    return BoundReport(lhs, 2 * math.sqrt(k / float(m)) * abs(float(p - q)), lhs * lhs <= rhs_sq)


def c_prime_table(log_ratios: Sequence[float] = (0.0, 10.0, 100.0)) -> list[tuple[float, float, float]]:
    """Diagnostic: the constant C' = 2 C b + 4 exp(-2 b^2 - 2 b sqrt(L)) minimized
    over the shift b of the cut, for L = ln(n/k).  Rows are (L, b, C')."""
    out = []
    for L in log_ratios:
        s = math.sqrt(L)

        def cp(b, s=s):
            return 2 * C_MARGINAL * b + 4 * math.exp(-2 * b * b - 2 * b * s)

        res = minimize_scalar(cp, bounds=(-s / 2, 10.0), method="bounded",
                              options={"xatol": 1e-12})
        b = float(res.x)
        if cp(0.0) <= res.fun:
            b = 0.0
        out.append((L, b, cp(b)))
    return out


# --- general predicates ---------------------------------------------------------------

Table = tuple  # [x][a] of exact scalars


def _table(rows) -> Table:
    from .boxes import exact

    return tuple(tuple(exact(v) for v in row) for row in rows)


@dataclass(frozen=True)
class ConvexFamily:
    """Single-round boxes Q_phi = base + sum_i phi_i directions[i], with phi
    ranging over the axis-aligned box prod_i [lower_i, upper_i]."""

    base: Table
    directions: tuple[Table, ...] = ()
    lower: tuple = ()
    upper: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "base", _table(self.base))
        object.__setattr__(self, "directions", tuple(_table(t) for t in self.directions))
        object.__setattr__(self, "lower", tuple(self.lower))
        object.__setattr__(self, "upper", tuple(self.upper))
        dp = len(self.directions)
        if len(self.lower) != dp or len(self.upper) != dp:
            raise DomainError("domain bounds must match the number of directions")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise DomainError("empty or degenerate parameter interval")
        shape = (len(self.base), len(self.base[0]))
        for t in self.directions:
            if (len(t), len(t[0])) != shape:
                raise DomainError("direction shape differs from base")
        for phi in self.corners():
            Q = self.box_at(phi)
            for row in Q:
                if any(v < 0 for v in row) or sum(row, Fraction(0)) != 1:
                    raise DomainError(f"Q at {phi} is not a valid box")
        if dp and self._rank() != dp:
            raise DomainError("directions are linearly dependent")

    def _rank(self) -> int:
        vals = [v for t in self.directions for row in t for v in row]
        if any(isinstance(v, QSqrt2) and not v.is_rational() for v in vals):
            M = np.array([[float(v) for row in t for v in row] for t in self.directions])
            return int(np.linalg.matrix_rank(M))
        cols = len(self.base) * len(self.base[0])
        flat = []
        for v in vals:
            v = v.a if isinstance(v, QSqrt2) else v
            flat.append(flint.fmpq(v.numerator, v.denominator))
        return flint.fmpq_mat(len(self.directions), cols, flat).rank()

    @classmethod
    def chsh(cls) -> ConvexFamily:
        """Q(p) for p in [1-w, w] on lumped symbols x*2+y, a*2+b."""
        pred = chsh_predicate()
        base = [[Fraction(0) if c == 1 else Fraction(1, 2) for c in row] for row in pred.table]
        d = [[Fraction(1, 2) if c == 1 else Fraction(-1, 2) for c in row] for row in pred.table]
        return cls(base, (d,), (ONE_MINUS_W,), (W,))

    @classmethod
    def singleton(cls, table) -> ConvexFamily:
        return cls(table)

    @property
    def d_prime(self) -> int:
        return len(self.directions)

    @property
    def inputs(self) -> int:
        return len(self.base)

    @property
    def outputs(self) -> int:
        return len(self.base[0])

    def corners(self):
        return list(itertools.product(*zip(self.lower, self.upper)))

    def box_at(self, phi) -> Table:
        rows = []
        for x, brow in enumerate(self.base):
            row = []
            for a, v in enumerate(brow):
                for p, t in zip(phi, self.directions):
                    v = v + p * t[x][a]
                row.append(v)
            rows.append(tuple(row))
        return tuple(rows)

    def grid(self, g: int) -> list[tuple]:
        """Midpoints of a g^d' grid over the domain."""
        axes = []
        for lo, hi in zip(self.lower, self.upper):
            h = (hi - lo) * Fraction(1, g)
            axes.append([lo + h * Fraction(2 * j + 1, 2) for j in range(g)])
        return list(itertools.product(*axes))

    def is_w_symmetric(self, pred: Predicate) -> bool:
        for phi in self.corners():
            Q = self.box_at(phi)
            seen = {}
            for x, row in enumerate(Q):
                for a, v in enumerate(row):
                    c = pred(a, x)
                    if seen.setdefault(c, v) != v:
                        return False
        return True

    def class_values(self, phi, pred: Predicate) -> tuple:
        """Per-class single-round entry of Q_phi (w-symmetric families).

        Classes that no (a, x) realizes get value 0.
        """
        Q = self.box_at(phi)
        vals = [Fraction(0)] * pred.d
        for x, row in enumerate(Q):
            for a, v in enumerate(row):
                vals[pred(a, x) - 1] = v
        return tuple(vals)


def expected_freq_set(family: ConvexFamily, mu: Sequence, pred: Predicate) -> FrequencySet:
    """Image of the family under Q -> (sum_{w(a,x)=r} Q(a|x) mu(x))_r."""
    if len(mu) != family.inputs or pred.inputs != family.inputs or pred.outputs != family.outputs:
        raise DomainError("family, predicate and mu disagree on alphabets")
    verts = []
    for phi in family.corners():
        Q = family.box_at(phi)
        f = [Fraction(0)] * pred.d
        for x, row in enumerate(Q):
            for a, v in enumerate(row):
                f[pred(a, x) - 1] = f[pred(a, x) - 1] + v * mu[x]
        verts.append(tuple(f))
    uniq = list(dict.fromkeys(verts))
    return FrequencySet(tuple(uniq))


@dataclass(frozen=True)
class GridDiagnostic:
    min_ratio: float  # min over classes of tau * binom(n+d', d') / sup_phi Q_phi^{(x)n}
    at: tuple
    grid: int
    error_bar: float  # max relative change of tau entries between grid g and g/2


@dataclass(frozen=True)
class GeneralTau:
    tau: ClassBox
    grid: int
    diagnostic: GridDiagnostic | None


def _grid_tau(family: ConvexFamily, n: int, g: int, pred: Predicate) -> dict:
    classes = list(compositions(n, pred.d))
    acc = {c: Fraction(0) for c in classes}
    pts = family.grid(g) if family.d_prime else [()]
    for phi in pts:
        q = family.class_values(phi, pred)
        powers = [[Fraction(1)] for _ in q]
        for r, v in enumerate(q):
            for _ in range(n):
                powers[r].append(powers[r][-1] * v)
        for c in classes:
            term = powers[0][c[0]]
            for r in range(1, len(c)):
                term = term * powers[r][c[r]]
            acc[c] = acc[c] + term
    inv = Fraction(1, len(pts))
    return {c: v * inv for c, v in acc.items()}


def _sup_power(family: ConvexFamily, counts, pred: Predicate, start) -> float:
    """sup over the domain of prod_r q_r(phi)^{k_r}, by local refinement."""
    def val_float(phi):
        base = np.array([[float(v) for v in row] for row in family.base])
        Q = base.copy()
        for p, t in zip(phi, family.directions):
            Q = Q + p * np.array([[float(v) for v in row] for row in t])
        total = 0.0
        q = [0.0] * pred.d
        for x in range(family.inputs):
            for a in range(family.outputs):
                q[pred(a, x) - 1] = Q[x, a]
        for k, v in zip(counts, q):
            if k:
                if v <= 0:
                    return -1e300
                total += k * math.log(v)
        return total

    bounds = [(float(lo), float(hi)) for lo, hi in zip(family.lower, family.upper)]
    candidates = [np.array([float(v) for v in start])]
    candidates += [np.array([float(v) for v in c]) for c in family.corners()]
    best = max(val_float(c) for c in candidates)
    if family.d_prime:
        res = minimize(lambda v: -val_float(v), candidates[0], bounds=bounds, method="SLSQP")
        if res.success:
            best = max(best, -float(res.fun))
    return math.exp(best) if best > -1e299 else 0.0


def general_tau(family: ConvexFamily, n: int, grid: int, pred: Predicate,
                diagnostic: bool = True) -> GeneralTau:
    """Uniform mixture of Q_phi^{(x)n} over a midpoint grid of the domain.

    The family must be w-symmetric, so tau is too and is stored per class.
    The diagnostic compares tau with the supremum over the family; the
    continuum mixture satisfies min_ratio >= 1, the grid only approximately.
    """
    if grid < 2 and family.d_prime:
        raise DomainError("grid resolution must be >= 2")
    if not family.is_w_symmetric(pred):
        raise PreconditionError("family boxes are not w-symmetric")
    vals = _cached_grid_tau(family, n, grid, pred)
    tau = ClassBox(n, pred, vals)
    diag = None
    if diagnostic:
        coarse = _cached_grid_tau(family, n, max(grid // 2, 1), pred) if family.d_prime else vals
        err = 0.0
        for c, v in vals.items():
            if v != 0:
                err = max(err, abs(float(v) - float(coarse[c])) / float(v))
        pts = family.grid(grid) if family.d_prime else [()]
        scale = binomial(n + family.d_prime, family.d_prime)
        worst, at = math.inf, None
        fq = np.array([[float(t) for t in family.class_values(p, pred)] for p in pts])
        with np.errstate(divide="ignore"):
            logq = np.log(fq)
        for c, v in vals.items():
            cv = np.array(c, dtype=float)
            used = cv > 0
            score = logq[:, used] @ cv[used]
            i = int(np.argmax(score))
            sup = _sup_power(family, c, pred, pts[i])
            if sup == 0:
                continue
            ratio = float(to_mpf(v)) * scale / sup
            if ratio < worst:
                worst, at = ratio, c
        diag = GridDiagnostic(worst, at, grid, err)
    return GeneralTau(tau, grid, diag)


@lru_cache(maxsize=64)
def _cached_grid_tau(family, n, grid, pred):
    return _grid_tau(family, n, grid, pred)


@dataclass(frozen=True)
class GeneralCertificate:
    prefactor: object
    part1: Certificate  # frequency level, needs no symmetry of P
    part2: Certificate | None  # entrywise, when P is w-symmetric
    diagnostic: GridDiagnostic | None

    @property
    def passed(self) -> bool:
        return self.part1.passed and (self.part2 is None or self.part2.passed)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"


def certify_general_definetti(P, pred: Predicate, family: ConvexFamily, mu: Sequence,
                              C=1, grid: int = 64, diagnostic: bool = True) -> GeneralCertificate:
    """Check the threshold premise for P, then bound P by the grid de Finetti box.

    ``P`` may be a dense box, a ClassBox or a SymBox (CHSH predicate).
    Part 1 compares frequency probabilities and runs for any P; part 2
    compares entries and runs only when P is w-symmetric.
    """
    mu = tuple(Fraction(v) for v in mu)
    C = Fraction(C) if not isinstance(C, QSqrt2) else C
    if not family.is_w_symmetric(pred):
        raise PreconditionError("family boxes are not w-symmetric")
    if isinstance(P, (SymBox, ClassBox)):
        Pc = as_class_box(P, pred)
        dist = Pc.freq_distribution(mu)
    elif isinstance(P, Box):
        Pc = ClassBox.from_box(P, pred) if is_w_symmetric(P, pred) else None
        dist = Pc.freq_distribution(mu) if Pc is not None else freq_distribution(P, pred, mu)
    else:
        raise TypeError(f"unsupported box type {type(P).__name__}")
    n = P.n
    fset = expected_freq_set(family, mu, pred)
    for counts, prob in sorted(dist.items()):
        if prob == 0:
            continue
        _, holds = premise_slack(prob, C, counts, fset)
        if not holds:
            raise PreconditionError(f"threshold premise fails at class counts {counts}", counts)
    gt = general_tau(family, n, grid, pred, diagnostic=diagnostic)
    tau = gt.tau
    prefactor = C * binomial(n + family.d_prime, family.d_prime) * (n + 1) ** (pred.d - 1)
    part1 = _certify("general-frequency", prefactor,
                     ((c, p, tau.freq_prob(c, mu)) for c, p in sorted(dist.items())))
    part2 = None
    if Pc is not None:
        part2 = _certify("general-entry", prefactor,
                         ((c, v, tau.entry(c)) for c, v in sorted(Pc.values.items())))
    return GeneralCertificate(prefactor, part1, part2, gt.diagnostic)


def toy_family() -> tuple[ConvexFamily, Predicate, tuple]:
    """Two inputs, two outputs, every (a, x) its own class; phi in [1/4, 3/4]^2.

    Returns (family, predicate, mu) with a non-uniform mu.
    """
    base = [[0, 1], [0, 1]]
    d1 = [[1, -1], [0, 0]]
    d2 = [[0, 0], [1, -1]]
    q = Fraction(1, 4)
    fam = ConvexFamily(base, (d1, d2), (q, q), (3 * q, 3 * q))
    pred = Predicate(4, ((1, 2), (3, 4)))
    return fam, pred, (Fraction(1, 3), Fraction(2, 3))
