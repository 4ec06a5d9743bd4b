"""Threshold bounds on win counts and on predicate frequencies.

For CHSH the bound on winning at least k of n rounds is
exp(-n D(k/n || w)), which is an exact element of Q(sqrt 2) because
exp(-n D) = (n w / k)^k (n (1 - w) / (n - k))^(n - k).  For general
predicates the reference point is the closest expected frequency in a
polytope, found exactly by clamping when d = 2 and numerically otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np
from scipy.optimize import minimize

from . import config
from .boxes import ClassBox, Predicate, SymBox, as_class_box, chsh_predicate
from .numerics import (ONE_MINUS_W, W, DomainError, FrequencyVector, PreconditionError,
                       QSqrt2, exact_exp_neg_nD, rel_entropy, to_mpf)


# --- CHSH tails -------------------------------------------------------------------

def _check_upper(n: int, k: int):
    if not (0 <= k <= n) or not (k > W * n):
        raise DomainError(f"need w*n < k <= n, got n={n}, k={k}")


def chsh_tail_bound(n: int, k: int, bits: int | None = None) -> float:
    """exp(-n D(k/n || w)) for w n < k <= n, evaluated at high precision."""
    _check_upper(n, k)
    bits = bits or config.settings.mp_bits
    with mpmath.workprec(bits):
        d = rel_entropy((Fraction(k, n), Fraction(n - k, n)), (W, ONE_MINUS_W), bits=bits)
        return float(mpmath.exp(-n * d))


def chsh_tail_bound_exact(n: int, k: int) -> QSqrt2:
    """The same bound as an exact element of Q(sqrt 2)."""
    _check_upper(n, k)
    return QSqrt2.coerce(exact_exp_neg_nD((k, n - k), (W, ONE_MINUS_W)))


@dataclass(frozen=True)
class ThresholdRow:
    k: object  # win count, or class-count vector
    kind: str  # "upper" | "lower" | "trivial" | "frequency"
    observed: object
    bound: object
    slack: object
    holds: bool


@dataclass(frozen=True)
class ThresholdReport:
    rows: tuple[ThresholdRow, ...]
    passed: bool
    worst: ThresholdRow | None

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"


def _report(rows: list[ThresholdRow]) -> ThresholdReport:
    worst = min(rows, key=lambda r: r.slack) if rows else None
    return ThresholdReport(tuple(rows), all(r.holds for r in rows), worst)


def tail_bounds(n: int) -> list[tuple[str, object]]:
    """(kind, bound) per k: upper tails above w n, mirrored lower tails
    below (1 - w) n, and the trivial bound 1 in between."""
    out = []
    for k in range(n + 1):
        if k > W * n:
            out.append(("upper", chsh_tail_bound_exact(n, k)))
        elif k < ONE_MINUS_W * n:
            out.append(("lower", chsh_tail_bound_exact(n, n - k)))
        else:
            out.append(("trivial", Fraction(1)))
    return out


def check_chsh_threshold(symbox: SymBox) -> ThresholdReport:
    """Compare every upper and lower win-count tail with its bound.

    A failing report means the box lies outside the set of boxes these
    tail bounds apply to (a PR box, say); it is not an error.
    """
    n, p = symbox.n, symbox.p
    rows = []
    for k, (kind, bound) in enumerate(tail_bounds(n)):
        if kind == "lower":
            tail = sum(p[: k + 1], Fraction(0))
        else:
            tail = sum(p[k:], Fraction(0))
        slack = bound - tail
        rows.append(ThresholdRow(k, kind, tail, bound, slack, slack >= 0))
    return _report(rows)


def adversarial_symbox(n: int) -> SymBox:
    """A SymBox that makes the tail bounds tight wherever it can.

    Upper tails are saturated from k = n downward and lower tails from
    k = 0 upward; what is left goes to the middle count whose de Finetti
    weight is smallest (the hardest place to certify).
    """
    from .definetti import tau_chsh  # local import: definetti builds on this module

    bounds = tail_bounds(n)
    p: list = [Fraction(0)] * (n + 1)
    left = Fraction(1)
    acc = Fraction(0)
    for k in range(n, -1, -1):
        kind, b = bounds[k]
        if kind != "upper":
            break
        v = min(b - acc, left)
        p[k] = v
        acc = acc + v
        left = left - v
    acc = Fraction(0)
    for k in range(n + 1):
        kind, b = bounds[k]
        if kind != "lower":
            break
        v = min(b - acc, left)
        p[k] = v
        acc = acc + v
        left = left - v
    if left != 0:
        middle = [k for k in range(n + 1) if bounds[k][0] == "trivial"]
        if not middle:
            raise AssertionError("tail bounds leave mass unplaced")
        tau = tau_chsh(n).p
        k = min(middle, key=lambda j: tau[j])
        p[k] = p[k] + left
    return SymBox(n, tuple(p))


# --- general frequency sets ------------------------------------------------------------

@dataclass(frozen=True)
class FrequencySet:
    """Convex hull of finitely many points of the probability simplex."""

    vertices: tuple[tuple, ...]

    def __post_init__(self):
        vs = tuple(tuple(v) for v in self.vertices)
        if not vs:
            raise DomainError("frequency set needs at least one vertex")
        d = len(vs[0])
        for v in vs:
            if len(v) != d or sum(v, Fraction(0)) != 1 or any(c < 0 for c in v):
                raise DomainError(f"vertex {v} is not a probability vector of length {d}")
        object.__setattr__(self, "vertices", vs)

    @classmethod
    def chsh(cls) -> FrequencySet:
        return cls(((W, ONE_MINUS_W), (ONE_MINUS_W, W)))

    @property
    def d(self) -> int:
        return len(self.vertices[0])

    def interval(self):
        """(lo, hi) of the first coordinate; only meaningful for d = 2."""
        firsts = [v[0] for v in self.vertices]
        return min(firsts), max(firsts)

    def contains(self, f: Sequence) -> bool:
        f = tuple(f)
        if len(f) != self.d:
            return False
        if self.d == 2:
            lo, hi = self.interval()
            return lo <= f[0] <= hi
        if any(isinstance(c, QSqrt2) for v in self.vertices for c in v):
            raise DomainError("exact membership for d > 2 needs rational vertices")
        from .linprog import Polytope, lp_solve

        m = len(self.vertices)
        rows = tuple(tuple((i, Fraction(v[r])) for i, v in enumerate(self.vertices))
                     for r in range(self.d))
        rows += (tuple((i, Fraction(1)) for i in range(m)),)
        poly = Polytope(m, rows, tuple(Fraction(c) for c in f) + (Fraction(1),))
        return lp_solve(poly, [0] * m, method="exact").optimal

    def support(self) -> tuple[bool, ...]:
        return tuple(any(v[r] != 0 for v in self.vertices) for r in range(self.d))


@dataclass(frozen=True)
class InfDivergence:
    value: float  # inf over the set of D(f || g), math.inf if unsupported
    point: tuple | None  # minimizing g (exact when d = 2)
    exact: bool


def inf_rel_entropy(f: Sequence, fset: FrequencySet) -> InfDivergence:
    """inf_{g in fset} D(f || g)."""
    f = tuple(f)
    if len(f) != fset.d:
        raise DomainError("f and the frequency set have different dimensions")
    supp = fset.support()
    if any(fr > 0 and not s for fr, s in zip(f, supp)):
        return InfDivergence(math.inf, None, True)
    if fset.d == 2:
        lo, hi = fset.interval()
        g0 = min(max(f[0], lo), hi)
        g = (g0, 1 - g0)
        return InfDivergence(rel_entropy(f, g), g, True)
    if all(not isinstance(c, QSqrt2) for c in f) and fset.contains(f):
        return InfDivergence(0.0, f, True)
    return _inf_numeric(f, fset)


def _inf_numeric(f, fset: FrequencySet) -> InfDivergence:
    V = np.array([[float(c) for c in v] for v in fset.vertices])  # m x d
    fv = np.array([float(c) for c in f])
    mask = fv > 0
    m = len(V)

    def obj(lam):
        g = lam @ V
        return float(np.sum(fv[mask] * np.log(fv[mask] / np.maximum(g[mask], 1e-300))))

    def grad(lam):
        g = lam @ V
        w = np.zeros_like(fv)
        w[mask] = -fv[mask] / np.maximum(g[mask], 1e-300)
        return V @ w

    cons = ({"type": "eq", "fun": lambda lam: np.sum(lam) - 1.0, "jac": lambda lam: np.ones(m)},)
    starts = [np.full(m, 1.0 / m)] + [0.5 * np.eye(m)[i] + 0.5 / m for i in range(m)]
    best = None
    for lam0 in starts:
        res = minimize(obj, lam0, jac=grad, bounds=[(0.0, 1.0)] * m, constraints=cons,
                       method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
        lam = np.clip(res.x, 0.0, None)
        lam = lam / lam.sum()
        val = obj(lam)
        if best is None or val < best[0]:
            best = (val, lam)
    val, lam = best
    return InfDivergence(max(val, 0.0), tuple(float(c) for c in lam @ V), False)


def general_threshold_bound(counts, fset: FrequencySet) -> float:
    """exp(-n inf_{g in fset} D(k/n || g))."""
    fv = counts if isinstance(counts, FrequencyVector) else FrequencyVector(tuple(counts))
    inf = inf_rel_entropy(fv.frequencies(), fset)
    if inf.value == math.inf:
        return 0.0
    return math.exp(-fv.n * inf.value)


def general_threshold_bound_exact(counts, fset: FrequencySet):
    """Exact version of :func:`general_threshold_bound` when d = 2, else None."""
    fv = counts if isinstance(counts, FrequencyVector) else FrequencyVector(tuple(counts))
    inf = inf_rel_entropy(fv.frequencies(), fset)
    if not inf.exact:
        return None
    if inf.value == math.inf:
        return Fraction(0)
    if inf.value == 0.0 and inf.point == fv.frequencies():
        return Fraction(1)
    return exact_exp_neg_nD(fv.counts, inf.point)


def premise_slack(prob, C, counts, fset: FrequencySet, tol: float | None = None):
    """C exp(-n inf D) - prob, exact when possible.

    Returns (slack, holds).  In the float case the bound is widened by the
    relative tolerance, since the infimum is found numerically.
    """
    tol = config.settings.tol if tol is None else tol
    exact_bound = general_threshold_bound_exact(counts, fset)
    if exact_bound is not None:
        slack = C * exact_bound - prob
        return slack, slack >= 0
    bound = float(C) * general_threshold_bound(counts, fset)
    slack = bound - float(to_mpf(prob))
    return slack, slack >= -tol * max(bound, 1e-300)


def definetti_implies_threshold(P, tau, C_tilde, pred: Predicate | None = None,
                                mu: Sequence | None = None,
                                fset: FrequencySet | None = None) -> ThresholdReport:
    """Entrywise P <= C~ tau implies Pr[freq = f] <= C~ exp(-n inf D).

    P and tau may be SymBoxes, ClassBoxes or dense boxes.  Defaults are the
    CHSH predicate, uniform inputs, and the CHSH frequency interval.
    """
    pred = pred or chsh_predicate()
    mu = tuple(mu) if mu is not None else (Fraction(1, pred.inputs),) * pred.inputs
    fset = fset or FrequencySet.chsh()
    Pc: ClassBox = as_class_box(P, pred)
    Tc: ClassBox = as_class_box(tau, pred)
    if Pc.n != Tc.n:
        raise PreconditionError("P and tau have different round counts")
    for counts, v in Pc.values.items():
        if v > C_tilde * Tc.entry(counts):
            raise PreconditionError(f"P exceeds C~ tau at class counts {counts}", counts)
    rows = []
    for counts, prob in sorted(Pc.freq_distribution(mu).items()):
        if prob == 0:
            continue
        slack, holds = premise_slack(prob, C_tilde, counts, fset)
        exact_bound = general_threshold_bound_exact(counts, fset)
        bound = C_tilde * exact_bound if exact_bound is not None else \
            float(C_tilde) * general_threshold_bound(counts, fset)
        rows.append(ThresholdRow(counts, "frequency", prob, bound, slack, holds))
    return _report(rows)
