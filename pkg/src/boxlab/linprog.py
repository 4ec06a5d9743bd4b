"""Polytopes over box coordinates and exact linear programming.

Two solvers share one contract: an exact two-phase simplex with Bland's
rule over any ordered field (Fractions, or Q(sqrt 2) right-hand sides),
and a certified path for larger programs in which HiGHS proposes a basis
and FLINT re-solves that basis in exact rationals, checking primal
feasibility and dual optimality.  A basis that fails the exact check is
discarded and the exact simplex runs instead.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import flint
import highspy
import numpy as np
import scipy.sparse as sp

from .boxes import Alphabets, Box, check_size
from .numerics import QSqrt2

log = logging.getLogger(__name__)

Row = tuple[tuple[int, Fraction], ...]

# programs with more tableau cells than this go to the certified path
EXACT_CELL_LIMIT = 40_000


@dataclass(frozen=True)
class Polytope:
    """{x >= 0 : eq_rows x = eq_rhs, ub_rows x <= ub_rhs} with sparse rows.

    ``shape`` is (n, alphabets) when the variables are the entries of a box
    in serialization order.  ``eve_symmetric`` records that relabeling the
    side interface's inputs, and its outputs separately for each input,
    maps the polytope to itself.
    """

    n_vars: int
    eq_rows: tuple[Row, ...] = ()
    eq_rhs: tuple = ()
    ub_rows: tuple[Row, ...] = ()
    ub_rhs: tuple = ()
    shape: tuple[int, Alphabets] | None = field(default=None, compare=False)
    eve_symmetric: bool = field(default=False, compare=False)

    def __post_init__(self):
        if len(self.eq_rows) != len(self.eq_rhs) or len(self.ub_rows) != len(self.ub_rhs):
            raise ValueError("row and right-hand-side counts differ")
        for row in self.eq_rows + self.ub_rows:
            for j, _ in row:
                if not 0 <= j < self.n_vars:
                    raise ValueError(f"column {j} out of range")

    def contains(self, x: Sequence) -> bool:
        if len(x) != self.n_vars or any(v < 0 for v in x):
            return False
        for row, rhs in zip(self.eq_rows, self.eq_rhs):
            if _dot(row, x) != rhs:
                return False
        for row, rhs in zip(self.ub_rows, self.ub_rhs):
            if _dot(row, x) > rhs:
                return False
        return True

    def intersect(self, other: Polytope) -> Polytope:
        if other.n_vars != self.n_vars:
            raise ValueError("polytopes live in different spaces")
        return Polytope(self.n_vars, self.eq_rows + other.eq_rows, self.eq_rhs + other.eq_rhs,
                        self.ub_rows + other.ub_rows, self.ub_rhs + other.ub_rhs, self.shape,
                        self.eve_symmetric and other.eve_symmetric)

    def scaled(self, eq_factors: Sequence, ub_factors: Sequence) -> Polytope:
        """Rows multiplied by positive rationals (same feasible set)."""
        eq = tuple(tuple((j, f * v) for j, v in row) for row, f in zip(self.eq_rows, eq_factors))
        ub = tuple(tuple((j, f * v) for j, v in row) for row, f in zip(self.ub_rows, ub_factors))
        return Polytope(self.n_vars, eq, tuple(f * b for f, b in zip(eq_factors, self.eq_rhs)),
                        ub, tuple(f * b for f, b in zip(ub_factors, self.ub_rhs)), self.shape,
                        self.eve_symmetric)


def _dot(row: Row, x) -> object:
    total = Fraction(0)
    for j, v in row:
        total = total + v * x[j]
    return total


@dataclass(frozen=True)
class LPSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: object = None
    x: tuple | None = None
    method: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# --- exact simplex -------------------------------------------------------------

def _pivot(T: list[list], basis: list[int], obj: list, r: int, c: int) -> None:
    prow = T[r]
    inv = 1 / prow[c] if not isinstance(prow[c], QSqrt2) else prow[c].inverse()
    prow = [v * inv for v in prow]
    T[r] = prow
    nz = [j for j, v in enumerate(prow) if v != 0]
    for i, row in enumerate(T):
        if i == r:
            continue
        f = row[c]
        if f != 0:
            for j in nz:
                row[j] = row[j] - f * prow[j]
    f = obj[c]
    if f != 0:
        for j in nz:
            obj[j] = obj[j] - f * prow[j]
    basis[r] = c


def _bland(T, basis, obj, allowed: int) -> str:
    """Maximize with Bland's rule; obj holds reduced costs, obj[-1] = -value."""
    while True:
        col = next((j for j in range(allowed) if obj[j] > 0), None)
        if col is None:
            return "optimal"
        best, best_ratio = None, None
        for i, row in enumerate(T):
            if row[col] > 0:
                ratio = row[-1] / row[col]
                if (best is None or ratio < best_ratio
                        or (ratio == best_ratio and basis[i] < basis[best])):
                    best, best_ratio = i, ratio
        if best is None:
            return "unbounded"
        _pivot(T, basis, obj, best, col)


def _simplex_exact(poly: Polytope, c: Sequence[Fraction]) -> LPSolution:
    nv = poly.n_vars
    rows = [(row, rhs, None) for row, rhs in zip(poly.eq_rows, poly.eq_rhs)]
    rows += [(row, rhs, k) for k, (row, rhs) in enumerate(zip(poly.ub_rows, poly.ub_rhs))]
    n_slack = len(poly.ub_rows)
    m = len(rows)
    n_struct = nv + n_slack
    T, basis, art_cols = [], [], []
    n_total = n_struct + m  # room for one artificial per row
    for i, (row, rhs, slack) in enumerate(rows):
        line = [Fraction(0)] * (n_total + 1)
        for j, v in row:
            line[j] = line[j] + v
        if slack is not None:
            line[nv + slack] = Fraction(1)
        line[-1] = rhs
        if rhs < 0:
            line = [-v for v in line]
        if slack is not None and line[nv + slack] == 1:
            basis.append(nv + slack)
        else:
            a = n_struct + i
            line[a] = Fraction(1)
            basis.append(a)
            art_cols.append(a)
        T.append(line)

    if art_cols:
        # phase 1: maximize -sum(artificials)
        obj = [Fraction(0)] * (n_total + 1)
        for a in art_cols:
            obj[a] = Fraction(-1)
        for i, b in enumerate(basis):
            if b in art_cols:
                obj = [o + t for o, t in zip(obj, T[i])]
        status = _bland(T, basis, obj, n_total)
        if obj[-1] != 0:
            return LPSolution("infeasible", method="exact-simplex")
        # drive zero-level artificials out of the basis; drop redundant rows
        i = 0
        while i < len(T):
            if basis[i] >= n_struct:
                col = next((j for j in range(n_struct) if T[i][j] != 0), None)
                if col is None:
                    del T[i], basis[i]
                    continue
                _pivot(T, basis, obj, i, col)
            i += 1
    cost = [Fraction(0)] * (n_total + 1)
    for j, v in enumerate(c):
        cost[j] = v
    obj = list(cost)
    for i, b in enumerate(basis):
        if cost[b] != 0:
            obj = [o - cost[b] * t for o, t in zip(obj, T[i])]
    status = _bland(T, basis, obj, n_struct)
    if status == "unbounded":
        return LPSolution("unbounded", method="exact-simplex")
    x = [Fraction(0)] * nv
    for i, b in enumerate(basis):
        if b < nv:
            x[b] = T[i][-1]
    value = sum((cj * xj for cj, xj in zip(c, x)), Fraction(0))
    return LPSolution("optimal", value, tuple(x), "exact-simplex")


# --- certified float-basis path ----------------------------------------------------

def _to_fmpq(v: Fraction):
    return flint.fmpq(v.numerator, v.denominator)


def _from_fmpq(v) -> Fraction:
    return Fraction(int(v.p), int(v.q))


def _split(v) -> tuple[Fraction, Fraction]:
    if isinstance(v, QSqrt2):
        return v.a, v.b
    return Fraction(v), Fraction(0)


def _highs_basis(poly: Polytope, c: Sequence[Fraction]):
    rows = list(poly.eq_rows) + list(poly.ub_rows)
    data, ri, ci = [], [], []
    for i, row in enumerate(rows):
        for j, v in row:
            ri.append(i)
            ci.append(j)
            data.append(float(v))
    m = len(rows)
    A = sp.csc_matrix((data, (ri, ci)), shape=(m, poly.n_vars))
    inf = highspy.kHighsInf
    lp = highspy.HighsLp()
    lp.num_col_ = poly.n_vars
    lp.num_row_ = m
    lp.col_cost_ = np.array([float(v) for v in c])
    lp.col_lower_ = np.zeros(poly.n_vars)
    lp.col_upper_ = np.full(poly.n_vars, inf)
    lo = [float(b) for b in poly.eq_rhs] + [-inf] * len(poly.ub_rows)
    hi = [float(b) for b in poly.eq_rhs] + [float(b) for b in poly.ub_rhs]
    lp.row_lower_ = np.array(lo)
    lp.row_upper_ = np.array(hi)
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = A.indptr
    lp.a_matrix_.index_ = A.indices
    lp.a_matrix_.value_ = A.data
    lp.sense_ = highspy.ObjSense.kMaximize
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.passModel(lp)
    h.run()
    status = h.getModelStatus()
    if status != highspy.HighsModelStatus.kOptimal:
        return str(status), None, None
    basis = h.getBasis()
    return "optimal", list(basis.col_status), list(basis.row_status)


def _certify_basis(poly: Polytope, c, col_status, row_status) -> LPSolution | None:
    B = highspy.HighsBasisStatus
    rows = list(poly.eq_rows) + list(poly.ub_rows)
    rhs = list(poly.eq_rhs) + list(poly.ub_rhs)
    n_eq = len(poly.eq_rows)
    JB = [j for j, s in enumerate(col_status) if s == B.kBasic]
    if any(s not in (B.kBasic, B.kLower, B.kZero) for s in col_status):
        return None
    IN = []
    for i, s in enumerate(row_status):
        if s == B.kBasic:
            continue
        if i >= n_eq and s != B.kUpper:
            return None
        IN.append(i)
    k = len(JB)
    if len(IN) != k:
        return None
    pos = {j: t for t, j in enumerate(JB)}
    M = [[0] * k for _ in range(k)]
    for r, i in enumerate(IN):
        for j, v in rows[i]:
            t = pos.get(j)
            if t is not None:
                M[r][t] = _to_fmpq(v)
    x = [Fraction(0)] * poly.n_vars
    y = {}
    if k:
        Mf = flint.fmpq_mat(k, k, [e for row in M for e in row])
        parts = [_split(rhs[i]) for i in IN]
        bvec = flint.fmpq_mat(k, 2, [_to_fmpq(v) for pr in parts for v in pr])
        try:
            sol = Mf.solve(bvec)
            dual = Mf.transpose().solve(flint.fmpq_mat(k, 1, [_to_fmpq(c[j]) for j in JB]))
        except ZeroDivisionError:
            return None
        for t, j in enumerate(JB):
            a, b = _from_fmpq(sol[t, 0]), _from_fmpq(sol[t, 1])
            x[j] = QSqrt2(a, b) if b != 0 else a
        y = {i: _from_fmpq(dual[r, 0]) for r, i in enumerate(IN)}
    if not poly.contains(x):
        return None
    for i, yi in y.items():
        if i >= n_eq and yi < 0:
            return None
    # reduced costs of nonbasic columns must be <= 0 for a maximum
    reduced = [Fraction(cj) for cj in c]
    for i, yi in y.items():
        if yi != 0:
            for j, v in rows[i]:
                reduced[j] -= yi * v
    basic = set(JB)
    if any(reduced[j] > 0 for j in range(poly.n_vars) if j not in basic):
        return None
    value = sum((cj * xj for cj, xj in zip(c, x) if cj != 0), Fraction(0))
    dual_value = sum((yi * rhs[i] for i, yi in y.items()), Fraction(0))
    if value != dual_value:
        return None
    return LPSolution("optimal", value, tuple(x), "certified-basis")


def lp_solve(poly: Polytope, objective, sense: str = "max", method: str = "auto") -> LPSolution:
    """Exact optimum of a linear objective over a polytope.

    ``objective`` is a dense sequence or a {column: coefficient} mapping of
    rationals.  ``method`` is "exact" (Bland simplex), "certified" (float
    basis verified exactly, exact fallback) or "auto".
    """
    if isinstance(objective, dict):
        c = [Fraction(0)] * poly.n_vars
        for j, v in objective.items():
            c[j] = Fraction(v)
    else:
        c = [Fraction(v) for v in objective]
    if len(c) != poly.n_vars:
        raise ValueError("objective length does not match the polytope")
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    cmax = c if sense == "max" else [-v for v in c]
    m = len(poly.eq_rows) + len(poly.ub_rows)
    if method == "auto":
        method = "exact" if m * (poly.n_vars + len(poly.ub_rows) + m) <= EXACT_CELL_LIMIT else "certified"
    sol = None
    if method == "certified":
        status, cols, rws = _highs_basis(poly, cmax)
        if status == "optimal":
            sol = _certify_basis(poly, cmax, cols, rws)
            if sol is None:
                log.warning("float basis failed exact certification; running exact simplex")
    elif method != "exact":
        raise ValueError(f"unknown method {method!r}")
    if sol is None:
        sol = _simplex_exact(poly, cmax)
    if sol.optimal and sense == "min":
        sol = LPSolution(sol.status, -sol.value, sol.x, sol.method)
    if sol.optimal and not poly.contains(sol.x):
        raise AssertionError("LP witness violates its constraints")
    return sol


# --- polytopes of boxes ----------------------------------------------------------

def _index_array(n: int, alph: Alphabets) -> np.ndarray:
    shape = alph.x_shape(n) + alph.a_shape(n)
    return np.arange(math.prod(shape)).reshape(shape)


def _unit_axes(n: int, alph: Alphabets, per_round: bool):
    n_in = len(alph.x_shape(n))
    for p in range(alph.parties):
        if per_round:
            for r in range(n):
                yield [p * n + r], [n_in + p * n + r]
        else:
            yield [p * n + r for r in range(n)], [n_in + p * n + r for r in range(n)]
    if alph.eve is not None:
        k = alph.parties * n
        yield [k], [n_in + k]


def _normalization_rows(idx: np.ndarray, n_in: int):
    mat = idx.reshape(math.prod(idx.shape[:n_in]), -1)
    rows = [tuple((int(j), Fraction(1)) for j in r) for r in mat]
    return rows, [Fraction(1)] * len(rows)


def _signaling_rows(idx: np.ndarray, n: int, alph: Alphabets, per_round: bool):
    rows = []
    for in_axes, out_axes in _unit_axes(n, alph, per_round):
        front = in_axes + out_axes
        arr = np.moveaxis(idx, front, list(range(len(front))))
        U = math.prod(arr.shape[: len(in_axes)])
        O = math.prod(arr.shape[len(in_axes): len(front)])
        arr = arr.reshape(U, O, -1)
        for u in range(1, U):
            for r in range(arr.shape[2]):
                row = [(int(j), Fraction(1)) for j in arr[u, :, r]]
                row += [(int(j), Fraction(-1)) for j in arr[0, :, r]]
                rows.append(tuple(row))
    return rows


def _box_polytope(n: int, alph: Alphabets, per_round: bool) -> Polytope:
    check_size(n, alph)
    idx = _index_array(n, alph)
    rows, rhs = _normalization_rows(idx, len(alph.x_shape(n)))
    sig = _signaling_rows(idx, n, alph, per_round)
    return Polytope(idx.size, tuple(rows) + tuple(sig), tuple(rhs) + (Fraction(0),) * len(sig),
                    shape=(n, alph), eve_symmetric=True)


def ns_polytope(n: int, alphabets: Alphabets) -> Polytope:
    """Normalized boxes that are non-signaling between all interfaces."""
    return _box_polytope(n, alphabets, per_round=False)


def round_ns_polytope(n: int, alphabets: Alphabets) -> Polytope:
    """Non-signaling between interfaces and between rounds of each party."""
    return _box_polytope(n, alphabets, per_round=True)


def extension_polytope(tau: Box, eve_out: int, eve_in: int) -> Polytope:
    """Non-signaling extensions of ``tau`` by a side interface."""
    if tau.alphabets.eve is not None:
        raise ValueError("tau must not already carry a side interface")
    n = tau.n
    alph = tau.alphabets.with_eve(eve_in, eve_out)
    base = ns_polytope(n, alph)
    idx = _index_array(n, alph)
    P = alph.parties
    # idx axes: AB inputs, z, AB outputs, e
    k = P * n
    rows, rhs = [], []
    for xa in np.ndindex(*alph.x_shape(n)[:k]):
        for z in range(eve_in):
            for aa in np.ndindex(*alph.a_shape(n)[:k]):
                cols = idx[xa + (z,) + aa]
                rows.append(tuple((int(j), Fraction(1)) for j in cols))
                rhs.append(tau.table[xa + aa])
    # the same marginal for every z, summed over e: invariant under relabeling
    marg = Polytope(idx.size, tuple(rows), tuple(rhs), shape=(n, alph), eve_symmetric=True)
    return base.intersect(marg)


def box_from_point(poly: Polytope, x: Sequence) -> Box:
    if poly.shape is None:
        raise ValueError("polytope variables are not box entries")
    n, alph = poly.shape
    shape = alph.x_shape(n) + alph.a_shape(n)
    return Box(n, alph, np.array(list(x), dtype=object).reshape(shape))
