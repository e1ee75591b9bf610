"""Self-contained linear programming.

A bounded-variable primal simplex over ``A x (<=|=|>=) b, l <= x <= u``.
Rows get a slack column so the working system is ``A x + s = b``; bounds on
all columns are handled implicitly. Phase 1 minimises the sum of bound
infeasibilities of the basic variables and therefore starts from any basis,
which is what lets branch-and-bound reuse the parent basis.

Two arithmetic backends share the iteration logic: float (dense LU from
scipy) and exact (sparse Gaussian elimination over ``Fraction``). Exact
solves start from the optimal float basis and only pivot further if that
basis fails the exact optimality test.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .numerics import format_rational, to_rational

INF = math.inf

BASIC, AT_LOWER, AT_UPPER, AT_ZERO = 0, 1, 2, 3

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

SENSES = ("<=", "=", ">=")


class LpError(RuntimeError):
    """Numerical failure inside the simplex (singular basis and the like)."""


class LinearProgram:
    """Named columns with bounds and objective, named rows with a sense.

    Coefficients may be ``int``, ``float`` or ``Fraction``; exact solves
    convert floats through their binary value.
    """

    def __init__(self, sense: str = "min", name: str = "lp"):
        if sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
        self.sense = sense
        self.name = name
        self.col_names: List[str] = []
        self.col_lower: List = []
        self.col_upper: List = []
        self.col_obj: List = []
        self.row_names: List[str] = []
        self.row_coefs: List[Dict[int, object]] = []
        self.row_sense: List[str] = []
        self.row_rhs: List = []
        self.objective_offset = 0
        self._cols: Dict[str, int] = {}
        self._rows: Dict[str, int] = {}
        self._dense_cache = None

    @property
    def num_cols(self) -> int:
        return len(self.col_names)

    @property
    def num_rows(self) -> int:
        return len(self.row_names)

    def add_column(self, name: str, lower=0, upper=INF, obj=0) -> int:
        if name in self._cols:
            raise ValueError(f"duplicate column name {name!r}")
        _check_finite_coef(obj, name)
        if lower > upper:
            raise ValueError(f"column {name!r}: lower bound exceeds upper bound")
        self._cols[name] = len(self.col_names)
        self.col_names.append(name)
        self.col_lower.append(lower)
        self.col_upper.append(upper)
        self.col_obj.append(obj)
        self._dense_cache = None
        return self._cols[name]

    def add_row(self, name: str, coefs: Mapping[Union[int, str], object],
                sense: str, rhs) -> int:
        if name in self._rows:
            raise ValueError(f"duplicate row name {name!r}")
        if sense not in SENSES:
            raise ValueError(f"row {name!r}: unknown sense {sense!r}")
        _check_finite_coef(rhs, name)
        row: Dict[int, object] = {}
        for key, value in coefs.items():
            j = self._cols[key] if isinstance(key, str) else int(key)
            if not 0 <= j < self.num_cols:
                raise IndexError(f"row {name!r}: column index {j} out of range")
            _check_finite_coef(value, name)
            if value != 0:
                row[j] = row.get(j, 0) + value
        self._rows[name] = len(self.row_names)
        self.row_names.append(name)
        self.row_coefs.append(row)
        self.row_sense.append(sense)
        self.row_rhs.append(rhs)
        self._dense_cache = None
        return self._rows[name]

    def col(self, name: str) -> int:
        return self._cols[name]

    def row(self, name: str) -> int:
        return self._rows[name]

    def has_col(self, name: str) -> bool:
        return name in self._cols

    def set_objective(self, coefs: Mapping[Union[int, str], object], offset=0) -> None:
        self.col_obj = [0] * self.num_cols
        for key, value in coefs.items():
            j = self._cols[key] if isinstance(key, str) else int(key)
            self.col_obj[j] = value
        self.objective_offset = offset

    def copy(self) -> "LinearProgram":
        other = LinearProgram(self.sense, self.name)
        other.col_names = list(self.col_names)
        other.col_lower = list(self.col_lower)
        other.col_upper = list(self.col_upper)
        other.col_obj = list(self.col_obj)
        other.row_names = list(self.row_names)
        other.row_coefs = [dict(r) for r in self.row_coefs]
        other.row_sense = list(self.row_sense)
        other.row_rhs = list(self.row_rhs)
        other.objective_offset = self.objective_offset
        other._cols = dict(self._cols)
        other._rows = dict(self._rows)
        other._dense_cache = self._dense_cache  # never mutated in place
        return other

    def dense_matrix(self) -> np.ndarray:
        if self._dense_cache is None or self._dense_cache.shape != (self.num_rows, self.num_cols):
            A = np.zeros((self.num_rows, self.num_cols))
            for i, row in enumerate(self.row_coefs):
                for j, v in row.items():
                    A[i, j] = float(v)
            self._dense_cache = A
        return self._dense_cache

    def row_activity(self, x: Sequence) -> List:
        return [sum(v * x[j] for j, v in row.items()) for row in self.row_coefs]

    def __repr__(self) -> str:
        return f"LinearProgram({self.name!r}, {self.num_rows} rows, {self.num_cols} cols, {self.sense})"


def _check_finite_coef(value, where):
    if isinstance(value, float) and not math.isfinite(value):
        raise ValueError(f"{where}: non-finite coefficient {value!r}")


@dataclass(frozen=True)
class LpBasis:
    head: Tuple[int, ...]
    status: Tuple[int, ...]
    num_structural: int


@dataclass
class LpSolution:
    status: str
    x: Optional[np.ndarray] = None
    objective: Optional[object] = None
    duals: Optional[np.ndarray] = None
    reduced_costs: Optional[np.ndarray] = None
    farkas_ray: Optional[np.ndarray] = None
    basis: Optional[LpBasis] = None
    iterations: int = 0
    mode: str = "float"
    names: Sequence[str] = field(default_factory=tuple, repr=False)

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL

    def value(self, name: str):
        return self.x[list(self.names).index(name)]


# ---------------------------------------------------------------------------
# linear-algebra backends


class _FloatBackend:
    """Basis factorization plus product-form updates.

    The basis is factored by LU (SuperLU above ``SPARSE_ROWS`` rows, dense
    LAPACK below) and each pivot appends an eta column; after
    ``REFACTOR_EVERY`` updates the basis is factored afresh.
    """

    zero = 0.0
    feas_tol = 1e-9
    dual_tol = 1e-9
    pivot_tol = 1e-9
    tie_tol = 1e-12
    SPARSE_ROWS = 120
    REFACTOR_EVERY = 64

    def __init__(self, lp: LinearProgram):
        A = lp.dense_matrix()
        m = A.shape[0]
        self.m = m
        self.sparse = m > self.SPARSE_ROWS
        dense = np.hstack([A, np.eye(m)]) if m else np.zeros((0, A.shape[1]))
        self.full = scipy.sparse.csc_matrix(dense) if self.sparse else dense
        self.full_t = self.full.T.tocsr() if self.sparse else None
        self.b = np.array([float(v) for v in lp.row_rhs])
        self.c = np.array([float(v) for v in lp.col_obj] + [0.0] * m)
        self._lu = None
        self._etas: List[Tuple[int, np.ndarray]] = []

    def vector(self, values):
        return np.array([float(v) for v in values], dtype=float)

    def zeros(self, k):
        return np.zeros(k)

    def factor(self, head):
        self._etas = []
        if self.m == 0:
            self._lu = None
            return
        cols = list(head)
        if self.sparse:
            B = self.full[:, cols].tocsc()
            try:
                lu = scipy.sparse.linalg.splu(B)
            except RuntimeError:
                raise LpError("singular basis") from None
            diag = np.abs(lu.U.diagonal())
            if diag.min() <= 1e-11 * max(1.0, diag.max()):
                raise LpError("singular basis")
            self._lu = lu
            return
        lu, piv = scipy.linalg.lu_factor(self.full[:, cols], check_finite=False)
        diag = np.abs(np.diag(lu))
        if diag.min() <= 1e-11 * max(1.0, diag.max()):
            raise LpError("singular basis")
        self._lu = (lu, piv)

    def needs_refactor(self) -> bool:
        return len(self._etas) >= self.REFACTOR_EVERY

    def update(self, pos: int, alpha: np.ndarray) -> None:
        """Record the pivot that replaces basis position ``pos``; ``alpha``
        is the entering column in the current basis."""
        if abs(alpha[pos]) <= 1e-11:
            raise LpError("tiny pivot")
        eta = -alpha / alpha[pos]
        eta[pos] = 1.0 / alpha[pos]
        self._etas.append((pos, eta))

    def _base(self, rhs, trans: bool):
        if self.sparse:
            return self._lu.solve(np.ascontiguousarray(rhs, dtype=float), trans="T" if trans else "N")
        return scipy.linalg.lu_solve(self._lu, rhs, trans=1 if trans else 0, check_finite=False)

    def solve(self, rhs):
        if self._lu is None:
            return np.zeros(0)
        x = self._base(rhs, False)
        for pos, eta in self._etas:
            xp = x[pos]
            if xp != 0.0:
                x = x + eta * xp
                x[pos] = eta[pos] * xp
        return x

    def solve_t(self, rhs):
        if self._lu is None:
            return np.zeros(0)
        r = np.array(rhs, dtype=float)
        for pos, eta in reversed(self._etas):
            r[pos] = eta @ r
        return self._base(r, True)

    def column(self, j):
        if self.sparse:
            return self.full[:, j].toarray().ravel()
        return self.full[:, j]

    def mult(self, x):
        """``[A I] @ x``."""
        return self.full @ x

    def tmult(self, y):
        """``y @ [A I]``."""
        if self.sparse:
            return self.full_t @ y
        return y @ self.full

    def times_nonbasic(self, x, nonbasic):
        # A' restricted to nonbasic columns times their values
        if not nonbasic:
            return np.zeros(self.m)
        idx = np.fromiter(nonbasic, dtype=int)
        return self.full[:, idx] @ x[idx]

    def price(self, y, c):
        return c - self.tmult(y)


class _ExactBackend:
    zero = Fraction(0)
    feas_tol = 0
    dual_tol = 0
    pivot_tol = 0
    tie_tol = 0

    def __init__(self, lp: LinearProgram):
        n, m = lp.num_cols, lp.num_rows
        self.m = m
        cols: List[Dict[int, Fraction]] = [dict() for _ in range(n)]
        for i, row in enumerate(lp.row_coefs):
            for j, v in row.items():
                cols[j][i] = _exact(v)
        for i in range(m):
            cols.append({i: Fraction(1)})
        self.cols = cols
        self.b = np.array([_exact(v) for v in lp.row_rhs] or [], dtype=object)
        self.c = np.array([_exact(v) for v in lp.col_obj] + [Fraction(0)] * m, dtype=object)
        self._head = None

    def vector(self, values):
        return np.array([_exact(v) if _finite(v) else v for v in values], dtype=object)

    def zeros(self, k):
        return np.array([Fraction(0)] * k, dtype=object)

    def factor(self, head):
        self._head = list(head)

    def _rows_of(self, transpose):
        # row-major dict of B (or B^T); column index = basis position
        rows: List[Dict[int, Fraction]] = [dict() for _ in range(self.m)]
        for pos, j in enumerate(self._head):
            for i, v in self.cols[j].items():
                if transpose:
                    rows[pos][i] = v
                else:
                    rows[i][pos] = v
        return rows

    def solve(self, rhs):
        return _sparse_solve(self._rows_of(False), list(rhs), self.m)

    def solve_t(self, rhs):
        return _sparse_solve(self._rows_of(True), list(rhs), self.m)

    def column(self, j):
        v = self.zeros(self.m)
        for i, a in self.cols[j].items():
            v[i] = a
        return v

    def times_nonbasic(self, x, nonbasic):
        out = self.zeros(self.m)
        for j in nonbasic:
            xj = x[j]
            if xj != 0:
                for i, a in self.cols[j].items():
                    out[i] += a * xj
        return out

    def price(self, y, c):
        d = np.array(list(c), dtype=object)
        for j, col in enumerate(self.cols):
            s = Fraction(0)
            for i, a in col.items():
                s += y[i] * a
            d[j] = c[j] - s
        return d


def _exact(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        return Fraction(v)
    return to_rational(v)


def _finite(v) -> bool:
    return v != INF and v != -INF


def _sparse_solve(rows: List[Dict[int, Fraction]], rhs: List[Fraction], m: int):
    """Solve ``M z = rhs`` exactly, ``M`` given as one dict per row."""
    rows = [dict(r) for r in rows]
    rhs = list(rhs)
    col_rows: Dict[int, set] = {}
    for i, r in enumerate(rows):
        for j in r:
            col_rows.setdefault(j, set()).add(i)
    free_rows = set(range(m))
    free_cols = set(range(m))
    order: List[Tuple[int, int]] = []
    while free_cols:
        j = min(free_cols, key=lambda c: (len(col_rows.get(c, ())), c))
        cand = [i for i in col_rows.get(j, ()) if i in free_rows]
        if not cand:
            raise LpError("singular basis")
        i = min(cand, key=lambda r: (len(rows[r]), r))
        piv = rows[i][j]
        for k in cand:
            if k == i:
                continue
            factor = rows[k][j] / piv
            rk = rows[k]
            for jj, v in rows[i].items():
                nv = rk.get(jj, 0) - factor * v
                if nv == 0:
                    if jj in rk:
                        del rk[jj]
                        col_rows[jj].discard(k)
                else:
                    if jj not in rk:
                        col_rows.setdefault(jj, set()).add(k)
                    rk[jj] = nv
            rhs[k] -= factor * rhs[i]
        free_rows.discard(i)
        free_cols.discard(j)
        for jj in rows[i]:
            col_rows[jj].discard(i)
        order.append((i, j))
    z = [Fraction(0)] * m
    for i, j in reversed(order):
        s = rhs[i]
        for jj, v in rows[i].items():
            if jj != j:
                s -= v * z[jj]
        z[j] = s / rows[i][j]
    return np.array(z, dtype=object)


# ---------------------------------------------------------------------------
# the simplex


class _Simplex:
    def __init__(self, lp: LinearProgram, backend, lower, upper, max_iter):
        self.lp = lp
        self.be = backend
        self.n = lp.num_cols
        self.m = lp.num_rows
        slack_lo, slack_up = [], []
        for sense in lp.row_sense:
            if sense == "<=":
                slack_lo.append(0)
                slack_up.append(INF)
            elif sense == ">=":
                slack_lo.append(-INF)
                slack_up.append(0)
            else:
                slack_lo.append(0)
                slack_up.append(0)
        self.lo = backend.vector(list(lower) + slack_lo)
        self.up = backend.vector(list(upper) + slack_up)
        # the iteration always minimises
        self.c = backend.c if lp.sense == "min" else -backend.c
        self.b = backend.b
        self.max_iter = max_iter
        self.iterations = 0

    # basis bookkeeping ------------------------------------------------------

    def _nonbasic_value(self, j, st):
        if st == AT_LOWER:
            return self.lo[j]
        if st == AT_UPPER:
            return self.up[j]
        return self.be.zero

    def _normalize_status(self, j, st):
        lo, up = self.lo[j], self.up[j]
        if st == AT_LOWER and not _finite(lo):
            st = AT_UPPER if _finite(up) else AT_ZERO
        if st == AT_UPPER and not _finite(up):
            st = AT_LOWER if _finite(lo) else AT_ZERO
        if st == AT_ZERO and (_finite(lo) or _finite(up)):
            st = AT_LOWER if _finite(lo) else AT_UPPER
        return st

    def set_basis(self, basis: Optional[LpBasis]):
        N = self.n + self.m
        if basis is not None and basis.num_structural == self.n and len(basis.head) <= self.m:
            head = list(basis.head)
            status = list(basis.status) + [BASIC] * (N - len(basis.status))
            # rows added since the basis was saved get their slack basic
            old_m = len(basis.head)
            for i in range(old_m, self.m):
                head.append(self.n + i)
        else:
            head, status = self._crash()
        for j in range(N):
            if status[j] != BASIC:
                status[j] = self._normalize_status(j, status[j])
        self.head = head
        self.status = status

    def cold_basis(self):
        self.set_basis(None)

    def _crash(self):
        """Slack basis with structural columns swapped in where that keeps
        the basis triangular: free columns first, equality rows first.

        A column may take row ``r`` only if it has no entry in any row
        already taken, so the chosen block is triangular with a nonzero
        diagonal.
        """
        head = [self.n + i for i in range(self.m)]
        status = [AT_LOWER] * self.n + [BASIC] * self.m
        cols: List[Dict[int, object]] = [dict() for _ in range(self.n)]
        for i, row in enumerate(self.lp.row_coefs):
            for j, v in row.items():
                cols[j][i] = v
        taken = set()

        free = [not _finite(self.lo[j]) and not _finite(self.up[j]) for j in range(self.n)]
        for j in sorted(range(self.n), key=lambda j: (not free[j], len(cols[j]), j)):
            if self.lo[j] == self.up[j] or not cols[j] or taken.intersection(cols[j]):
                continue
            r = min(cols[j], key=lambda i: (self.lp.row_sense[i] != "=", i))
            if self.lp.row_sense[r] != "=" and not free[j]:
                continue
            taken.add(r)
            head[r] = j
            status[j] = BASIC
            status[self.n + r] = AT_LOWER
        return head, status

    # main loop ----------------------------------------------------------------

    def run(self):
        be = self.be
        N = self.n + self.m
        degenerate = 0
        bland = False
        while True:
            be.factor(self.head)
            x = be.zeros(N)
            nonbasic = [j for j in range(N) if self.status[j] != BASIC]
            for j in nonbasic:
                x[j] = self._nonbasic_value(j, self.status[j])
            xb = be.solve(self.b - be.times_nonbasic(x, nonbasic))
            for pos, j in enumerate(self.head):
                x[j] = xb[pos]
            self.x = x

            cost_b = be.zeros(self.m)
            infeasible = False
            for pos, j in enumerate(self.head):
                if x[j] < self.lo[j] - be.feas_tol:
                    cost_b[pos] = -1
                    infeasible = True
                elif x[j] > self.up[j] + be.feas_tol:
                    cost_b[pos] = 1
                    infeasible = True
            phase1 = infeasible
            if not phase1:
                cost_b = np.array([self.c[j] for j in self.head], dtype=self.c.dtype)
            y = be.solve_t(cost_b)
            cvec = be.zeros(N) if phase1 else self.c
            d = be.price(y, cvec)
            self.y, self.d, self.phase1 = y, d, phase1

            q, sigma = self._choose_entering(d, bland)
            if q is None:
                return INFEASIBLE if phase1 else OPTIMAL
            if self.iterations >= self.max_iter:
                return ITERATION_LIMIT
            self.iterations += 1

            alpha = be.solve(be.column(q))
            step, leave_pos, leave_status = self._ratio_test(x, alpha, q, sigma, phase1, bland)
            if step is None:
                if phase1:
                    raise LpError("phase 1 direction without breakpoint")
                return UNBOUNDED
            if step <= be.tie_tol:
                degenerate += 1
                if degenerate > 30:
                    bland = True
            else:
                degenerate = 0
                bland = False
            if leave_pos is None:
                self.status[q] = AT_UPPER if sigma > 0 else AT_LOWER
            else:
                leaving = self.head[leave_pos]
                self.status[leaving] = leave_status
                self.head[leave_pos] = q
                self.status[q] = BASIC

    def _choose_entering(self, d, bland):
        be = self.be
        best, best_sigma, best_score = None, 0, None
        for j in range(self.n + self.m):
            st = self.status[j]
            if st == BASIC:
                continue
            dj = d[j]
            if st == AT_LOWER:
                if not dj < -be.dual_tol or not self.up[j] > self.lo[j]:
                    continue
                sigma = 1
            elif st == AT_UPPER:
                if not dj > be.dual_tol or not self.up[j] > self.lo[j]:
                    continue
                sigma = -1
            else:
                if dj < -be.dual_tol:
                    sigma = 1
                elif dj > be.dual_tol:
                    sigma = -1
                else:
                    continue
            if bland:
                return j, sigma
            score = abs(dj)
            if best is None or score > best_score:
                best, best_sigma, best_score = j, sigma, score
        return best, best_sigma

    def _ratio_test(self, x, alpha, q, sigma, phase1, bland):
        be = self.be
        best_t = None
        if _finite(self.lo[q]) and _finite(self.up[q]):
            best_t = self.up[q] - self.lo[q]
        cands = []
        for pos, j in enumerate(self.head):
            rate = -sigma * alpha[pos]
            if abs(rate) <= be.pivot_tol:
                continue
            xj, lo, up = x[j], self.lo[j], self.up[j]
            below = phase1 and xj < lo - be.feas_tol
            above = phase1 and xj > up + be.feas_tol
            if below:
                if rate > 0:
                    cands.append(((lo - xj) / rate, pos, AT_LOWER, rate))
            elif above:
                if rate < 0:
                    cands.append(((up - xj) / rate, pos, AT_UPPER, rate))
            elif rate < 0:
                if _finite(lo):
                    t = (xj - lo) / (-rate)
                    cands.append((t if t > 0 else be.zero, pos, AT_LOWER, rate))
            else:
                if _finite(up):
                    t = (up - xj) / rate
                    cands.append((t if t > 0 else be.zero, pos, AT_UPPER, rate))
        if not cands:
            if best_t is None:
                return None, None, None
            return best_t, None, None
        tmin = min(c[0] for c in cands)
        if best_t is not None and best_t <= tmin:
            return best_t, None, None
        ties = [c for c in cands if c[0] <= tmin + be.tie_tol]
        if bland:
            chosen = min(ties, key=lambda c: self.head[c[1]])
        else:
            chosen = max(ties, key=lambda c: (abs(c[3]), -self.head[c[1]]))
        t, pos, st, _ = chosen
        if self.lo[self.head[pos]] == self.up[self.head[pos]]:
            st = AT_LOWER
        return t, pos, st

    def basis(self) -> LpBasis:
        return LpBasis(tuple(self.head), tuple(self.status), self.n)


class _FloatSimplex(_Simplex):
    """Same iteration as :class:`_Simplex`, vectorised over numpy arrays."""

    def run(self):
        be = self.be
        lo, up, c, b = self.lo, self.up, self.c, self.b
        tol, dtol, ptol = be.feas_tol, be.dual_tol, be.pivot_tol
        movable = up > lo
        lo_fin, up_fin = np.isfinite(lo), np.isfinite(up)
        st = np.array(self.status, dtype=np.int8)
        head = np.array(self.head, dtype=int)
        degenerate = 0
        bland = False
        be.factor(head)
        try:
            while True:
                if be.needs_refactor():
                    be.factor(head)
                x = np.where(st == AT_LOWER, lo, np.where(st == AT_UPPER, up, 0.0))
                x[head] = be.solve(b - be.mult(x))
                xh, lh, uh = x[head], lo[head], up[head]
                below = xh < lh - tol
                above = xh > uh + tol
                phase1 = bool(below.any() or above.any())
                if phase1:
                    y = be.solve_t(above.astype(float) - below.astype(float))
                    d = -be.tmult(y)
                else:
                    y = be.solve_t(c[head])
                    d = c - be.tmult(y)
                self.x, self.y, self.d, self.phase1 = x, y, d, phase1

                cand = (((st == AT_LOWER) & (d < -dtol) & movable)
                        | ((st == AT_UPPER) & (d > dtol) & movable)
                        | ((st == AT_ZERO) & (np.abs(d) > dtol)))
                if not cand.any():
                    return INFEASIBLE if phase1 else OPTIMAL
                if self.iterations >= self.max_iter:
                    return ITERATION_LIMIT
                self.iterations += 1
                if bland:
                    q = int(np.flatnonzero(cand)[0])
                else:
                    q = int(np.argmax(np.where(cand, np.abs(d), -1.0)))
                sigma = 1 if d[q] < 0 else -1

                alpha = be.solve(be.column(q))
                rate = -sigma * alpha
                valid = np.abs(rate) > ptol
                normal = ~below & ~above
                safe = np.where(valid, rate, 1.0)
                t = np.full(len(head), np.inf)
                leave = np.full(len(head), AT_LOWER, dtype=np.int8)
                m1 = valid & below & (rate > 0)
                m2 = valid & above & (rate < 0)
                m3 = valid & normal & (rate < 0) & lo_fin[head]
                m4 = valid & normal & (rate > 0) & up_fin[head]
                with np.errstate(invalid="ignore"):
                    t[m1] = ((lh - xh) / safe)[m1]
                    t[m2] = ((uh - xh) / safe)[m2]
                    leave[m2] = AT_UPPER
                    t[m3] = np.maximum((xh - lh) / -safe, 0.0)[m3]
                    t[m4] = np.maximum((uh - xh) / safe, 0.0)[m4]
                    leave[m4] = AT_UPPER
                has = m1 | m2 | m3 | m4
                flip = (up[q] - lo[q]) if (lo_fin[q] and up_fin[q]) else None
                if not has.any():
                    if flip is None:
                        if phase1:
                            raise LpError("phase 1 direction without breakpoint")
                        return UNBOUNDED
                    step, pos = flip, None
                else:
                    tmin = t[has].min()
                    if flip is not None and flip <= tmin:
                        step, pos = flip, None
                    else:
                        ties = np.flatnonzero(has & (t <= tmin + be.tie_tol))
                        if bland:
                            pos = int(ties[np.argmin(head[ties])])
                        else:
                            order = np.lexsort((head[ties], -np.abs(rate[ties])))
                            pos = int(ties[order[0]])
                        step = t[pos]
                if step <= be.tie_tol:
                    degenerate += 1
                    if degenerate > 30:
                        bland = True
                else:
                    degenerate = 0
                    bland = False
                if pos is None:
                    st[q] = AT_UPPER if sigma > 0 else AT_LOWER
                else:
                    leaving = head[pos]
                    st[leaving] = AT_LOWER if lo[leaving] == up[leaving] else leave[pos]
                    head[pos] = q
                    st[q] = BASIC
                    try:
                        be.update(pos, alpha)
                    except LpError:
                        be.factor(head)
        finally:
            self.status = [int(v) for v in st]
            self.head = [int(v) for v in head]


def solve_lp(lp: LinearProgram, mode: str = "float", *, lower=None, upper=None,
             basis: Optional[LpBasis] = None, max_iter: Optional[int] = None,
             exact_column_cap: int = 60) -> LpSolution:
    """Solve ``lp``; ``lower``/``upper`` override the stored column bounds.

    ``mode="exact"`` returns ``Fraction`` values and is limited to
    ``exact_column_cap`` structural columns.
    """
    if mode not in ("float", "exact"):
        raise ValueError(f"mode must be 'float' or 'exact', got {mode!r}")
    lower = list(lp.col_lower if lower is None else lower)
    upper = list(lp.col_upper if upper is None else upper)
    if len(lower) != lp.num_cols or len(upper) != lp.num_cols:
        raise ValueError("bound override length does not match column count")
    for j in range(lp.num_cols):
        if lower[j] > upper[j]:
            # empty column box; no row multipliers needed
            return LpSolution(status=INFEASIBLE, mode=mode, names=tuple(lp.col_names),
                              farkas_ray=np.zeros(lp.num_rows))
    if max_iter is None:
        max_iter = 50 * (lp.num_rows + lp.num_cols) + 50
    if mode == "exact":
        if lp.num_cols > exact_column_cap:
            raise ValueError(f"exact mode limited to {exact_column_cap} columns, "
                             f"got {lp.num_cols}")
        warm = solve_lp(lp, "float", lower=lower, upper=upper, basis=basis, max_iter=max_iter)
        sim = _Simplex(lp, _ExactBackend(lp), lower, upper, max_iter)
        sim.set_basis(warm.basis)
        try:
            status = sim.run()
        except LpError:
            sim.cold_basis()
            status = sim.run()
        return _package(lp, sim, status, "exact")
    sim = _FloatSimplex(lp, _FloatBackend(lp), lower, upper, max_iter)
    sim.set_basis(basis)
    try:
        status = sim.run()
    except LpError:
        if basis is None:
            raise
        sim.cold_basis()
        status = sim.run()
    return _package(lp, sim, status, "float")


def _package(lp, sim: _Simplex, status, mode) -> LpSolution:
    n = lp.num_cols
    sign = 1 if lp.sense == "min" else -1
    sol = LpSolution(status=status, iterations=sim.iterations, mode=mode,
                     names=tuple(lp.col_names), basis=sim.basis())
    if status == OPTIMAL:
        x = sim.x[:n]
        sol.x = x
        obj = sum((sim.c[j] * x[j] for j in range(n)), sim.be.zero)
        sol.objective = sign * obj + (_exact(lp.objective_offset) if mode == "exact"
                                      else float(lp.objective_offset))
        sol.duals = sign * sim.y
        sol.reduced_costs = sign * sim.d[:n]
    elif status == INFEASIBLE:
        sol.farkas_ray = -sim.y
    return sol


def check_farkas(lp: LinearProgram, ray: Sequence, lower=None, upper=None,
                 tol: float = 1e-7) -> bool:
    """True if ``ray`` proves ``lp`` infeasible.

    The aggregated row ``ray^T A x <= ray^T b`` is implied by the rows
    (``ray`` is >= 0 on ``<=`` rows, <= 0 on ``>=`` rows) and its left side is
    bounded below over the column box by more than the right side.
    """
    lower = list(lp.col_lower if lower is None else lower)
    upper = list(lp.col_upper if upper is None else upper)
    for lam, sense in zip(ray, lp.row_sense):
        if sense == "<=" and lam < -tol:
            return False
        if sense == ">=" and lam > tol:
            return False
    g = [0.0] * lp.num_cols
    for lam, row in zip(ray, lp.row_coefs):
        for j, v in row.items():
            g[j] += float(lam) * float(v)
    rhs = sum(float(lam) * float(b) for lam, b in zip(ray, lp.row_rhs))
    amax = max((abs(float(v)) for row in lp.row_coefs for v in row.values()), default=1.0)
    zero = 1e-11 * (1.0 + max((abs(float(v)) for v in ray), default=0.0)) * max(1.0, amax)
    lo_sum = 0.0
    for j, gj in enumerate(g):
        if abs(gj) <= zero:
            continue
        bound = lower[j] if gj > 0 else upper[j]
        if not _finite(bound):
            return False
        lo_sum += gj * float(bound)
    scale = 1.0 + max((abs(v) for v in g), default=0.0)
    return lo_sum > rhs + tol * scale


# ---------------------------------------------------------------------------
# LP text dump (CPLEX-style layout)

_TERM = re.compile(r"([+-])\s*(\S+)\s+(\S+)")


def _fmt_coef(v) -> str:
    if isinstance(v, Fraction):
        return format_rational(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _fmt_bound(v) -> str:
    if v == INF:
        return "+inf"
    if v == -INF:
        return "-inf"
    return _fmt_coef(v)


def _fmt_terms(items: Iterable[Tuple[str, object]]) -> str:
    parts = []
    for name, v in items:
        neg = v < 0
        mag = -v if neg else v
        parts.append(f"{'-' if neg else '+'} {_fmt_coef(mag)} {name}")
    return " ".join(parts) if parts else "+ 0 __zero__"


def write_lp_text(lp: LinearProgram) -> str:
    lines = [f"\\ {lp.name}"]
    if lp.objective_offset:
        lines.append(f"\\ offset: {_fmt_coef(lp.objective_offset)}")
    lines.append("Minimize" if lp.sense == "min" else "Maximize")
    obj = [(lp.col_names[j], v) for j, v in enumerate(lp.col_obj) if v != 0]
    lines.append(f" obj: {_fmt_terms(obj)}")
    lines.append("Subject To")
    for i, name in enumerate(lp.row_names):
        terms = [(lp.col_names[j], v) for j, v in sorted(lp.row_coefs[i].items())]
        lines.append(f" {name}: {_fmt_terms(terms)} {lp.row_sense[i]} {_fmt_coef(lp.row_rhs[i])}")
    lines.append("Bounds")
    for j, name in enumerate(lp.col_names):
        lo, up = lp.col_lower[j], lp.col_upper[j]
        if lo == -INF and up == INF:
            lines.append(f" {name} free")
        else:
            lines.append(f" {_fmt_bound(lo)} <= {name} <= {_fmt_bound(up)}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def _parse_number(tok: str):
    if tok in ("+inf", "inf", "+infinity", "infinity"):
        return INF
    if tok in ("-inf", "-infinity"):
        return -INF
    if "/" in tok:
        return Fraction(tok)
    if re.fullmatch(r"[+-]?\d+", tok):
        return int(tok)
    return Fraction(tok)


def read_lp_text(text: str) -> LinearProgram:
    """Parse the layout produced by :func:`write_lp_text`.

    Numbers are read exactly (decimal strings become ``Fraction``).
    """
    section = None
    sense = "min"
    offset = 0
    name = "lp"
    obj_terms: List[Tuple[str, object]] = []
    rows: List[Tuple[str, List[Tuple[str, object]], str, object]] = []
    bounds: Dict[str, Tuple[object, object]] = {}
    order: List[str] = []
    listed: List[str] = []  # column order of the Bounds section

    def note(col):
        if col != "__zero__" and col not in bounds:
            bounds[col] = (0, INF)
            order.append(col)

    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            body = line[1:].strip()
            if body.startswith("offset:"):
                offset = _parse_number(body.split(":", 1)[1].strip())
            elif section is None and body:
                name = body
            continue
        low = line.lower()
        if low in ("minimize", "maximize"):
            sense = "min" if low == "minimize" else "max"
            section = "obj"
            continue
        if low == "subject to":
            section = "rows"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low == "end":
            break
        if section == "obj":
            body = line.split(":", 1)[1]
            obj_terms = [(c, s) for c, s in _parse_terms(body)]
            for c, _ in obj_terms:
                note(c)
        elif section == "rows":
            rname, body = line.split(":", 1)
            m = re.search(r"\s(<=|>=|=)\s+(\S+)\s*$", body)
            if not m:
                raise ValueError(f"cannot parse row {raw!r}")
            terms = _parse_terms(body[:m.start()])
            for c, _ in terms:
                note(c)
            rows.append((rname.strip(), terms, m.group(1), _parse_number(m.group(2))))
        elif section == "bounds":
            toks = line.split()
            if len(toks) == 2 and toks[1] == "free":
                note(toks[0])
                listed.append(toks[0])
                bounds[toks[0]] = (-INF, INF)
            elif len(toks) == 5 and toks[1] == "<=" and toks[3] == "<=":
                note(toks[2])
                listed.append(toks[2])
                bounds[toks[2]] = (_parse_number(toks[0]), _parse_number(toks[4]))
            else:
                raise ValueError(f"cannot parse bound {raw!r}")
    lp = LinearProgram(sense, name)
    seen = set(listed)
    for col in listed + [c for c in order if c not in seen]:
        lo, up = bounds[col]
        lp.add_column(col, lo, up)
    lp.set_objective({c: v for c, v in obj_terms if c != "__zero__"}, offset)
    for rname, terms, s, rhs in rows:
        lp.add_row(rname, {c: v for c, v in terms if c != "__zero__"}, s, rhs)
    return lp


def _parse_terms(body: str) -> List[Tuple[str, object]]:
    out = []
    for sgn, coef, col in _TERM.findall(body):
        v = _parse_number(coef)
        out.append((col, -v if sgn == "-" else v))
    return out
