"""Sparse linear programs and a bounded-variable revised simplex solver.

Models are immutable values: a column list with bounds and costs plus sparse
constraint rows ``A x (<=|=|>=) b``. :func:`solve_lp` minimizes.

The solver works on the bounded standard form ``A x + s = b``. When every
column can sit on the bound its cost favours, it starts from the slack basis
with slightly perturbed costs and runs a dual simplex; otherwise it runs a
two-phase primal simplex on slightly widened bounds. Either way the
perturbation is then removed and a short primal/dual clean-up restores exact
optimality for the true data.

The basis is factored with SuperLU (only its structural block; slack columns
are unit vectors) and updated in product form between refactorizations.
Primal pricing is Dantzig with a Harris ratio test; after ``stall_limit``
consecutive degenerate pivots it switches to Bland's rule until the objective
moves again.
"""
from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .kernels import AT_LOWER, AT_UPPER, BASIC, FIXED, FREE

LE, EQ, GE = -1, 0, 1
_SENSE_TEXT = {LE: "<=", EQ: "=", GE: ">="}

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
HARRIS_TOL = 1e-9


class LpFormatError(ValueError):
    """The model is malformed (shapes, bounds, names or coefficients)."""


# --- model ----------------------------------------------------------------------


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LpModel:
    names: tuple
    lower: np.ndarray
    upper: np.ndarray
    cost: np.ndarray
    A: sp.csr_matrix
    sense: np.ndarray
    rhs: np.ndarray
    row_names: tuple = ()
    obj_offset: float = 0.0

    def __post_init__(self):
        n = len(self.names)
        set_ = object.__setattr__
        set_(self, "names", tuple(self.names))
        set_(self, "lower", _frozen(self.lower, float))
        set_(self, "upper", _frozen(self.upper, float))
        set_(self, "cost", _frozen(self.cost, float))
        set_(self, "sense", _frozen(self.sense, np.int8))
        set_(self, "rhs", _frozen(self.rhs, float))
        A = sp.csr_matrix(self.A, dtype=float)
        A.sum_duplicates()
        A.sort_indices()
        set_(self, "A", A)
        m = A.shape[0]
        if self.lower.shape != (n,) or self.upper.shape != (n,) or self.cost.shape != (n,):
            raise LpFormatError("bounds and costs must have one entry per variable")
        if A.shape[1] != n:
            raise LpFormatError(f"constraint matrix has {A.shape[1]} columns for {n} variables")
        if self.sense.shape != (m,) or self.rhs.shape != (m,):
            raise LpFormatError("sense and rhs must have one entry per row")
        if self.row_names and len(self.row_names) != m:
            raise LpFormatError("row_names length mismatch")
        if len(set(self.names)) != n:
            raise LpFormatError("duplicate variable names")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise LpFormatError("NaN bound")
        if np.any(self.lower > self.upper):
            bad = int(np.flatnonzero(self.lower > self.upper)[0])
            raise LpFormatError(f"variable {self.names[bad]!r} has lower > upper")
        if np.any(self.lower == np.inf) or np.any(self.upper == -np.inf):
            raise LpFormatError("infinite bound on the wrong side")
        if not np.all(np.isfinite(A.data)):
            raise LpFormatError("non-finite constraint coefficient")
        if not np.all(np.isfinite(self.cost)) or not np.all(np.isfinite(self.rhs)):
            raise LpFormatError("non-finite cost or right-hand side")
        if not np.all(np.isin(self.sense, (LE, EQ, GE))):
            raise LpFormatError("unknown row sense")

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def nnz(self) -> int:
        return self.A.nnz

    @cached_property
    def _index(self) -> dict:
        return {name: j for j, name in enumerate(self.names)}

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown variable {name!r}") from None

    def with_bounds(self, cols, lower=None, upper=None) -> "LpModel":
        """Copy with new bounds on ``cols`` (scalars broadcast)."""
        lo = np.array(self.lower)
        hi = np.array(self.upper)
        if lower is not None:
            lo[cols] = lower
        if upper is not None:
            hi[cols] = upper
        return dataclasses.replace(self, lower=lo, upper=hi)

    def equals(self, other: "LpModel") -> bool:
        return (
            self.names == other.names
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
            and np.array_equal(self.cost, other.cost)
            and np.array_equal(self.sense, other.sense)
            and np.array_equal(self.rhs, other.rhs)
            and self.A.shape == other.A.shape
            and (self.A != other.A).nnz == 0
            and self.obj_offset == other.obj_offset
        )

    __eq__ = equals
    __hash__ = None

    def activity(self, x) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float)

    def objective(self, x) -> float:
        return float(self.cost @ np.asarray(x, dtype=float)) + self.obj_offset

    def max_violation(self, x, scaled: bool = True) -> float:
        """Largest bound or row violation of point ``x``.

        With ``scaled`` each row is divided by its largest absolute coefficient.
        """
        x = np.asarray(x, dtype=float)
        viol = 0.0
        if x.size:
            viol = max(float(np.max(self.lower - x, initial=0.0)),
                       float(np.max(x - self.upper, initial=0.0)))
        if self.n_rows:
            act = self.A @ x
            scale = np.ones(self.n_rows)
            if scaled:
                rowmax = abs(self.A).max(axis=1).toarray().ravel()
                scale = np.where(rowmax > 0, 1.0 / np.where(rowmax > 0, rowmax, 1.0), 1.0)
            r = (act - self.rhs) * scale
            v = np.where(self.sense == LE, r, np.where(self.sense == GE, -r, np.abs(r)))
            viol = max(viol, float(v.max(initial=0.0)))
        return viol


class LpBuilder:
    """Accumulates columns and rows, then freezes them into an :class:`LpModel`."""

    def __init__(self):
        self.names: list[str] = []
        self._lo: list[float] = []
        self._hi: list[float] = []
        self._cost: list[float] = []
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self._sense: list[int] = []
        self._rhs: list[float] = []
        self.row_names: list[str] = []
        self.obj_offset = 0.0

    @classmethod
    def from_model(cls, model: LpModel) -> "LpBuilder":
        b = cls()
        b.names = list(model.names)
        b._lo = list(model.lower)
        b._hi = list(model.upper)
        b._cost = list(model.cost)
        coo = model.A.tocoo()
        b._rows.append(coo.row.astype(np.int64))
        b._cols.append(coo.col.astype(np.int64))
        b._vals.append(coo.data.copy())
        b._sense = list(model.sense)
        b._rhs = list(model.rhs)
        b.row_names = list(model.row_names) if model.row_names else [f"r{i}" for i in range(model.n_rows)]
        b.obj_offset = model.obj_offset
        return b

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return len(self._sense)

    def add_var(self, name: str, lo: float = 0.0, hi: float = math.inf, cost: float = 0.0) -> int:
        self.names.append(name)
        self._lo.append(lo)
        self._hi.append(hi)
        self._cost.append(cost)
        return len(self.names) - 1

    def add_row(self, cols, vals, sense: int, rhs: float, name: str | None = None) -> int:
        i = len(self._sense)
        cols = np.asarray(cols, dtype=np.int64)
        self._rows.append(np.full(cols.shape, i, dtype=np.int64))
        self._cols.append(cols)
        self._vals.append(np.asarray(vals, dtype=float))
        self._sense.append(sense)
        self._rhs.append(float(rhs))
        self.row_names.append(name if name is not None else f"r{i}")
        return i

    def build(self) -> LpModel:
        m = len(self._sense)
        if self._rows:
            rows = np.concatenate(self._rows)
            cols = np.concatenate(self._cols)
            vals = np.concatenate(self._vals)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
        A = sp.csr_matrix((vals, (rows, cols)), shape=(m, len(self.names)))
        return LpModel(self.names, self._lo, self._hi, self._cost, A,
                       self._sense, self._rhs, tuple(self.row_names), self.obj_offset)


def fix_variable(model: LpModel, name: str, value: float) -> LpModel:
    """Return a copy of ``model`` with ``name`` pinned to ``value``."""
    j = model.index(name)
    if not (model.lower[j] <= value <= model.upper[j]):
        raise ValueError(
            f"value {value} outside bounds [{model.lower[j]}, {model.upper[j]}] of {name!r}")
    return model.with_bounds([j], value, value)


# --- solution -------------------------------------------------------------------


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | iteration_limit
    objective: float
    x: np.ndarray
    iterations: int = 0
    wall_time: float = 0.0
    stats: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# --- presolve -------------------------------------------------------------------


class _Infeasible(Exception):
    pass


def _presolve(model: LpModel):
    """Drop fixed columns and empty rows; turn singleton rows into bounds.

    Returns ``(cols, rows, lo, hi, rhs, offset)`` describing the reduced
    problem, where ``cols``/``rows`` index the surviving columns and rows.
    """
    A = model.A
    m, n = A.shape
    lo = np.array(model.lower)
    hi = np.array(model.upper)
    rhs = np.array(model.rhs)
    sense = model.sense
    col_on = np.ones(n, dtype=bool)
    row_on = np.ones(m, dtype=bool)
    pattern = A.copy()
    pattern.data = np.ones_like(pattern.data)
    offset = 0.0

    while True:
        changed = False
        fixed = col_on & (lo == hi)
        if fixed.any():
            idx = np.flatnonzero(fixed)
            rhs -= A[:, idx] @ lo[idx]
            offset += float(model.cost[idx] @ lo[idx])
            col_on[idx] = False
            changed = True

        counts = pattern @ col_on.astype(float)
        empty = row_on & (counts == 0)
        if empty.any():
            r = rhs[empty]
            s = sense[empty]
            bad = ((s == LE) & (r < -FEAS_TOL)) | ((s == GE) & (r > FEAS_TOL)) | (
                (s == EQ) & (np.abs(r) > FEAS_TOL))
            if bad.any():
                raise _Infeasible
            row_on[empty] = False

        single = np.flatnonzero(row_on & (counts == 1))
        if single.size:
            sub = A[single].multiply(col_on[None, :]).tocsr()
            sub.eliminate_zeros()
            j = sub.indices
            a = sub.data
            ok = np.abs(a) > 1e-9
            rows_ok = single[ok]
            j, a = j[ok], a[ok]
            if rows_ok.size:
                val = rhs[rows_ok] / a
                s = sense[rows_ok]
                up = (s == EQ) | ((s == LE) & (a > 0)) | ((s == GE) & (a < 0))
                dn = (s == EQ) | ((s == LE) & (a < 0)) | ((s == GE) & (a > 0))
                np.minimum.at(hi, j[up], val[up])
                np.maximum.at(lo, j[dn], val[dn])
                if np.any(lo[j] > hi[j] + FEAS_TOL):
                    raise _Infeasible
                # snap near-equal bounds together so the column is fixed next pass
                fin = np.isfinite(hi[j])
                near = fin & (lo[j] >= np.where(fin, hi[j], 0.0) - 1e-12 * np.maximum(1.0, np.abs(np.where(fin, hi[j], 0.0))))
                jj = j[near]
                v = np.where(lo[jj] > hi[jj], 0.5 * (lo[jj] + hi[jj]), lo[jj])
                lo[jj] = hi[jj] = v
                row_on[rows_ok] = False
                changed = True
        if not changed:
            break
    return np.flatnonzero(col_on), np.flatnonzero(row_on), lo, hi, rhs, offset


# --- simplex ---------------------------------------------------------------------


def _initial_value(lo, hi):
    if np.isfinite(lo):
        return lo, AT_LOWER
    if np.isfinite(hi):
        return hi, AT_UPPER
    return 0.0, FREE


class _Singular(Exception):
    pass


class _Simplex:
    """Bounded primal simplex over ``[A | unit columns]``.

    Slack and artificial columns are signed unit vectors. A basis is factored
    as its structural block ``A[T, C]`` alone, where ``T`` are the rows not
    covered by a basic unit column, so the LU stays as small as the number of
    basic structural columns.
    """

    def __init__(self, A, b, lo, hi, unit_row, unit_sign, refactor_every, stall_limit, max_iter):
        self.m, self.n = A.shape
        self.A = A.tocsc()
        self.b = b
        self.lo = lo
        self.hi = hi
        self.unit_row = unit_row
        self.unit_sign = unit_sign
        self.refactor_every = refactor_every
        self.stall_limit = stall_limit
        self.max_iter = max_iter
        self.iterations = 0
        self.refactors = 0
        k = refactor_every
        self.eta_r = np.zeros(k, dtype=np.int64)
        self.eta_piv = np.zeros(k)
        self.eta_ptr = np.zeros(k + 1, dtype=np.int64)
        self.eta_idx = np.zeros(max(16, k * 64), dtype=np.int64)
        self.eta_val = np.zeros(self.eta_idx.size)
        self.n_eta = 0

    # basis algebra
    def column(self, j):
        A = self.A
        v = np.zeros(self.m)
        s, e = A.indptr[j], A.indptr[j + 1]
        v[A.indices[s:e]] = A.data[s:e]
        return v

    def refactor(self):
        basis = self.basis
        urow = self.unit_row[basis]
        unit = urow >= 0
        self.pos_unit = np.flatnonzero(unit)
        self.pos_struct = np.flatnonzero(~unit)
        self.rows_u = urow[unit]
        self.sign_u = self.unit_sign[basis[unit]]
        covered = np.zeros(self.m, dtype=bool)
        covered[self.rows_u] = True
        if np.count_nonzero(covered) != self.rows_u.size:
            raise _Singular
        self.rows_t = np.flatnonzero(~covered)
        if self.rows_t.size != self.pos_struct.size:
            raise _Singular
        self.A_C = self.A[:, basis[self.pos_struct]].tocsc()
        self.lu = None
        if self.pos_struct.size:
            A_TC = self.A_C[self.rows_t].tocsc()
            try:
                self.lu = splu(A_TC, permc_spec="COLAMD")
            except RuntimeError as exc:
                raise _Singular from exc
        self.A_CT = self.A_C.T.tocsr()
        self.n_eta = 0
        self.refactors += 1
        xn = np.where(self.status == BASIC, 0.0, self.x)
        self.xb = self.solve_b0(self.b - self.A @ xn)
        self.lbb = self.lo[basis].copy()
        self.ubb = self.hi[basis].copy()

    def solve_b0(self, r):
        v = np.empty(self.m)
        if self.lu is not None:
            xc = self.lu.solve(r[self.rows_t])
            v[self.pos_struct] = xc
            t = self.A_C @ xc
            v[self.pos_unit] = self.sign_u * (r[self.rows_u] - t[self.rows_u])
        else:
            v[self.pos_unit] = self.sign_u * r[self.rows_u]
        return v

    def solve_b0t(self, w):
        y = np.zeros(self.m)
        y[self.rows_u] = self.sign_u * w[self.pos_unit]
        if self.lu is not None:
            rhs = w[self.pos_struct] - self.A_CT @ y
            y[self.rows_t] = self.lu.solve(rhs, trans="T")
        return y

    def ftran(self, v):
        v = self.solve_b0(v)
        return kernels.ftran_etas(v, self.eta_r, self.eta_piv, self.eta_ptr, self.eta_idx,
                                  self.eta_val, self.n_eta)

    def btran(self, w):
        w = kernels.btran_etas(np.array(w, dtype=float), self.eta_r, self.eta_piv, self.eta_ptr,
                               self.eta_idx, self.eta_val, self.n_eta)
        return self.solve_b0t(w)

    def push_eta(self, r, alpha):
        nz = np.flatnonzero(np.abs(alpha) > 1e-13)
        nz = nz[nz != r]
        k = self.n_eta
        start = self.eta_ptr[k]
        end = start + nz.size
        if end > self.eta_idx.size:
            grow = max(end, 2 * self.eta_idx.size)
            self.eta_idx = np.resize(self.eta_idx, grow)
            self.eta_val = np.resize(self.eta_val, grow)
        self.eta_idx[start:end] = nz
        self.eta_val[start:end] = alpha[nz]
        self.eta_r[k] = r
        self.eta_piv[k] = alpha[r]
        self.eta_ptr[k + 1] = end
        self.n_eta = k + 1

    def sync(self):
        self.x[self.basis] = self.xb

    def run(self, cost):
        """Minimize ``cost @ x`` from the current basis. Returns a status string."""
        A_T = self.A.T.tocsr()
        stall = 0
        bland = False
        while True:
            if self.iterations >= self.max_iter:
                self.sync()
                return "iteration_limit"
            y = self.btran(cost[self.basis])
            d = cost - A_T @ y
            q, direction = kernels.select_entering(d, self.status, OPT_TOL, bland)
            if q < 0:
                self.sync()
                return "optimal"
            alpha = self.ftran(self.column(q))
            r, step, to_upper = kernels.ratio_test(
                self.xb, self.lbb, self.ubb, alpha, direction, self.basis,
                HARRIS_TOL, PIVOT_TOL, bland)
            span = self.hi[q] - self.lo[q]
            self.iterations += 1
            if span <= step:
                # bound flip, basis unchanged
                if not np.isfinite(span):
                    self.sync()
                    return "unbounded"
                self.xb -= direction * span * alpha
                if self.status[q] == AT_LOWER:
                    self.x[q], self.status[q] = self.hi[q], AT_UPPER
                else:
                    self.x[q], self.status[q] = self.lo[q], AT_LOWER
                stall, bland = 0, False
                continue
            if r < 0:
                self.sync()
                return "unbounded"
            self.xb -= direction * step * alpha
            entering_value = self.x[q] + direction * step
            leaving = self.basis[r]
            if to_upper:
                self.x[leaving], self.status[leaving] = self.hi[leaving], AT_UPPER
            else:
                self.x[leaving], self.status[leaving] = self.lo[leaving], AT_LOWER
            if self.lo[leaving] == self.hi[leaving]:
                self.status[leaving] = FIXED
            self.basis[r] = q
            self.status[q] = BASIC
            self.xb[r] = entering_value
            self.lbb[r] = self.lo[q]
            self.ubb[r] = self.hi[q]
            if step <= 1e-12:
                stall += 1
                if stall > self.stall_limit:
                    bland = True
            else:
                stall, bland = 0, False
            if self.n_eta == self.refactor_every:
                self.refactor()
            else:
                self.push_eta(r, alpha)

    def dual_run(self, cost):
        """Bounded dual simplex from a dual feasible basis; clears primal infeasibility."""
        A_T = self.A.T.tocsr()
        e = np.zeros(self.m)
        d = None
        while True:
            if self.iterations >= self.max_iter:
                self.sync()
                return "iteration_limit"
            if d is None or self.n_eta == 0:
                d = cost - A_T @ self.btran(cost[self.basis])
            below = self.lbb - self.xb
            above = self.xb - self.ubb
            viol = np.maximum(below, above)
            r = int(np.argmax(viol))
            if viol[r] <= FEAS_TOL:
                self.sync()
                return "optimal"
            increase = below[r] > 0
            target = self.lbb[r] if increase else self.ubb[r]
            e[:] = 0.0
            e[r] = 1.0
            row = A_T @ self.btran(e)
            st = self.status
            g = -row if increase else row
            cand = (((st == AT_LOWER) & (g > PIVOT_TOL)) | ((st == AT_UPPER) & (g < -PIVOT_TOL))
                    | ((st == FREE) & (np.abs(row) > PIVOT_TOL)))
            if not cand.any():
                self.sync()
                return "infeasible"
            idx = np.flatnonzero(cand)
            ratio = np.abs(d[idx]) / np.abs(row[idx])
            ties = idx[ratio <= ratio.min() + 1e-12]
            q = int(ties[np.argmax(np.abs(row[ties]))])
            alpha = self.ftran(self.column(q))
            if abs(alpha[r]) <= PIVOT_TOL:
                self.refactor()
                continue
            delta = (self.xb[r] - target) / alpha[r]
            self.iterations += 1
            self.xb -= delta * alpha
            entering_value = self.x[q] + delta
            leaving = self.basis[r]
            d -= (d[q] / row[q]) * row
            d[q] = 0.0
            self.x[leaving] = target
            self.status[leaving] = (FIXED if self.lo[leaving] == self.hi[leaving]
                                    else (AT_LOWER if increase else AT_UPPER))
            self.basis[r] = q
            self.status[q] = BASIC
            self.xb[r] = entering_value
            self.lbb[r] = self.lo[q]
            self.ubb[r] = self.hi[q]
            if self.n_eta == self.refactor_every:
                self.refactor()
            else:
                self.push_eta(r, alpha)

    def restore_bounds(self, lo, hi):
        """Swap in new bounds, moving nonbasic columns onto them."""
        self.lo, self.hi = lo, hi
        st = self.status
        self.x = np.where(st == AT_LOWER, lo, np.where(st == AT_UPPER, hi, self.x))
        fixed = st == FIXED
        self.x[fixed] = lo[fixed]
        self.refactor()

    def primal_violation(self):
        return max(float(np.max(self.lbb - self.xb, initial=0.0)),
                   float(np.max(self.xb - self.ubb, initial=0.0)))


def _perturbed(lo, hi, slo, shi, size):
    """Widen every non-fixed finite bound outward by a small random amount.

    Distinct random shifts make degenerate vertices (many basic variables
    sitting exactly on a bound) vanish, so the primal simplex keeps moving.
    """
    rng = np.random.default_rng(20240601)
    out = []
    for a, b in ((lo, hi), (slo, shi)):
        free_width = a < b
        da = size * (1.0 + rng.random(a.size)) * np.maximum(1.0, np.abs(np.where(np.isfinite(a), a, 0.0)))
        db = size * (1.0 + rng.random(b.size)) * np.maximum(1.0, np.abs(np.where(np.isfinite(b), b, 0.0)))
        out.append(np.where(free_width, a - da, a))
        out.append(np.where(free_width, b + db, b))
    return out


def _dual_start_ok(lo, hi, cost):
    """True when every column can start on a bound its cost sign favours."""
    return bool(np.all(((cost > 0) & np.isfinite(lo)) | ((cost < 0) & np.isfinite(hi))
                       | ((cost == 0) & (np.isfinite(lo) | np.isfinite(hi)))))


def _polish(spx, cost):
    """Primal and dual passes on the true data until both feasibilities hold."""
    status = "optimal"
    for _ in range(3):
        status = spx.dual_run(cost)
        if status != "optimal":
            return status
        status = spx.run(cost)
        if status != "optimal":
            return status
        spx.refactor()
        if spx.primal_violation() <= FEAS_TOL:
            break
    spx.sync()
    return status


def _dual_path(A, b, lo, hi, slo, shi, cost, refactor_every, stall_limit, max_iter):
    """Slack basis with every column on its cheap bound, then dual simplex.

    Costs are nudged apart first so the dual ratio test rarely ties; the
    primal simplex then restores optimality for the true costs.
    """
    m, n = A.shape
    at_up = (cost < 0) | ((cost == 0) & ~np.isfinite(lo))
    x0 = np.where(at_up, hi, lo)
    st0 = np.where(at_up, AT_UPPER, AT_LOWER).astype(np.int8)
    fixed = lo == hi
    st0[fixed] = FIXED
    full = sp.hstack([A, sp.identity(m, format="csc")]).tocsc()
    flo = np.concatenate([lo, slo])
    fhi = np.concatenate([hi, shi])
    unit_row = np.concatenate([np.full(n, -1), np.arange(m)]).astype(np.int64)
    unit_sign = np.concatenate([np.zeros(n), np.ones(m)])
    spx = _Simplex(full, b, flo, fhi, unit_row, unit_sign, refactor_every, stall_limit, max_iter)
    spx.x = np.concatenate([x0, np.zeros(m)])
    spx.status = np.concatenate([st0, np.full(m, BASIC, dtype=np.int8)])
    spx.basis = np.arange(n, n + m)
    spx.refactor()

    rng = np.random.default_rng(20240601)
    nudge = 1e-7 * (1.0 + rng.random(n)) * np.maximum(1.0, np.abs(cost))
    c1 = np.concatenate([cost + np.where(at_up, -nudge, nudge), np.zeros(m)])
    status = spx.dual_run(c1)
    if status != "optimal":
        return status, None, spx.iterations, spx.refactors
    c2 = np.concatenate([cost, np.zeros(m)])
    status = spx.run(c2)
    if status != "optimal":
        return status, None, spx.iterations, spx.refactors
    spx.refactor()
    status = _polish(spx, c2)
    if status != "optimal":
        return status, None, spx.iterations, spx.refactors
    return status, np.clip(spx.x[:n], lo, hi), spx.iterations, spx.refactors


def _solve_reduced(A, sense, b, lo, hi, cost, refactor_every, stall_limit, max_iter,
                   perturb=1e-6):
    """Simplex on presolved data. Returns ``(status, x, iterations, refactors)``."""
    m, n = A.shape
    if m == 0:
        x = np.empty(n)
        for j in range(n):
            if cost[j] > 0:
                x[j] = lo[j]
            elif cost[j] < 0:
                x[j] = hi[j]
            else:
                x[j], _ = _initial_value(lo[j], hi[j])
            if not np.isfinite(x[j]):
                return "unbounded", None, 0, 0
        return "optimal", x, 0, 0

    # row scaling
    rowmax = abs(A).max(axis=1).toarray().ravel()
    scale = 1.0 / np.where(rowmax > 0, rowmax, 1.0)
    A = sp.diags(scale) @ A
    b = b * scale

    slo = np.where(sense == GE, -np.inf, 0.0)
    shi = np.where(sense == LE, np.inf, 0.0)
    if _dual_start_ok(lo, hi, cost):
        return _dual_path(A, b, lo, hi, slo, shi, cost, refactor_every, stall_limit, max_iter)
    true_lo = np.concatenate([lo, slo])
    true_hi = np.concatenate([hi, shi])
    if perturb > 0:
        lo, hi, slo, shi = _perturbed(lo, hi, slo, shi, perturb)

    x0 = np.empty(n)
    st0 = np.empty(n, dtype=np.int8)
    for j in range(n):
        x0[j], st0[j] = _initial_value(lo[j], hi[j])
    resid = b - A @ x0
    slack = np.clip(resid, slo, shi)
    art_rows = np.flatnonzero(np.abs(resid - slack) > 0.0)
    k = art_rows.size
    art_sign = np.sign(resid[art_rows] - slack[art_rows])

    full = sp.hstack([
        A,
        sp.identity(m, format="csc"),
        sp.csc_matrix((art_sign, (art_rows, np.arange(k))), shape=(m, k)),
    ]).tocsc()
    N = n + m + k
    flo = np.concatenate([lo, slo, np.zeros(k)])
    fhi = np.concatenate([hi, shi, np.full(k, np.inf)])
    unit_row = np.concatenate([np.full(n, -1), np.arange(m), art_rows]).astype(np.int64)
    unit_sign = np.concatenate([np.zeros(n), np.ones(m), art_sign])
    spx = _Simplex(full, b, flo, fhi, unit_row, unit_sign, refactor_every, stall_limit, max_iter)
    spx.x = np.concatenate([x0, slack, np.abs(resid[art_rows] - slack[art_rows])])
    spx.status = np.concatenate([st0, np.full(m, BASIC, dtype=np.int8), np.zeros(k, dtype=np.int8)])
    basis = np.arange(n, n + m)
    basis[art_rows] = n + m + np.arange(k)
    spx.basis = basis
    spx.status[basis] = BASIC
    # artificial rows keep their slack nonbasic at the violated bound
    for i in art_rows:
        j = n + i
        spx.status[j] = FIXED if slo[i] == shi[i] else (AT_LOWER if slack[i] == slo[i] else AT_UPPER)
    spx.refactor()

    if k:
        c1 = np.zeros(N)
        c1[n + m:] = 1.0
        status = spx.run(c1)
        if status == "iteration_limit":
            return status, None, spx.iterations, spx.refactors
        spx.refactor()
        spx.sync()
        infeas = float(spx.x[n + m:].sum())
        if infeas > FEAS_TOL * max(1.0, k ** 0.5):
            return "infeasible", None, spx.iterations, spx.refactors
        spx.hi[n + m:] = 0.0
        nb_art = np.arange(n + m, N)
        nb_art = nb_art[spx.status[nb_art] != BASIC]
        spx.status[nb_art] = FIXED
        spx.x[nb_art] = 0.0
        spx.refactor()

    c2 = np.concatenate([cost, np.zeros(m + k)])
    status = spx.run(c2)
    if status != "optimal":
        return status, None, spx.iterations, spx.refactors
    # back to the true bounds; the basis stays dual feasible, so the dual
    # simplex removes whatever primal infeasibility the shift left behind
    spx.restore_bounds(np.concatenate([true_lo, np.zeros(k)]),
                       np.concatenate([true_hi, spx.hi[n + m:]]))
    status = _polish(spx, c2)
    if status != "optimal":
        return status, None, spx.iterations, spx.refactors
    return status, np.clip(spx.x[:n], true_lo[:n], true_hi[:n]), spx.iterations, spx.refactors


def solve_lp(model: LpModel, *, max_iter: int | None = None, refactor_every: int = 64,
             stall_limit: int = 50) -> LpSolution:
    """Minimize ``model``. Infeasible and unbounded models are statuses, not errors."""
    if not isinstance(model, LpModel):
        raise LpFormatError("solve_lp expects an LpModel")
    t0 = time.perf_counter()
    n = model.n_vars
    try:
        cols, rows, lo, hi, rhs, _ = _presolve(model)
    except _Infeasible:
        return LpSolution("infeasible", math.nan, np.full(n, np.nan), 0,
                          time.perf_counter() - t0, {"presolve": "infeasible"})
    x = np.where(lo == hi, lo, 0.0)
    A = model.A[rows][:, cols]
    if max_iter is None:
        max_iter = 50 * (A.shape[0] + A.shape[1]) + 1000
    try:
        status, xr, iters, refac = _solve_reduced(
            A, model.sense[rows], rhs[rows], lo[cols], hi[cols], model.cost[cols],
            refactor_every, stall_limit, max_iter)
    except _Singular:
        status, xr, iters, refac = "numerical_error", None, 0, 0
    stats = {"rows": int(A.shape[0]), "cols": int(A.shape[1]), "refactors": refac,
             "backend": _backend()}
    if status != "optimal":
        return LpSolution(status, math.nan, np.full(n, np.nan), iters,
                          time.perf_counter() - t0, stats)
    x[cols] = xr
    return LpSolution("optimal", model.objective(x), x, iters, time.perf_counter() - t0, stats)


def _backend():
    from ._accel import backend_name

    return backend_name()


# --- LP text dump -------------------------------------------------------------------


def _lp_name(s: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "_." else "_" for ch in s)


def _terms(cols, vals, names) -> str:
    parts = []
    for j, v in zip(cols, vals):
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {abs(v):.17g} {_lp_name(names[j])}")
    text = " ".join(parts) if parts else "0"
    return text[2:] if text.startswith("+ ") else text


def to_lp_text(model: LpModel) -> str:
    """Render the model in the common CPLEX-style LP file layout."""
    names = model.names
    out = ["\\ generated by uavrelay", "Minimize"]
    nz = np.flatnonzero(model.cost)
    out.append(" obj: " + _terms(nz, model.cost[nz], names))
    out.append("Subject To")
    A = model.A
    for i in range(model.n_rows):
        s, e = A.indptr[i], A.indptr[i + 1]
        label = _lp_name(model.row_names[i]) if model.row_names else f"r{i}"
        out.append(f" {label}: {_terms(A.indices[s:e], A.data[s:e], names)} "
                   f"{_SENSE_TEXT[int(model.sense[i])]} {model.rhs[i]:.17g}")
    out.append("Bounds")
    for j, name in enumerate(names):
        lo, hi = model.lower[j], model.upper[j]
        nm = _lp_name(name)
        if lo == hi:
            out.append(f" {nm} = {lo:.17g}")
        elif np.isinf(lo) and np.isinf(hi):
            out.append(f" {nm} free")
        else:
            lo_s = "-inf" if np.isinf(lo) else f"{lo:.17g}"
            hi_s = "+inf" if np.isinf(hi) else f"{hi:.17g}"
            out.append(f" {lo_s} <= {nm} <= {hi_s}")
    out.append("End")
    return "\n".join(out) + "\n"
