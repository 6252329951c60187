"""Bounded-variable revised simplex with an explicit basis inverse.

Sized for restricted masters and branch-and-bound relaxations at desk scale.
The constraint matrix is kept sparse (CSC); the basis inverse is dense and
updated by a rank-one pivot, with a full refactorization every
``REFACTOR_EVERY`` pivots. After a long run of degenerate pivots the entering
rule switches from Dantzig's to Bland's so the method cannot cycle.

Sign convention: for a minimization, the dual of a ``<=`` row is ``<= 0``,
of a ``>=`` row ``>= 0``; each dual is the derivative of the optimal value
with respect to the row's right-hand side.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

import numpy as np
import scipy.sparse as sp

INF = math.inf
TOL_FEAS = 1e-7
TOL_DUAL = 1e-7
TOL_PIVOT = 1e-9
REFACTOR_EVERY = 64

LE, GE, EQ = "<=", ">=", "="

_BASIC, _AT_LB, _AT_UB = 0, 1, 2


@dataclass
class LinearProgram:
    """A minimization LP with named variables and rows."""

    var_names: list[Hashable] = field(default_factory=list)
    cost: list[float] = field(default_factory=list)
    lower: list[float] = field(default_factory=list)
    upper: list[float] = field(default_factory=list)
    row_names: list[Hashable] = field(default_factory=list)
    rows: list[dict[int, float]] = field(default_factory=list)
    senses: list[str] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)

    def add_var(self, name: Hashable, cost: float = 0.0, lb: float = 0.0, ub: float = INF) -> int:
        if not math.isfinite(lb):
            raise ValueError("lower bounds must be finite")
        if ub < lb:
            raise ValueError(f"empty bounds for {name!r}")
        self.var_names.append(name)
        self.cost.append(float(cost))
        self.lower.append(float(lb))
        self.upper.append(float(ub))
        return len(self.var_names) - 1

    def add_row(self, coefs: Mapping[int, float] | Iterable[tuple[int, float]], sense: str, rhs: float,
                name: Hashable | None = None) -> int:
        if sense not in (LE, GE, EQ):
            raise ValueError(f"bad sense {sense!r}")
        row: dict[int, float] = {}
        for j, a in (coefs.items() if isinstance(coefs, Mapping) else coefs):
            if not 0 <= j < len(self.var_names):
                raise IndexError(f"row references unknown variable {j}")
            row[j] = row.get(j, 0.0) + float(a)
        self.rows.append(row)
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.row_names.append(len(self.rows) - 1 if name is None else name)
        return len(self.rows) - 1

    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def to_lp_text(self) -> str:
        """CPLEX LP format text, for cross-checking with external solvers."""

        def clean(name: Hashable, prefix: str) -> str:
            return prefix + re.sub(r"[^A-Za-z0-9_]", "_", str(name))

        vn = [clean(n, "x_") + f"_{j}" for j, n in enumerate(self.var_names)]

        def expr(terms: Iterable[tuple[int, float]]) -> str:
            parts = [f"{'+' if a >= 0 else '-'} {abs(a):.12g} {vn[j]}" for j, a in terms if a != 0]
            return " ".join(parts) if parts else "0 " + vn[0]

        lines = ["Minimize", " obj: " + expr(enumerate(self.cost)), "Subject To"]
        for i, row in enumerate(self.rows):
            lines.append(f" {clean(self.row_names[i], 'r_')}_{i}: {expr(sorted(row.items()))} "
                         f"{self.senses[i]} {self.rhs[i]:.12g}")
        lines.append("Bounds")
        for j in range(self.num_vars):
            ub = "+inf" if self.upper[j] == INF else f"{self.upper[j]:.12g}"
            lines.append(f" {self.lower[j]:.12g} <= {vn[j]} <= {ub}")
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class Basis:
    """Basis in terms of names: basic entries are ('v', var), ('s', row) or ('a', row)."""

    basic: list[tuple[str, Hashable]]
    at_upper: set[Hashable]
    rows: list[Hashable] = field(default_factory=list)


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | iteration_limit | numerical_failure
    x: np.ndarray
    duals: np.ndarray
    objective: float
    iterations: int = 0
    basis: Basis | None = None
    warm_started: bool = False
    message: str = ""
    reduced_costs: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def value(self, lp: LinearProgram, name: Hashable) -> float:
        return float(self.x[lp.var_names.index(name)])


class _Engine:
    """Internal standard form: A z = b, lo <= z <= hi.

    Columns: structural variables, then one slack per inequality row, then one
    artificial per row.
    """

    def __init__(self, lp: LinearProgram):
        self.lp = lp
        m, n = lp.num_rows, lp.num_vars
        self.m, self.n = m, n
        rows_i, cols_j, vals = [], [], []
        for i, row in enumerate(lp.rows):
            for j, a in row.items():
                if a != 0.0:
                    rows_i.append(i)
                    cols_j.append(j)
                    vals.append(a)
        self.slack_of: dict[int, int] = {}
        lo = list(lp.lower)
        hi = list(lp.upper)
        col = n
        for i, s in enumerate(lp.senses):
            if s == EQ:
                continue
            rows_i.append(i)
            cols_j.append(col)
            vals.append(1.0 if s == LE else -1.0)
            self.slack_of[i] = col
            lo.append(0.0)
            hi.append(INF)
            col += 1
        self.art0 = col
        self.art_sign = np.ones(m)
        for i in range(m):
            rows_i.append(i)
            cols_j.append(col + i)
            vals.append(1.0)
            lo.append(0.0)
            hi.append(0.0)
        self.N = col + m
        self.A = sp.csc_matrix((vals, (rows_i, cols_j)), shape=(m, self.N))
        self.A.sort_indices()
        self.b = np.asarray(lp.rhs, dtype=float)
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.cost = np.zeros(self.N)
        self.cost[:n] = lp.cost
        finite = [abs(v) for v in list(self.b) + list(self.lo) + [h for h in self.hi if h < INF]]
        self.feas_tol = TOL_FEAS * max(1.0, max(finite, default=0.0))
        self.dual_tol = TOL_DUAL * max(1.0, float(np.max(np.abs(self.cost), initial=0.0)))
        self.iterations = 0

    # -- column helpers
    def column(self, j: int) -> np.ndarray:
        out = np.zeros(self.m)
        s, e = self.A.indptr[j], self.A.indptr[j + 1]
        out[self.A.indices[s:e]] = self.A.data[s:e]
        return out

    def set_art_sign(self, i: int, sign: float) -> None:
        j = self.art0 + i
        self.art_sign[i] = sign
        self.A.data[self.A.indptr[j]] = sign

    def refactor(self) -> None:
        B = np.zeros((self.m, self.m))
        for k, j in enumerate(self.basis):
            B[:, k] = self.column(j)
        self.Binv = np.linalg.inv(B)
        self.recompute_xb()

    def recompute_xb(self) -> None:
        xn = self.x.copy()
        xn[self.basis] = 0.0
        self.x[self.basis] = self.Binv @ (self.b - self.A @ xn)

    # -- main loop
    def run(self, cost: np.ndarray, max_iter: int) -> str:
        m = self.m
        degenerate = 0
        bland_after = 10 * (m + self.N)
        since_refactor = 0
        dual_tol = TOL_DUAL * max(1.0, float(np.max(np.abs(cost), initial=0.0)))
        while True:
            if self.iterations >= max_iter:
                return "iteration_limit"
            y = cost[self.basis] @ self.Binv
            d = cost - self.A.T @ y
            movable = self.hi > self.lo
            up = (self.status == _AT_LB) & movable & (d < -dual_tol)
            down = (self.status == _AT_UB) & (d > dual_tol)
            cand = np.flatnonzero(up | down)
            if cand.size == 0:
                return "optimal"
            if degenerate > bland_after:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if self.status[q] == _AT_LB else -1.0
            alpha = self.Binv @ self.column(q)
            step = direction * alpha
            xb = self.x[self.basis]
            lob, hib = self.lo[self.basis], self.hi[self.basis]
            theta = self.hi[q] - self.lo[q]
            leave = -1
            leave_to_upper = False
            dec = step > TOL_PIVOT
            inc = step < -TOL_PIVOT
            if dec.any() or inc.any():
                ratios = np.full(m, INF)
                ratios[dec] = np.maximum(xb[dec] - lob[dec], 0.0) / step[dec]
                fin = inc & (hib < INF)
                ratios[fin] = np.maximum(hib[fin] - xb[fin], 0.0) / -step[fin]
                rmin = float(ratios.min())
                if rmin < theta:
                    theta = rmin
                    ties = np.flatnonzero(ratios <= rmin + 1e-12 * max(1.0, rmin))
                    if degenerate > bland_after:
                        leave = int(min(ties, key=lambda i: self.basis[i]))
                    else:
                        leave = int(ties[np.argmax(np.abs(step[ties]))])
                    leave_to_upper = bool(inc[leave])
            if theta == INF:
                return "unbounded"
            self.iterations += 1
            degenerate = degenerate + 1 if theta <= self.feas_tol * 1e-3 else 0
            self.x[self.basis] = xb - theta * step
            self.x[q] += direction * theta
            if leave < 0:
                self.status[q] = _AT_UB if self.status[q] == _AT_LB else _AT_LB
                self.x[q] = self.hi[q] if self.status[q] == _AT_UB else self.lo[q]
                continue
            out = self.basis[leave]
            self.status[out] = _AT_UB if leave_to_upper else _AT_LB
            self.x[out] = self.hi[out] if leave_to_upper else self.lo[out]
            self.basis[leave] = q
            self.status[q] = _BASIC
            piv = alpha[leave]
            row = self.Binv[leave] / piv
            self.Binv -= np.outer(alpha, row)
            self.Binv[leave] = row
            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0


def _empty(lp: LinearProgram, status: str, message: str = "") -> LpSolution:
    return LpSolution(status, np.full(lp.num_vars, np.nan), np.full(lp.num_rows, np.nan), math.nan, message=message)


def _basis_to_names(eng: _Engine) -> Basis:
    lp = eng.lp
    slack_row = {j: i for i, j in eng.slack_of.items()}
    basic = []
    for j in eng.basis:
        if j < eng.n:
            basic.append(("v", lp.var_names[j]))
        elif j < eng.art0:
            basic.append(("s", lp.row_names[slack_row[j]]))
        else:
            basic.append(("a", lp.row_names[j - eng.art0]))
    at_upper = {lp.var_names[j] for j in range(eng.n) if eng.status[j] == _AT_UB}
    return Basis(basic, at_upper, list(lp.row_names))


def _finish(eng: _Engine, status: str, warm: bool, message: str) -> LpSolution:
    lp = eng.lp
    if status != "optimal":
        sol = _empty(lp, status, message)
        sol.iterations = eng.iterations
        return sol
    eng.refactor()
    resid = eng.A @ eng.x - eng.b
    viol = max(float(np.max(np.abs(resid), initial=0.0)),
               float(np.max(eng.lo - eng.x, initial=0.0)),
               float(np.max(np.where(eng.hi < INF, eng.x - eng.hi, 0.0), initial=0.0)))
    if viol > 1e3 * eng.feas_tol:
        sol = _empty(lp, "numerical_failure", f"primal residual {viol:.3g} after refactorization")
        sol.iterations = eng.iterations
        return sol
    y = eng.cost[eng.basis] @ eng.Binv
    d = eng.cost - eng.A.T @ y
    x = eng.x[: eng.n].copy()
    obj = float(eng.cost[: eng.n] @ x)
    return LpSolution("optimal", x, y, obj, eng.iterations, _basis_to_names(eng), warm, message,
                      reduced_costs=d[: eng.n])


def _initial_nonbasic(eng: _Engine, at_upper: set | None = None) -> None:
    eng.status = np.full(eng.N, _AT_LB, dtype=np.int8)
    eng.x = eng.lo.copy()
    if at_upper:
        for j in range(eng.n):
            if eng.lp.var_names[j] in at_upper and eng.hi[j] < INF:
                eng.status[j] = _AT_UB
                eng.x[j] = eng.hi[j]


def solve_lp(lp: LinearProgram, basis: Basis | None = None, max_iter: int | None = None) -> LpSolution:
    """Solve ``lp``. With ``basis`` the solve starts from it when it is usable.

    A basis that is singular or primal infeasible for ``lp`` is discarded and
    the solve restarts cold; ``message`` records the fallback.
    """
    m = lp.num_rows
    if m == 0:
        x = np.array([lo if c >= 0 else hi for c, lo, hi in zip(lp.cost, lp.lower, lp.upper)], dtype=float)
        if np.any(np.isinf(x)):
            return _empty(lp, "unbounded")
        return LpSolution("optimal", x, np.zeros(0), float(np.dot(lp.cost, x)) if lp.num_vars else 0.0,
                          basis=Basis([], {lp.var_names[j] for j in range(lp.num_vars) if lp.cost[j] < 0}, []))
    eng = _Engine(lp)
    if max_iter is None:
        max_iter = 50 * (eng.m + eng.N) + 1000
    message = ""
    if basis is not None:
        ok, message = _try_warm(eng, basis)
        if ok:
            try:
                status = eng.run(eng.cost, max_iter)
            except np.linalg.LinAlgError as exc:
                return _empty(lp, "numerical_failure", str(exc))
            return _finish(eng, status, True, message)
        eng = _Engine(lp)
    try:
        return _cold(eng, max_iter, message)
    except np.linalg.LinAlgError as exc:
        return _empty(lp, "numerical_failure", str(exc))


def warm_start(lp: LinearProgram, basis: Basis) -> LpSolution:
    return solve_lp(lp, basis)


def _try_warm(eng: _Engine, basis: Basis) -> tuple[bool, str]:
    lp = eng.lp
    var_idx = {name: j for j, name in enumerate(lp.var_names)}
    row_idx = {name: i for i, name in enumerate(lp.row_names)}
    if len(var_idx) != lp.num_vars or len(row_idx) != lp.num_rows:
        return False, "cold start: duplicate names"
    old_rows = set(basis.rows)
    chosen: list[int] = []
    for kind, name in basis.basic:
        if kind == "v" and name in var_idx:
            chosen.append(var_idx[name])
        elif kind in ("s", "a") and name not in row_idx and name in old_rows:
            continue  # row was dropped together with its basic slack
        elif kind == "s" and name in row_idx and row_idx[name] in eng.slack_of:
            chosen.append(eng.slack_of[row_idx[name]])
        elif kind == "a" and name in row_idx:
            chosen.append(eng.art0 + row_idx[name])
        else:
            return False, "cold start: basis references unknown entries"
    for i, name in enumerate(lp.row_names):
        if name not in old_rows:
            if i not in eng.slack_of:
                return False, "cold start: new equality row"
            chosen.append(eng.slack_of[i])
    if len(chosen) != lp.num_rows or len(set(chosen)) != len(chosen):
        return False, "cold start: basis size mismatch"
    _initial_nonbasic(eng, basis.at_upper)
    eng.basis = np.asarray(chosen, dtype=int)
    eng.status[eng.basis] = _BASIC
    try:
        eng.refactor()
    except np.linalg.LinAlgError:
        return False, "cold start: singular basis"
    xb = eng.x[eng.basis]
    if np.any(xb < eng.lo[eng.basis] - eng.feas_tol) or np.any(xb > eng.hi[eng.basis] + eng.feas_tol):
        return False, "cold start: basis not primal feasible"
    return True, "warm start"


def _cold(eng: _Engine, max_iter: int, message: str) -> LpSolution:
    _initial_nonbasic(eng)
    resid = eng.b - eng.A @ eng.x
    basis = []
    phase1 = False
    for i in range(eng.m):
        s = eng.slack_of.get(i)
        sense = eng.lp.senses[i]
        if s is not None and ((sense == LE and resid[i] >= 0) or (sense == GE and resid[i] <= 0)):
            basis.append(s)
            continue
        j = eng.art0 + i
        sign = 1.0 if resid[i] >= 0 else -1.0
        eng.set_art_sign(i, sign)
        eng.hi[j] = INF
        basis.append(j)
        phase1 = True
    eng.basis = np.asarray(basis, dtype=int)
    eng.status[eng.basis] = _BASIC
    eng.refactor()
    if phase1:
        c1 = np.zeros(eng.N)
        c1[eng.art0:] = 1.0
        status = eng.run(c1, max_iter)
        if status != "optimal":
            return _finish(eng, status, False, message)
        infeas = float(eng.x[eng.art0:].sum())
        if infeas > eng.feas_tol * max(1, eng.m) ** 0.5:
            sol = _empty(eng.lp, "infeasible", f"phase 1 infeasibility {infeas:.3g}")
            sol.iterations = eng.iterations
            return sol
        eng.hi[eng.art0:] = 0.0
        for j in range(eng.art0, eng.N):
            if eng.status[j] != _BASIC:
                eng.status[j] = _AT_LB
                eng.x[j] = 0.0
    status = eng.run(eng.cost, max_iter)
    return _finish(eng, status, False, message)
