"""LP subproblem container and the reference bounded-variable revised simplex.

Problems are ``min c'x  s.t.  A x (<= or =) b,  lb <= x <= ub`` with sparse
``A``. :func:`solve` runs a two-phase primal simplex on the equilibrated
problem: phase 1 minimizes the sum of bound infeasibilities of the basic
variables (so it can start from any basis, which is what warm starts need),
phase 2 the scaled objective. The basis inverse is an LU factorization
(SuperLU) followed by a product-form eta file, refactorized periodically.
Pricing is Dantzig's rule with a Harris two-pass ratio test; after a run of
degenerate pivots the solver switches to Bland's rule until progress resumes.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

_log = logging.getLogger(__name__)


class LpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITER_LIMIT = "IterLimit"
    NUMERICAL = "NumericalFailure"


@dataclass
class LpProblem:
    a: sp.spmatrix
    sense: np.ndarray        # 'L' (<=) or 'E' (=) per row
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    c: np.ndarray
    col_names: list[str] | None = None
    row_names: list[str] | None = None

    def __post_init__(self):
        self.a = sp.csr_matrix(self.a, dtype=float)
        m, n = self.a.shape
        self.sense = np.asarray(self.sense).astype("<U1")
        self.rhs = np.asarray(self.rhs, dtype=float).reshape(m)
        self.lb = np.asarray(self.lb, dtype=float).reshape(n)
        self.ub = np.asarray(self.ub, dtype=float).reshape(n)
        self.c = np.asarray(self.c, dtype=float).reshape(n)
        if self.sense.shape != (m,):
            raise ValueError("one row sense per row required")
        if not np.all(np.isin(self.sense, ("L", "E"))):
            raise ValueError("row senses must be 'L' or 'E'")
        if not np.all(np.isfinite(self.c)):
            raise ValueError("objective coefficients must be finite")
        if np.any(self.lb > self.ub):
            raise ValueError("lb must not exceed ub")
        if np.any(np.isinf(self.rhs)):
            raise ValueError("right-hand sides must be finite")

    @property
    def shape(self) -> tuple[int, int]:
        return self.a.shape

    def primal_residual(self, x: np.ndarray) -> float:
        """Max violation of rows and bounds at ``x``."""
        r = self.a @ x - self.rhs
        rows = np.where(self.sense == "E", np.abs(r), np.maximum(r, 0.0))
        bnd = np.maximum(np.maximum(self.lb - x, x - self.ub), 0.0)
        return float(max(rows.max(initial=0.0), bnd.max(initial=0.0)))


@dataclass
class Basis:
    """Basic column indices (structural ``< n``, slack ``n + row``) and the
    bound (``'L'``/``'U'``/``'Z'`` for free-at-zero) of every nonbasic column."""

    basic: np.ndarray
    at: np.ndarray


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float = math.nan
    y: np.ndarray | None = None           # row duals
    reduced_costs: np.ndarray | None = None
    iterations: int = 0
    basis: Basis | None = None

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


@dataclass(frozen=True)
class SolveOptions:
    max_iter: int = 50_000
    feas_tol: float = 1e-9
    opt_tol: float = 1e-9
    pivot_tol: float = 1e-9
    refactor_every: int = 80
    degenerate_limit: int = 40
    scale: bool = True


class LpBackend(Protocol):
    def __call__(self, lp: LpProblem, opts: SolveOptions | None = None,
                 warm: Basis | None = None) -> LpSolution: ...


# ----------------------------------------------------------------------------

class _Factor:
    def __init__(self, mat_csc: sp.csc_matrix, basic: np.ndarray):
        b = mat_csc[:, basic]
        self.lu = spla.splu(sp.csc_matrix(b), permc_spec="COLAMD",
                            options={"SymmetricMode": False})
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, v: np.ndarray) -> np.ndarray:
        z = self.lu.solve(v)
        for r, a in self.etas:
            zr = z[r] / a[r]
            if zr != 0.0:
                z -= zr * a
            z[r] = zr
        return z

    def btran(self, v: np.ndarray) -> np.ndarray:
        z = v.copy()
        for r, a in reversed(self.etas):
            z[r] = (z[r] - (z @ a - z[r] * a[r])) / a[r]
        return self.lu.solve(z, trans="T")

    def update(self, r: int, alpha: np.ndarray) -> None:
        self.etas.append((r, alpha.copy()))


def _equilibrate(a: sp.csr_matrix, passes: int = 4):
    """Geometric row/column scaling factors (powers of two)."""
    m, n = a.shape
    rs = np.ones(m)
    cs = np.ones(n)
    if a.nnz == 0:
        return rs, cs
    coo = a.tocoo()
    vals = np.abs(coo.data)
    keep = vals > 0
    ri, ci, vals = coo.row[keep], coo.col[keep], vals[keep]
    for _ in range(passes):
        cur = vals * rs[ri] * cs[ci]
        rmax = np.zeros(m)
        rmin = np.full(m, np.inf)
        np.maximum.at(rmax, ri, cur)
        np.minimum.at(rmin, ri, cur)
        ok = rmax > 0
        rs[ok] /= np.sqrt(rmax[ok] * rmin[ok])
        cur = vals * rs[ri] * cs[ci]
        cmax = np.zeros(n)
        cmin = np.full(n, np.inf)
        np.maximum.at(cmax, ci, cur)
        np.minimum.at(cmin, ci, cur)
        ok = cmax > 0
        cs[ok] /= np.sqrt(cmax[ok] * cmin[ok])
    rs = 2.0 ** np.round(np.log2(rs))
    cs = 2.0 ** np.round(np.log2(cs))
    return rs, cs


def solve(lp: LpProblem, opts: SolveOptions | None = None,
          warm: Basis | None = None) -> LpSolution:
    """Solve ``lp`` with the reference revised simplex."""
    return _Simplex(lp, opts or SolveOptions(), warm).run()


class _Simplex:
    def __init__(self, lp: LpProblem, opts: SolveOptions, warm: Basis | None):
        self.lp = lp
        self.o = opts
        m, n = lp.shape
        self.m, self.n = m, n
        a = lp.a
        if opts.scale:
            rs, cs = _equilibrate(a)
        else:
            rs, cs = np.ones(m), np.ones(n)
        self.rs, self.cs = rs, cs
        a_s = sp.diags(rs) @ a @ sp.diags(cs)
        self.mat = sp.hstack([a_s, sp.identity(m, format="csr")], format="csc")
        self.mat_t = self.mat.T.tocsr()
        self.b = rs * lp.rhs
        lb = np.concatenate([lp.lb / cs, np.zeros(m)])
        ub = np.concatenate([lp.ub / cs, np.where(lp.sense == "E", 0.0, np.inf)])
        self.lb, self.ub = lb, ub
        c = np.concatenate([lp.c * cs, np.zeros(m)])
        cmax = float(np.max(np.abs(c))) if c.size else 0.0
        self.cscale = cmax if cmax > 0 else 1.0
        self.c = c / self.cscale
        self.fixed = lb == ub
        self.N = n + m
        self.warm = warm

    # -- basis setup ---------------------------------------------------------
    def _nonbasic_value(self, j: int, at: str) -> float:
        lb, ub = self.lb[j], self.ub[j]
        if at == "U" and np.isfinite(ub):
            return ub
        if at == "L" and np.isfinite(lb):
            return lb
        if np.isfinite(lb):
            return lb
        if np.isfinite(ub):
            return ub
        return 0.0

    def _init_basis(self):
        m, n = self.m, self.n
        self.x = np.zeros(self.N)
        self.is_basic = np.zeros(self.N, dtype=bool)
        basic = None
        at = np.full(self.N, "L")
        if self.warm is not None and len(self.warm.basic) == m and len(self.warm.at) == self.N:
            basic = np.asarray(self.warm.basic, dtype=int)
            at = np.asarray(self.warm.at).astype("<U1").copy()
            if len(np.unique(basic)) != m or basic.min() < 0 or basic.max() >= self.N:
                basic = None
        if basic is not None:
            try:
                self.factor = _Factor(self.mat, basic)
            except RuntimeError:
                basic = None
        if basic is None:
            basic = np.arange(n, n + m)
            at = np.full(self.N, "L")
            self.factor = _Factor(self.mat, basic)
        self.basic = basic
        self.is_basic[basic] = True
        for j in np.flatnonzero(~self.is_basic):
            self.x[j] = self._nonbasic_value(j, at[j])
        self._recompute_xb()

    def _recompute_xb(self):
        xn = np.where(self.is_basic, 0.0, self.x)
        rhs = self.b - self.mat @ xn
        self.x[self.basic] = self.factor.ftran(rhs)

    def _refactor(self):
        self.factor = _Factor(self.mat, self.basic)
        self._recompute_xb()

    # -- main loop -----------------------------------------------------------
    def run(self) -> LpSolution:
        o = self.o
        m = self.m
        if m == 0:
            return self._solve_unconstrained()
        self._init_basis()
        it = 0
        degenerate = 0
        bland = False
        ftol = o.feas_tol
        while True:
            xb = self.x[self.basic]
            lbb, ubb = self.lb[self.basic], self.ub[self.basic]
            below = xb < lbb - ftol
            above = xb > ubb + ftol
            phase1 = bool(below.any() or above.any())
            if phase1:
                cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                cfull = None
            else:
                cb = self.c[self.basic]
                cfull = self.c
            y = self.factor.btran(cb)
            d = -(self.mat_t @ y)
            if cfull is not None:
                d += cfull
            d[self.basic] = 0.0

            q, direction = self._price(d, bland)
            if q < 0:
                if phase1:
                    return self._finish(LpStatus.INFEASIBLE, it)
                return self._finish(LpStatus.OPTIMAL, it)
            if it >= o.max_iter:
                return self._finish(LpStatus.ITER_LIMIT, it)
            it += 1

            col = self.mat[:, q].toarray().ravel()
            alpha = self.factor.ftran(col)
            r, theta, leave_at = self._ratio(alpha, direction, q, bland)
            if r == -2:
                if phase1:
                    # cannot happen in exact arithmetic; refresh and retry
                    self._refactor()
                    continue
                return self._finish(LpStatus.UNBOUNDED, it)

            step = direction * theta
            if theta != 0.0:
                self.x[self.basic] -= step * alpha
            self.x[q] += step
            if r >= 0:
                leaving = self.basic[r]
                self.x[leaving] = self.lb[leaving] if leave_at == "L" else self.ub[leaving]
                self.is_basic[leaving] = False
                self.is_basic[q] = True
                self.basic[r] = q
                self.factor.update(r, alpha)
                if len(self.factor.etas) >= o.refactor_every:
                    try:
                        self._refactor()
                    except RuntimeError:
                        return self._finish(LpStatus.NUMERICAL, it)
            else:
                # bound flip of the entering column
                self.x[q] = self.ub[q] if direction > 0 else self.lb[q]

            if theta <= 1e-12:
                degenerate += 1
                if degenerate >= o.degenerate_limit:
                    bland = True
            else:
                degenerate = 0
                bland = False

    def _price(self, d: np.ndarray, bland: bool) -> tuple[int, int]:
        tol = self.o.opt_tol
        nb = ~self.is_basic & ~self.fixed
        x = self.x
        at_lb = np.isfinite(self.lb) & (x <= self.lb)
        at_ub = np.isfinite(self.ub) & (x >= self.ub)
        free = ~at_lb & ~at_ub
        inc = nb & (d < -tol) & ~at_ub
        dec = nb & (d > tol) & ~at_lb
        # a nonbasic variable strictly between bounds may move either way
        inc |= nb & free & (d < -tol)
        dec |= nb & free & (d > tol)
        cand = inc | dec
        if not cand.any():
            return -1, 0
        if bland:
            q = int(np.flatnonzero(cand)[0])
        else:
            score = np.where(cand, np.abs(d), -1.0)
            q = int(np.argmax(score))
        return q, (1 if inc[q] else -1)

    def _ratio(self, alpha: np.ndarray, direction: int, q: int, bland: bool):
        """Harris two-pass ratio test.

        Returns ``(row, theta, bound)``; row ``-1`` means a bound flip of the
        entering column and ``-2`` an unbounded ray.
        """
        tol = self.o.feas_tol
        ptol = self.o.pivot_tol
        rate = -direction * alpha          # d x_B / d theta
        xb = self.x[self.basic]
        lbb = self.lb[self.basic]
        ubb = self.ub[self.basic]
        big = np.abs(rate) > ptol
        dec = big & (rate < 0)
        inc = big & (rate > 0)
        target = np.full(self.m, np.nan)
        side = np.full(self.m, "L")
        # decreasing: infeasible-above stops at ub, otherwise at lb
        m_above = dec & (xb > ubb + tol)
        target[m_above] = ubb[m_above]
        side[m_above] = "U"
        m_dec = dec & ~m_above & (xb >= lbb - tol) & np.isfinite(lbb)
        target[m_dec] = lbb[m_dec]
        side[m_dec] = "L"
        m_below = inc & (xb < lbb - tol)
        target[m_below] = lbb[m_below]
        side[m_below] = "L"
        m_inc = inc & ~m_below & (xb <= ubb + tol) & np.isfinite(ubb)
        target[m_inc] = ubb[m_inc]
        side[m_inc] = "U"
        has = ~np.isnan(target)

        flip = self.ub[q] - self.lb[q]
        flip = flip if np.isfinite(flip) else np.inf

        if not has.any():
            if np.isfinite(flip):
                return -1, flip, ""
            return -2, np.inf, ""

        idx = np.flatnonzero(has)
        dist = target[idx] - xb[idx]
        rt = rate[idx]
        exact = np.maximum(dist / rt, 0.0)
        if bland:
            tmin = exact.min()
            ties = idx[exact <= tmin + 1e-12]
            r = int(ties[np.argmin(self.basic[ties])])
            theta = float(exact[np.flatnonzero(idx == r)[0]])
        else:
            relaxed = (dist + np.sign(rt) * tol) / rt
            tmax = relaxed.min()
            ok = exact <= tmax
            if not ok.any():
                ok = exact <= exact.min()
            sel = idx[ok]
            r = int(sel[np.argmax(np.abs(rate[sel]))])
            theta = float(exact[np.flatnonzero(idx == r)[0]])
        if flip <= theta:
            return -1, flip, ""
        return r, theta, side[r]

    # -- results ---------------------------------------------------------------
    def _finish(self, status: LpStatus, it: int) -> LpSolution:
        lp = self.lp
        n = self.n
        at = np.where(np.isfinite(self.ub) & (self.x >= self.ub), "U",
                      np.where(np.isfinite(self.lb) & (self.x <= self.lb), "L", "Z"))
        basis = Basis(basic=self.basic.copy(), at=at)
        if status is not LpStatus.OPTIMAL:
            xs = self.x[:n] * self.cs
            return LpSolution(status, x=xs, iterations=it, basis=basis)
        # clean primal values from a fresh factorization
        try:
            self._refactor()
        except RuntimeError:
            return LpSolution(LpStatus.NUMERICAL, iterations=it, basis=basis)
        x = self.x[:n] * self.cs
        x = np.clip(x, lp.lb, lp.ub)
        y_s = self.factor.btran(self.c[self.basic]) * self.cscale
        y = y_s * self.rs
        dj = lp.c - lp.a.T @ y
        sol = LpSolution(status, x=x, objective=float(lp.c @ x), y=y,
                         reduced_costs=dj, iterations=it, basis=basis)
        scale = 1.0 + float(np.max(np.abs(lp.rhs), initial=0.0))
        if lp.primal_residual(x) > 1e-6 * scale:
            _log.debug("simplex: residual %.3e after optimal", lp.primal_residual(x))
            sol.status = LpStatus.NUMERICAL
        return sol

    def _solve_unconstrained(self) -> LpSolution:
        lp = self.lp
        x = np.zeros(self.n)
        for j in range(self.n):
            cj, lo, hi = lp.c[j], lp.lb[j], lp.ub[j]
            if cj > 0:
                if not np.isfinite(lo):
                    return LpSolution(LpStatus.UNBOUNDED)
                x[j] = lo
            elif cj < 0:
                if not np.isfinite(hi):
                    return LpSolution(LpStatus.UNBOUNDED)
                x[j] = hi
            else:
                x[j] = lo if np.isfinite(lo) else (hi if np.isfinite(hi) else 0.0)
        return LpSolution(LpStatus.OPTIMAL, x=x, objective=float(lp.c @ x),
                          y=np.zeros(0), reduced_costs=lp.c.copy())


# ----------------------------------------------------------------------------
# optional external backend

def solve_highs(lp: LpProblem, opts: SolveOptions | None = None,
                warm: Basis | None = None) -> LpSolution:
    """Same contract backed by SciPy's HiGHS (debugging / comparison only)."""
    from scipy.optimize import linprog

    le = lp.sense == "L"
    eq = ~le
    a = lp.a
    res = linprog(lp.c, A_ub=a[le] if le.any() else None, b_ub=lp.rhs[le] if le.any() else None,
                  A_eq=a[eq] if eq.any() else None, b_eq=lp.rhs[eq] if eq.any() else None,
                  bounds=np.column_stack([np.where(np.isfinite(lp.lb), lp.lb, -np.inf),
                                          np.where(np.isfinite(lp.ub), lp.ub, np.inf)]),
                  method="highs")
    status = {0: LpStatus.OPTIMAL, 1: LpStatus.ITER_LIMIT, 2: LpStatus.INFEASIBLE,
              3: LpStatus.UNBOUNDED}.get(res.status, LpStatus.NUMERICAL)
    if status is not LpStatus.OPTIMAL:
        return LpSolution(status, iterations=int(getattr(res, "nit", 0)))
    y = np.zeros(lp.shape[0])
    if le.any():
        y[le] = res.ineqlin.marginals
    if eq.any():
        y[eq] = res.eqlin.marginals
    return LpSolution(status, x=res.x, objective=float(res.fun), y=y,
                      reduced_costs=lp.c - lp.a.T @ y, iterations=int(res.nit))


BACKENDS: dict[str, LpBackend] = {"simplex": solve, "highs": solve_highs}


# ----------------------------------------------------------------------------
# CPLEX-LP text export

def _num(v: float) -> str:
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return repr(float(v))


def write_lp(lp: LpProblem, path) -> None:
    """Write ``lp`` in CPLEX LP format (one constraint per line)."""
    m, n = lp.shape
    cn = lp.col_names or [f"x{j}" for j in range(n)]
    rn = lp.row_names or [f"r{i}" for i in range(m)]

    def expr(idx, vals) -> str:
        parts = []
        for j, v in zip(idx, vals):
            sign = "-" if v < 0 else "+"
            parts.append(f"{sign} {_num(abs(v))} {cn[j]}")
        s = " ".join(parts) if parts else "0 " + cn[0] if n else "0"
        return s[2:] if s.startswith("+ ") else s

    csr = lp.a.tocsr()
    lines = ["\\ written by ucround", "Minimize"]
    nz = np.flatnonzero(lp.c)
    lines.append(" obj: " + (expr(nz, lp.c[nz]) if nz.size else "0 " + cn[0]))
    lines.append("Subject To")
    for i in range(m):
        lo, hi = csr.indptr[i], csr.indptr[i + 1]
        op = "<=" if lp.sense[i] == "L" else "="
        lines.append(f" {rn[i]}: {expr(csr.indices[lo:hi], csr.data[lo:hi])} {op} {_num(lp.rhs[i])}")
    lines.append("Bounds")
    for j in range(n):
        lo, hi = lp.lb[j], lp.ub[j]
        if lo == hi:
            lines.append(f" {cn[j]} = {_num(lo)}")
        elif np.isinf(lo) and np.isinf(hi):
            lines.append(f" {cn[j]} free")
        else:
            lines.append(f" {_num(lo)} <= {cn[j]} <= {_num(hi)}")
    lines.append("End")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
