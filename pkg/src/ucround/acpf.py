"""AC power-flow residuals in polar coordinates and their analytic Jacobian.

Balance residuals are ``injection - demand - flow``: for bus ``i``

    p_i = sum_g P_g - Pd_i - V_i sum_k V_k (G_ik cos d_ik + B_ik sin d_ik)
    q_i = sum_g Q_g - Qd_i - V_i sum_k V_k (G_ik sin d_ik - B_ik cos d_ik)

with ``d_ik = theta_i - theta_k`` and the sum running over the nonzeros of
the bus admittance matrix (neighbours and the bus itself). Line limits are
``|Y_m V|^2 <= i_max^2`` on both ends of every branch with a finite rating.
All arrays are ``(rows, horizon)``; time periods never couple.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .case_model import PowerCase
from .formulation import DecisionPoint, VariableLayout
from .network import NetworkMatrices, assemble


@dataclass(frozen=True)
class AcState:
    vm: np.ndarray       # (n_bus, horizon)
    va: np.ndarray       # (n_bus, horizon)

    def __post_init__(self):
        vm = np.atleast_2d(np.asarray(self.vm, dtype=float))
        va = np.atleast_2d(np.asarray(self.va, dtype=float))
        if vm.shape != va.shape:
            raise ValueError("vm and va must have the same shape")
        object.__setattr__(self, "vm", vm)
        object.__setattr__(self, "va", va)

    @property
    def phasor(self) -> np.ndarray:
        return self.vm * np.exp(1j * self.va)

    @classmethod
    def of(cls, point: DecisionPoint) -> "AcState":
        return cls(point.vm, point.va)


@dataclass
class AcResidual:
    p_balance: np.ndarray
    q_balance: np.ndarray
    i_from: np.ndarray   # |I_from|^2 - i_max^2, limited lines only
    i_to: np.ndarray

    def violation(self) -> float:
        parts = [np.abs(self.p_balance), np.abs(self.q_balance),
                 np.maximum(self.i_from, 0.0), np.maximum(self.i_to, 0.0)]
        return float(max((p.max(initial=0.0) for p in parts), default=0.0))


def bus_injections(point: DecisionPoint, case: PowerCase) -> tuple[np.ndarray, np.ndarray]:
    """Per-bus generated P and Q (thermal units plus condensers)."""
    idx = case.bus_index()
    gen_p = np.zeros((case.n_bus, case.horizon))
    gen_q = np.zeros((case.n_bus, case.horizon))
    p, q, qc = point.p, point.q, point.qc
    for g, unit in enumerate(case.thermal_units):
        gen_p[idx[unit.bus]] += p[g]
        gen_q[idx[unit.bus]] += q[g]
    for c, cond in enumerate(case.condensers):
        gen_q[idx[cond.bus]] += qc[c]
    return gen_p, gen_q


def _flows(state: AcState, net: NetworkMatrices) -> tuple[np.ndarray, np.ndarray]:
    """Scalar-form sums ``V_i sum_k V_k (...)`` over the nonzeros of Y."""
    coo = net.y_bus.tocoo()
    i, k = coo.row, coo.col
    g, b = coo.data.real[:, None], coo.data.imag[:, None]
    vm, va = state.vm, state.va
    d = va[i] - va[k]
    vv = vm[i] * vm[k]
    cos, sin = np.cos(d), np.sin(d)
    tp = vv * (g * cos + b * sin)
    tq = vv * (g * sin - b * cos)
    p = np.zeros_like(vm)
    q = np.zeros_like(vm)
    np.add.at(p, i, tp)
    np.add.at(q, i, tq)
    return p, q


def balance_residual(state: AcState, gen_p, gen_q, case: PowerCase,
                     net: NetworkMatrices) -> tuple[np.ndarray, np.ndarray]:
    pd, qd = case.demand_matrices()
    fp, fq = _flows(state, net)
    return np.asarray(gen_p) - pd - fp, np.asarray(gen_q) - qd - fq


def current_sq(state: AcState, net: NetworkMatrices, side: str = "from") -> np.ndarray:
    if side not in ("from", "to"):
        raise ValueError("side must be 'from' or 'to'")
    ym = net.y1 if side == "from" else net.y2
    cur = ym @ state.phasor
    return (cur * cur.conj()).real


def _limits(case: PowerCase) -> tuple[np.ndarray, np.ndarray]:
    imax = np.array([br.i_max for br in case.branches], dtype=float)
    lim = np.flatnonzero(np.isfinite(imax))
    return lim, imax[lim] ** 2


def residual(point: DecisionPoint, case: PowerCase, net: NetworkMatrices | None = None) -> AcResidual:
    net = net or assemble(case)
    state = AcState.of(point)
    gp, gq = bus_injections(point, case)
    pb, qb = balance_residual(state, gp, gq, case, net)
    lim, cap = _limits(case)
    i_f = current_sq(state, net, "from")[lim] - cap[:, None]
    i_t = current_sq(state, net, "to")[lim] - cap[:, None]
    return AcResidual(pb, qb, i_f, i_t)


def ac_violation(point: DecisionPoint, case: PowerCase, net: NetworkMatrices | None = None) -> float:
    return residual(point, case, net).violation()


class AcModel:
    """Residual vector and sparse Jacobian over the full decision vector.

    Row order: p balance ``(bus, t)``, q balance ``(bus, t)``, from-side
    current rows ``(limited line, t)``, to-side current rows. Balance rows are
    equalities, current rows are ``<= 0``.
    """

    def __init__(self, case: PowerCase, net: NetworkMatrices | None = None):
        self.case = case
        self.net = net or assemble(case)
        self.layout = VariableLayout.for_case(case)
        nb, T = case.n_bus, case.horizon
        self.lim, self.cap = _limits(case)
        nlim = len(self.lim)
        self.n_eq = 2 * nb * T
        self.n_ineq = 2 * nlim * T
        self.n_rows = self.n_eq + self.n_ineq
        coo = self.net.y_bus.tocoo()
        self._yi, self._yk, self._yv = coo.row, coo.col, coo.data
        self._y1 = self.net.y1[self.lim].tocoo()
        self._y2 = self.net.y2[self.lim].tocoo()
        # constant generator block of the Jacobian
        L = self.layout
        idx = case.bus_index()
        r, c, v = [], [], []
        for g, unit in enumerate(case.thermal_units):
            b = idx[unit.bus]
            r.extend(b * T + np.arange(T))
            c.extend(L.p[g])
            r.extend(nb * T + b * T + np.arange(T))
            c.extend(L.q[g])
        for k, cond in enumerate(case.condensers):
            b = idx[cond.bus]
            r.extend(nb * T + b * T + np.arange(T))
            c.extend(L.qc[k])
        self._gen = sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(self.n_rows, L.total))

    def rows_sense(self) -> np.ndarray:
        return np.array(["E"] * self.n_eq + ["L"] * self.n_ineq)

    def values(self, x: np.ndarray) -> np.ndarray:
        point = DecisionPoint(self.layout, x)
        res = residual(point, self.case, self.net)
        return np.concatenate([res.p_balance.ravel(), res.q_balance.ravel(),
                               res.i_from.ravel(), res.i_to.ravel()])

    def violation(self, vals: np.ndarray) -> np.ndarray:
        """Nonnegative violation per row."""
        return np.concatenate([np.abs(vals[:self.n_eq]), np.maximum(vals[self.n_eq:], 0.0)])

    def jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        L = self.layout
        case = self.case
        nb, T = case.n_bus, case.horizon
        vm = x[L.vm]
        va = x[L.va]
        V = vm * np.exp(1j * va)
        E = np.exp(1j * va)
        I = self.net.y_bus @ V
        i, k, y = self._yi, self._yk, self._yv[:, None]
        # dS_i/dVm_k and dS_i/dVa_k over the nonzeros of Y
        ds_dvm = V[i] * np.conj(y * E[k])
        ds_dva = -1j * V[i] * np.conj(y * V[k])
        diag = i == k
        ds_dvm[diag] += np.conj(I[i[diag]]) * E[i[diag]]
        ds_dva[diag] += 1j * V[i[diag]] * np.conj(I[i[diag]])
        tt = np.arange(T)
        rows_p = (i[:, None] * T + tt).ravel()
        rows_q = rows_p + nb * T
        cols_vm = L.vm[k].ravel()
        cols_va = L.va[k].ravel()
        r = [rows_p, rows_p, rows_q, rows_q]
        c = [cols_vm, cols_va, cols_vm, cols_va]
        v = [-ds_dvm.real.ravel(), -ds_dva.real.ravel(),
             -ds_dvm.imag.ravel(), -ds_dva.imag.ravel()]
        nlim = len(self.lim)
        for s, ym in enumerate((self._y1, self._y2)):
            if nlim == 0:
                break
            lr, lk, ly = ym.row, ym.col, ym.data[:, None]
            cur = (self.net.y1 if s == 0 else self.net.y2)[self.lim] @ V
            ci = np.conj(cur[lr])
            dvm = 2.0 * (ci * ly * E[lk]).real
            dva = 2.0 * (ci * 1j * ly * V[lk]).real
            base = self.n_eq + s * nlim * T
            rows = (base + lr[:, None] * T + tt).ravel()
            r += [rows, rows]
            c += [L.vm[lk].ravel(), L.va[lk].ravel()]
            v += [dvm.ravel(), dva.ravel()]
        jac = sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
                            shape=(self.n_rows, L.total))
        return (jac + self._gen).tocsr()


def jacobian(point: DecisionPoint, case: PowerCase, net: NetworkMatrices | None = None) -> sp.csr_matrix:
    """Jacobian of all AC rows (see :class:`AcModel`) at ``point``."""
    return AcModel(case, net).jacobian(point.x)
